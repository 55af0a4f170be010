#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace wevibe {

/// Periodic sinc-burst drive signal: one burst every period_s, `count` bursts.
struct ImpulseTrainSpec {
    double central_frequency_hz = 10.0;
    double period_s = 2.0;
    double amplitude = 1.0;  ///< N, arbitrary fixed scale
    int count = 1;
    double sinc_half_width_s = 0.4;
    double edge_taper_s = 0.05;  ///< half-cosine taper length at each truncation edge

    void validate() const {
        if (central_frequency_hz <= 0.0)
            throw std::invalid_argument("sinc central frequency must be positive");
        if (period_s <= 0.0) throw std::invalid_argument("impulse period must be positive");
        if (count < 1) throw std::invalid_argument("impulse count must be >= 1");
        if (sinc_half_width_s <= 0.0)
            throw std::invalid_argument("sinc half width must be positive");
        if (edge_taper_s < 0.0 || edge_taper_s > sinc_half_width_s)
            throw std::invalid_argument("edge taper must be in [0, half width]");
    }
};

/// Burst value at time offset `rel` from the burst center:
/// amplitude * sinc(2 f_c rel), truncated to |rel| <= half width, half-cosine
/// tapered over the outer edge_taper_s of each side.
inline double sinc_burst_value(const ImpulseTrainSpec& spec, double rel) {
    using std::numbers::pi;
    double hw = spec.sinc_half_width_s;
    double e = std::abs(rel);
    if (e > hw) return 0.0;
    double arg = pi * 2.0 * spec.central_frequency_hz * rel;
    double s = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
    double w = 1.0;
    if (spec.edge_taper_s > 0.0 && e > hw - spec.edge_taper_s) {
        w = 0.5 * (1.0 + std::cos(pi * (e - (hw - spec.edge_taper_s)) / spec.edge_taper_s));
    }
    return spec.amplitude * s * w;
}

/// Render the burst train onto a sample grid. Burst k is centered at
/// first_center_s + k * period_s.
inline std::vector<double> render_impulse_train(const ImpulseTrainSpec& spec,
                                                double sampling_rate_hz,
                                                std::size_t num_samples,
                                                double first_center_s) {
    spec.validate();
    std::vector<double> x(num_samples, 0.0);
    for (int k = 0; k < spec.count; ++k) {
        double tc = first_center_s + k * spec.period_s;
        auto lo = static_cast<long long>(std::ceil((tc - spec.sinc_half_width_s) * sampling_rate_hz));
        auto hi = static_cast<long long>(std::floor((tc + spec.sinc_half_width_s) * sampling_rate_hz));
        for (long long i = std::max(0LL, lo); i <= hi && i < static_cast<long long>(num_samples); ++i) {
            x[static_cast<std::size_t>(i)] += sinc_burst_value(spec, i / sampling_rate_hz - tc);
        }
    }
    return x;
}

}  // namespace wevibe
