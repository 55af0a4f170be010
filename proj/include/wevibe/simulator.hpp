#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "wevibe/dsp.hpp"
#include "wevibe/excitation.hpp"
#include "wevibe/fft.hpp"
#include "wevibe/plate.hpp"
#include "wevibe/record.hpp"
#include "wevibe/rng.hpp"

namespace wevibe {

/// Everything that defines the physical scene and the synthesis grid.
struct SimulationSetup {
    PlateModel plate;
    PointSourceExcitation source;
    std::vector<SensorPosition> sensors;  ///< shelf sensors; channel 0 is the reference
    ImpulseTrainSpec train;
    double sampling_rate_hz = 51200.0;
    double window_s = 1.0;
    double pre_trigger_s = 0.1;
    double synthesis_max_hz = 2000.0;  ///< transfer evaluated up to here, zero beyond
    ModalIndex truncation{20, 20};

    void validate() const {
        plate.validate();
        train.validate();
        validate_sensor(plate, source.source);
        if (sensors.empty()) throw std::invalid_argument("at least one shelf sensor required");
        for (const auto& s : sensors) validate_sensor(plate, s);
        if (train.period_s < 1.2 * window_s)
            throw std::invalid_argument("impulse period must allow >= 1.2 s per impulse window");
        if (pre_trigger_s + 2.0 * train.sinc_half_width_s > window_s)
            throw std::invalid_argument(
                "burst does not fit the analysis window after the pre-trigger");
        double nw = window_s * sampling_rate_hz;
        double np = train.period_s * sampling_rate_hz;
        if (std::abs(nw - std::llround(nw)) > 1e-9 || std::abs(np - std::llround(np)) > 1e-9)
            throw std::invalid_argument("window and period must be integer sample counts");
    }

    std::size_t window_samples() const {
        return static_cast<std::size_t>(std::llround(window_s * sampling_rate_hz));
    }
    std::size_t period_samples() const {
        return static_cast<std::size_t>(std::llround(train.period_s * sampling_rate_hz));
    }
    std::size_t record_samples() const { return period_samples() * train.count; }
};

/// Transfer values H(f_k) from drive-signal spectrum to sensor displacement
/// spectrum on the grid f_k = k * df_hz, k = 0 .. num_bins-1: the modal
/// superposition of exact_spectrum with a unit point force at the source.
inline std::vector<cplx> transfer_grid(const PlateModel& plate, const PointLoad& load,
                                       const SensorPosition& source,
                                       const SensorPosition& sensor, double df_hz,
                                       std::size_t num_bins, const ModalIndex& truncation) {
    using std::numbers::pi;
    validate_load(plate, load);
    validate_sensor(plate, sensor);
    validate_sensor(plate, source);
    const double a = plate.length_a, b = plate.width_b;
    const double rho = plate.areal_density_rho, d = plate.flexural_rigidity_d;
    std::vector<cplx> h(num_bins, cplx{0.0, 0.0});
    for (int m = 1; m <= truncation.m; ++m) {
        for (int n = 1; n <= truncation.n; ++n) {
            ModalIndex idx{m, n};
            double numer = 4.0 / (a * b) * mode_shape(plate, idx, source.pos_x, source.pos_y) *
                           mode_shape(plate, idx, sensor.pos_x, sensor.pos_y);
            double coupling = load.mass_m0 * mode_shape(plate, idx, load.pos_x0, load.pos_y0);
            if (plate.area_normalized_load) coupling *= 2.0 / (a * b);
            double wmn = modal_frequency(plate, idx);
            double rho_eff = rho + coupling;
            double stiff = d * wmn * wmn;
            double damp = 2.0 * plate.modal_damping_zeta * std::sqrt(rho * d) * wmn;
            for (std::size_t k = 0; k < num_bins; ++k) {
                double omega = 2.0 * pi * df_hz * static_cast<double>(k);
                cplx den{stiff - omega * omega * rho_eff, damp * omega};
                if (std::abs(den) <= kResonanceTolerance)
                    throw ResonanceError("undamped natural frequency on the synthesis grid at " +
                                         std::to_string(df_hz * k) + " Hz");
                h[k] += numer / den;
            }
        }
    }
    return h;
}

namespace detail {

/// Noise-free channels for one load: channel 0 is the rendered drive signal,
/// the rest are per-sensor responses. Each impulse period holds one circular
/// response block of window_s seconds (synthesized on the analysis FFT grid,
/// burst starting pre_trigger_s into the block) followed by silence.
struct CleanChannels {
    std::vector<std::vector<double>> channels;
    std::vector<double> band_power;  ///< 50-240 Hz record power per shelf channel
};

inline CleanChannels synthesize_clean(const SimulationSetup& setup, const PointLoad& load) {
    setup.validate();
    validate_load(setup.plate, load);
    const std::size_t nw = setup.window_samples();
    const std::size_t np = setup.period_samples();
    const std::size_t nr = setup.record_samples();
    const double df = 1.0 / setup.window_s;

    // reference block: burst placed so its support starts at the pre-trigger mark
    std::vector<double> ref_block(nw, 0.0);
    const double tc = setup.pre_trigger_s + setup.train.sinc_half_width_s;
    for (std::size_t i = 0; i < nw; ++i)
        ref_block[i] = sinc_burst_value(setup.train, i / setup.sampling_rate_hz - tc);
    auto drive_spec = rfft(ref_block);

    const std::size_t nbins =
        std::min(drive_spec.size(),
                 static_cast<std::size_t>(setup.synthesis_max_hz / df) + 1);

    CleanChannels out;
    out.channels.emplace_back(nr, 0.0);
    for (int k = 0; k < setup.train.count; ++k)
        std::copy(ref_block.begin(), ref_block.end(),
                  out.channels[0].begin() + static_cast<std::ptrdiff_t>(k * np));

    for (const auto& sensor : setup.sensors) {
        // the drive waveform already carries the force amplitude; transfer_grid
        // is per unit force, so the product is the displacement spectrum
        auto h = transfer_grid(setup.plate, load, setup.source.source, sensor, df, nbins,
                               setup.truncation);
        std::vector<cplx> spec(drive_spec.size(), cplx{0.0, 0.0});
        for (std::size_t k = 0; k < nbins; ++k) spec[k] = h[k] * drive_spec[k];
        auto block = irfft(spec, nw);
        std::vector<double> ch(nr, 0.0);
        for (int k = 0; k < setup.train.count; ++k)
            std::copy(block.begin(), block.end(),
                      ch.begin() + static_cast<std::ptrdiff_t>(k * np));
        out.channels.push_back(std::move(ch));
    }

    // per-channel 50-240 Hz power over the whole record (noise calibration base)
    for (std::size_t c = 1; c < out.channels.size(); ++c) {
        auto spec = rfft(out.channels[c]);
        const double dfr = 1.0 / (nr / setup.sampling_rate_hz);
        std::size_t klo = static_cast<std::size_t>(std::ceil(kBandLowHz / dfr - 1e-9));
        std::size_t khi = static_cast<std::size_t>(std::floor(kBandHighHz / dfr + 1e-9));
        khi = std::min(khi, spec.size() - 1);
        double p = 0.0;
        for (std::size_t k = klo; k <= khi; ++k) p += std::norm(spec[k]);
        out.band_power.push_back(2.0 * p / (static_cast<double>(nr) * nr));
    }
    return out;
}

/// Band-bin count of a record-length spectrum (used by the SNR calibration).
inline std::size_t band_bin_count(std::size_t record_samples, double sampling_rate_hz) {
    const double dfr = sampling_rate_hz / static_cast<double>(record_samples);
    auto klo = static_cast<std::size_t>(std::ceil(kBandLowHz / dfr - 1e-9));
    auto khi = static_cast<std::size_t>(std::floor(kBandHighHz / dfr + 1e-9));
    return khi - klo + 1;
}

inline VibrationRecord stamp_record(const SimulationSetup& setup, const CleanChannels& clean,
                                    double noise_snr_db, std::uint64_t seed) {
    const std::size_t nr = clean.channels.front().size();
    VibrationRecord rec;
    rec.sampling_rate_hz = setup.sampling_rate_hz;
    rec.roles.push_back(ChannelRole::reference);
    rec.channels.emplace_back(clean.channels[0].begin(), clean.channels[0].end());
    const bool noisy = std::isfinite(noise_snr_db);
    for (std::size_t c = 1; c < clean.channels.size(); ++c) {
        rec.roles.push_back(ChannelRole::shelf);
        std::vector<float> ch(nr);
        if (noisy) {
            // white noise, variance set so the 50-240 Hz band of the clean
            // channel sits noise_snr_db above the in-band noise power
            const double snr = std::pow(10.0, noise_snr_db / 10.0);
            const std::size_t nb = band_bin_count(nr, setup.sampling_rate_hz);
            const double sigma2 =
                clean.band_power[c - 1] * static_cast<double>(nr) / (2.0 * nb * snr);
            const double sigma = std::sqrt(sigma2);
            GaussianSampler gauss(derive_seed(seed, "channel-noise", {c}));
            for (std::size_t i = 0; i < nr; ++i)
                ch[i] = static_cast<float>(clean.channels[c][i] + sigma * gauss());
        } else {
            for (std::size_t i = 0; i < nr; ++i)
                ch[i] = static_cast<float>(clean.channels[c][i]);
        }
        rec.channels.push_back(std::move(ch));
    }
    return rec;
}

}  // namespace detail

/// One multi-channel record for a fixed load. Deterministic in (inputs, seed).
inline VibrationRecord synthesize_record(const SimulationSetup& setup, const PointLoad& load,
                                         double noise_snr_db, std::uint64_t seed) {
    auto clean = detail::synthesize_clean(setup, load);
    return detail::stamp_record(setup, clean, noise_snr_db, seed);
}

struct DatasetSpec {
    std::vector<SensorPosition> locations;  ///< load positions (x, y)
    std::vector<double> weights_g;
    int samples_per_class = 28;
    double noise_snr_db = 30.0;
    std::uint64_t master_seed = 20240809;

    void validate() const {
        if (locations.empty()) throw std::invalid_argument("no load locations");
        if (weights_g.empty()) throw std::invalid_argument("no weight classes");
        if (samples_per_class < 1) throw std::invalid_argument("samples per class must be >= 1");
        for (double w : weights_g)
            if (w < 0.0) throw std::invalid_argument("weights must be >= 0");
    }
};

struct ManifestEntry {
    int location_id = 0;     ///< index into DatasetSpec::locations
    double weight_g = 0.0;
    int sample_index = 0;
    std::string file;        ///< record file name within the container
    std::uint64_t seed = 0;  ///< per-record noise seed
};

struct DatasetManifest {
    SimulationSetup setup;
    DatasetSpec spec;
    std::vector<ManifestEntry> entries;
};

using RecordSink = std::function<void(const ManifestEntry&, const VibrationRecord&)>;

/// Full collection protocol: |locations| x |weights| x samples_per_class
/// records, one impulse each, per-record seeds derived from the master seed.
/// Records are streamed to `sink` in manifest order and not kept in memory.
inline DatasetManifest generate_dataset(const SimulationSetup& setup, const DatasetSpec& spec,
                                        const RecordSink& sink) {
    setup.validate();
    spec.validate();
    DatasetManifest manifest;
    manifest.setup = setup;
    manifest.spec = spec;
    for (std::size_t l = 0; l < spec.locations.size(); ++l) {
        for (std::size_t w = 0; w < spec.weights_g.size(); ++w) {
            PointLoad load{spec.weights_g[w] / 1000.0, spec.locations[l].pos_x,
                           spec.locations[l].pos_y};
            auto clean = detail::synthesize_clean(setup, load);
            for (int s = 0; s < spec.samples_per_class; ++s) {
                ManifestEntry e;
                e.location_id = static_cast<int>(l);
                e.weight_g = spec.weights_g[w];
                e.sample_index = s;
                e.seed = derive_seed(spec.master_seed, "record", {l, w, static_cast<std::uint64_t>(s)});
                e.file = "rec_l" + std::to_string(l) + "_w" +
                         std::to_string(static_cast<long long>(std::llround(spec.weights_g[w]))) +
                         "_s" + std::to_string(s) + ".wvb";
                auto rec = detail::stamp_record(setup, clean, spec.noise_snr_db, e.seed);
                manifest.entries.push_back(e);
                if (sink) sink(manifest.entries.back(), rec);
            }
        }
    }
    return manifest;
}

}  // namespace wevibe
