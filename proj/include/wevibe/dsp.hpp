#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "wevibe/fft.hpp"
#include "wevibe/record.hpp"

namespace wevibe {

inline constexpr int kBandLowHz = 50;
inline constexpr int kBandHighHz = 240;
inline constexpr std::size_t kFeatureDim = 191;  // 50..240 Hz inclusive, 1 Hz bins

struct OnsetParams {
    double threshold_factor = 5.0;
    double refractory_s = 1.5;
    double hop_s = 0.01;  ///< short-time energy envelope hop (RMS per hop)
};

/// Impulse start times [s] on a (reference) channel.
///
/// Two stages: a hop-level trigger on the short-time RMS envelope exceeding
/// threshold_factor x median envelope, then a sample-level refinement to the
/// first sample whose magnitude exceeds the same threshold (scanning from one
/// hop before the trigger). Onsets closer than refractory_s to the previous
/// accepted onset are suppressed. An empty result is valid (no impulse).
inline std::vector<double> detect_onsets(std::span<const float> channel, double sampling_rate_hz,
                                         const OnsetParams& params = {}) {
    std::vector<double> onsets;
    if (channel.empty()) return onsets;
    const std::size_t hop = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(params.hop_s * sampling_rate_hz)));
    const std::size_t num_hops = channel.size() / hop;
    if (num_hops == 0) return onsets;

    std::vector<double> envelope(num_hops);
    for (std::size_t h = 0; h < num_hops; ++h) {
        double acc = 0.0;
        for (std::size_t i = h * hop; i < (h + 1) * hop; ++i)
            acc += static_cast<double>(channel[i]) * channel[i];
        envelope[h] = std::sqrt(acc / hop);
    }
    std::vector<double> sorted(envelope);
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double threshold = params.threshold_factor * median;

    double last_onset = -1e30;
    for (std::size_t h = 0; h < num_hops; ++h) {
        if (!(envelope[h] > threshold)) continue;
        // refine: first sample above threshold, from the previous hop onward
        std::size_t begin = (h > 0 ? h - 1 : 0) * hop;
        std::size_t end = std::min(channel.size(), (h + 1) * hop);
        std::size_t at = end;
        for (std::size_t i = begin; i < end; ++i) {
            if (std::abs(static_cast<double>(channel[i])) > threshold) {
                at = i;
                break;
            }
        }
        if (at == end) continue;  // hop RMS above threshold but no single sample; skip
        double t = at / sampling_rate_hz;
        if (t - last_onset < params.refractory_s) continue;
        onsets.push_back(t);
        last_onset = t;
    }
    return onsets;
}

/// Fixed-length multi-channel slice around one impulse.
struct SampleWindow {
    std::vector<std::vector<float>> channels;  ///< raw slices, no filtering
    double onset_time_s = 0.0;
    double window_s = 1.0;
    double pre_trigger_s = 0.1;
    double sampling_rate_hz = 51200.0;
};

/// Cut one window per onset: [onset - pre_trigger, onset - pre_trigger + window).
/// Windows that would overrun the record bounds are dropped.
inline std::vector<SampleWindow> segment(const VibrationRecord& record,
                                         const std::vector<double>& onsets,
                                         double window_s = 1.0, double pre_trigger_s = 0.1) {
    record.validate();
    const auto n = static_cast<long long>(record.num_samples());
    const auto len = static_cast<long long>(std::llround(window_s * record.sampling_rate_hz));
    std::vector<SampleWindow> windows;
    for (double onset : onsets) {
        auto start = static_cast<long long>(
            std::llround((onset - pre_trigger_s) * record.sampling_rate_hz));
        if (start < 0 || start + len > n) continue;
        SampleWindow w;
        w.onset_time_s = onset;
        w.window_s = window_s;
        w.pre_trigger_s = pre_trigger_s;
        w.sampling_rate_hz = record.sampling_rate_hz;
        w.channels.reserve(record.num_channels());
        for (const auto& ch : record.channels)
            w.channels.emplace_back(ch.begin() + start, ch.begin() + start + len);
        windows.push_back(std::move(w));
    }
    return windows;
}

/// Spectral magnitudes at 50..240 Hz, 1 Hz bins, of one impulse window.
struct FeatureVector {
    std::vector<double> magnitudes;  ///< 191 values, |DFT| (unnormalized)
    std::size_t channel_id = 0;
    double onset_time_s = 0.0;
};

/// Magnitude of the DFT of the 1.0 s window at integer frequencies 50..240 Hz.
/// Rectangular window; bin spacing is the native 1 Hz of the exact 1 s slice.
inline FeatureVector extract_features(const SampleWindow& window, std::size_t channel_id) {
    if (channel_id >= window.channels.size())
        throw std::invalid_argument("channel id out of range");
    if (std::abs(window.window_s - 1.0) > 1e-12)
        throw std::invalid_argument("feature extraction requires a 1.0 s window");
    const auto& ch = window.channels[channel_id];
    const auto n = static_cast<std::size_t>(std::llround(window.sampling_rate_hz));
    if (ch.size() != n)
        throw std::invalid_argument("window length does not match 1.0 s at the sampling rate");
    if (window.sampling_rate_hz <= 2.0 * kBandHighHz)
        throw std::invalid_argument("sampling rate too low for the 240 Hz band edge");

    std::vector<double> x(ch.begin(), ch.end());
    auto spec = rfft(x);
    FeatureVector f;
    f.channel_id = channel_id;
    f.onset_time_s = window.onset_time_s;
    f.magnitudes.resize(kFeatureDim);
    for (std::size_t i = 0; i < kFeatureDim; ++i)
        f.magnitudes[i] = std::abs(spec[kBandLowHz + i]);
    return f;
}

}  // namespace wevibe
