#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wevibe {

enum class ChannelRole { reference, shelf };

inline std::string to_string(ChannelRole r) {
    return r == ChannelRole::reference ? "reference" : "shelf";
}

inline ChannelRole channel_role_from_string(const std::string& s) {
    if (s == "reference") return ChannelRole::reference;
    if (s == "shelf") return ChannelRole::shelf;
    throw std::invalid_argument("unknown channel role: " + s);
}

/// Multi-channel time-domain capture. Samples are stored as float32, matching
/// the on-disk payload, so write/read round-trips are bit-exact.
struct VibrationRecord {
    std::vector<std::vector<float>> channels;
    std::vector<ChannelRole> roles;
    double sampling_rate_hz = 51200.0;

    std::size_t num_channels() const { return channels.size(); }
    std::size_t num_samples() const { return channels.empty() ? 0 : channels.front().size(); }
    double duration_s() const { return num_samples() / sampling_rate_hz; }

    std::size_t reference_channel() const {
        for (std::size_t i = 0; i < roles.size(); ++i)
            if (roles[i] == ChannelRole::reference) return i;
        throw std::logic_error("record has no reference channel");
    }

    void validate() const {
        if (channels.empty()) throw std::invalid_argument("record has no channels");
        if (channels.size() != roles.size())
            throw std::invalid_argument("channel/role count mismatch");
        for (const auto& c : channels)
            if (c.size() != channels.front().size())
                throw std::invalid_argument("channels have unequal lengths");
        if (sampling_rate_hz <= 2.0 * 240.0)
            throw std::invalid_argument("sampling rate must exceed twice the 240 Hz band edge");
        int refs = 0;
        for (auto r : roles) refs += (r == ChannelRole::reference) ? 1 : 0;
        if (refs != 1) throw std::invalid_argument("record must have exactly one reference channel");
    }
};

}  // namespace wevibe
