#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace wevibe {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Deterministic sub-seed derivation: every random stream in the project is
/// keyed by (master seed, purpose label, indices). Documented in FORMATS.md.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                 std::initializer_list<std::uint64_t> indices = {}) {
    std::uint64_t h = detail::splitmix64(master ^ detail::fnv1a64(purpose));
    for (std::uint64_t idx : indices) {
        h = detail::splitmix64(h ^ idx);
    }
    return h;
}

/// Gaussian sampler with a pinned algorithm (Box-Muller over mt19937_64).
/// std::normal_distribution is not used because its algorithm is
/// implementation-defined and dataset bytes must be reproducible.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u in (0,1], v in [0,1): 53-bit uniforms
        double u = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
        double v = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u));
        double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Deterministic choice of k training indices out of n (Fisher-Yates prefix).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i + 1 < n && i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k < n ? k : n);
    return idx;
}

}  // namespace wevibe
