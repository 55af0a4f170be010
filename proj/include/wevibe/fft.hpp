#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace wevibe {

namespace detail {
// FFTW plan creation is not thread-safe; execution of independent plans is.
inline std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// Forward real FFT. Returns n/2 + 1 unnormalized bins (numpy rfft convention).
inline std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n / 2 + 1);
    std::vector<double> in(x);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                    reinterpret_cast<fftw_complex*>(out.data()),
                                    FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

/// Inverse of rfft, scaled by 1/n so that irfft(rfft(x), n) == x.
inline std::vector<double> irfft(const std::vector<std::complex<double>>& spec, std::size_t n) {
    std::vector<std::complex<double>> in(spec);
    in.resize(n / 2 + 1, {0.0, 0.0});
    std::vector<double> out(n);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                    reinterpret_cast<fftw_complex*>(in.data()), out.data(),
                                    FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
        fftw_destroy_plan(plan);
    }
    const double scale = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= scale;
    return out;
}

}  // namespace wevibe
