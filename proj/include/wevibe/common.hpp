#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace wevibe {

using cplx = std::complex<double>;

/// Evaluation requested at (or numerically indistinguishable from) an
/// undamped natural frequency.
class ResonanceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Regression problem has no unique minimizer (lambda = 0 on rank-deficient data).
class IllPosedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent on-disk data (bad magic, truncation, shape mismatch).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or unknown configuration content.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wevibe
