#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "wevibe/common.hpp"

namespace wevibe {

/// Thin homogeneous rectangular shelf, simply supported on all edges.
///
/// Captures the structural parameters of the plate bending model: flexural
/// rigidity D, mass per unit area rho, Poisson ratio nu. Per-mode viscous
/// damping (zeta) is a simulation extension; the analytical results used as
/// test oracles set it to zero.
struct PlateModel {
    double length_a = 0.9144;         ///< m
    double width_b = 0.4672;          ///< m
    double flexural_rigidity_d = 100.0;  ///< N*m
    double areal_density_rho = 20.0;  ///< kg/m^2
    double poisson_nu = 0.3;
    double modal_damping_zeta = 0.0;
    /// If true, the point-mass coupling term is scaled by 2/(a*b) instead of
    /// entering the denominator with the bare mass.
    bool area_normalized_load = false;

    static constexpr double gravity_g = 9.80665;  ///< m/s^2

    void validate() const {
        if (length_a <= 0.0 || width_b <= 0.0)
            throw std::invalid_argument("plate dimensions must be positive");
        if (flexural_rigidity_d <= 0.0)
            throw std::invalid_argument("flexural rigidity must be positive");
        if (areal_density_rho <= 0.0)
            throw std::invalid_argument("areal density must be positive");
        if (poisson_nu < 0.0 || poisson_nu >= 0.5)
            throw std::invalid_argument("Poisson ratio must be in [0, 0.5)");
        if (modal_damping_zeta < 0.0 || modal_damping_zeta >= 1.0)
            throw std::invalid_argument("damping ratio must be in [0, 1)");
    }

    bool contains(double x, double y) const {
        return x >= 0.0 && x <= length_a && y >= 0.0 && y <= width_b;
    }
};

/// Item idealized as a point mass at a shelf coordinate.
struct PointLoad {
    double mass_m0 = 0.0;  ///< kg
    double pos_x0 = 0.0;   ///< m
    double pos_y0 = 0.0;   ///< m
};

struct SensorPosition {
    double pos_x = 0.0;  ///< m
    double pos_y = 0.0;  ///< m
};

/// Mode numbers (m, n), both >= 1.
struct ModalIndex {
    int m = 1;
    int n = 1;
};

/// Magnitude floor below which a modal denominator counts as resonant.
inline constexpr double kResonanceTolerance = 1e-9;

/// Relative detuning |f_p^2 - f^2| / f^2 below which a frequency counts as
/// on-resonance for the linearity analyses (keeps the first-order mass term
/// small enough that the quadratic remainder stays under 1e-3).
inline constexpr double kOffResonanceDetuning = 0.15;

inline void validate_index(const ModalIndex& idx) {
    if (idx.m < 1 || idx.n < 1)
        throw std::invalid_argument("modal indices must be >= 1");
}

inline void validate_load(const PlateModel& plate, const PointLoad& load) {
    if (load.mass_m0 < 0.0) throw std::invalid_argument("load mass must be >= 0");
    if (!plate.contains(load.pos_x0, load.pos_y0))
        throw std::invalid_argument("load position outside plate bounds");
}

inline void validate_sensor(const PlateModel& plate, const SensorPosition& s) {
    if (!plate.contains(s.pos_x, s.pos_y))
        throw std::invalid_argument("sensor position outside plate bounds");
}

/// Simply supported mode shape sin(m pi x / a) * sin(n pi y / b).
inline double mode_shape(const PlateModel& plate, const ModalIndex& idx, double x, double y) {
    using std::numbers::pi;
    return std::sin(idx.m * pi * x / plate.length_a) *
           std::sin(idx.n * pi * y / plate.width_b);
}

/// Natural angular frequency of mode (m, n) [rad/s]:
/// omega_mn = sqrt(D/rho) * ((m pi / a)^2 + (n pi / b)^2).
inline double modal_frequency(const PlateModel& plate, const ModalIndex& idx) {
    using std::numbers::pi;
    validate_index(idx);
    double km = idx.m * pi / plate.length_a;
    double kn = idx.n * pi / plate.width_b;
    return std::sqrt(plate.flexural_rigidity_d / plate.areal_density_rho) * (km * km + kn * kn);
}

namespace detail {

/// Effective mass coupling of the load into mode (m, n).
inline double load_coupling(const PlateModel& plate, const PointLoad& load,
                            const ModalIndex& idx) {
    double c = load.mass_m0 * mode_shape(plate, idx, load.pos_x0, load.pos_y0);
    if (plate.area_normalized_load) c *= 2.0 / (plate.length_a * plate.width_b);
    return c;
}

/// Full modal denominator at angular frequency omega:
///   -omega^2 (rho + coupling) + D omega_mn^2 + 2j zeta omega sqrt(rho D) omega_mn
inline cplx modal_denominator(const PlateModel& plate, const PointLoad& load,
                              const ModalIndex& idx, double omega) {
    double wmn = modal_frequency(plate, idx);
    double re = -omega * omega * (plate.areal_density_rho + load_coupling(plate, load, idx)) +
                plate.flexural_rigidity_d * wmn * wmn;
    double im = 2.0 * plate.modal_damping_zeta * omega *
                std::sqrt(plate.areal_density_rho * plate.flexural_rigidity_d) * wmn;
    return {re, im};
}

}  // namespace detail

/// Point force applied at a fixed shelf coordinate with a flat (frequency
/// independent) spectral amplitude. Its coefficient in the mode basis is the
/// standard double sine-series projection 4/(ab) * sin * sin.
struct PointSourceExcitation {
    SensorPosition source;
    double amplitude = 1.0;  ///< N per unit bandwidth, arbitrary fixed scale

    cplx modal_force(const PlateModel& plate, const ModalIndex& idx, double /*omega*/) const {
        return amplitude * 4.0 / (plate.length_a * plate.width_b) *
               mode_shape(plate, idx, source.pos_x, source.pos_y);
    }
};

/// Excitation given directly by its spatial Fourier coefficient (test hook).
struct UnitModalExcitation {
    cplx value{1.0, 0.0};
    cplx modal_force(const PlateModel&, const ModalIndex&, double) const { return value; }
};

/// Load-dependent modal spectrum:
///   W(m, n, omega) = F(m, n, omega) /
///     ( -omega^2 (rho + m0 sin(m pi x0/a) sin(n pi y0/b)) + D omega_mn^2 [+ damping] )
///
/// Throws ResonanceError when the denominator magnitude falls at or below
/// `tolerance` (evaluation at an undamped natural frequency).
template <typename Excitation>
cplx exact_spectrum(const PlateModel& plate, const PointLoad& load, const Excitation& exc,
                    const ModalIndex& idx, double omega,
                    double tolerance = kResonanceTolerance) {
    validate_load(plate, load);
    cplx den = detail::modal_denominator(plate, load, idx, omega);
    if (std::abs(den) <= tolerance)
        throw ResonanceError("modal denominator vanishes at omega = " + std::to_string(omega));
    return exc.modal_force(plate, idx, omega) / den;
}

/// First-order expansion of exact_spectrum in the load mass:
///   W(m, n, omega) ~ F / A * (1 + omega^2 sin sin / A * m0),  A = unloaded denominator.
/// Exactly affine in m0; coincides with exact_spectrum at m0 = 0.
template <typename Excitation>
cplx linearized_spectrum(const PlateModel& plate, const PointLoad& load, const Excitation& exc,
                         const ModalIndex& idx, double omega,
                         double tolerance = kResonanceTolerance) {
    validate_load(plate, load);
    PointLoad unloaded = load;
    unloaded.mass_m0 = 0.0;
    cplx a0 = detail::modal_denominator(plate, unloaded, idx, omega);
    if (std::abs(a0) <= tolerance)
        throw ResonanceError("unloaded denominator vanishes at omega = " + std::to_string(omega));
    double coupling_per_kg = mode_shape(plate, idx, load.pos_x0, load.pos_y0);
    if (plate.area_normalized_load) coupling_per_kg *= 2.0 / (plate.length_a * plate.width_b);
    cplx f = exc.modal_force(plate, idx, omega);
    return f / a0 * (1.0 + omega * omega * coupling_per_kg * load.mass_m0 / a0);
}

/// Displacement spectrum at a sensor position by modal superposition over
/// modes m <= truncation.m, n <= truncation.n.
template <typename Excitation>
cplx sensor_spectrum(const PlateModel& plate, const PointLoad& load, const Excitation& exc,
                     const SensorPosition& sensor, double omega,
                     const ModalIndex& truncation = {20, 20},
                     double tolerance = kResonanceTolerance) {
    validate_index(truncation);
    validate_sensor(plate, sensor);
    cplx acc{0.0, 0.0};
    for (int m = 1; m <= truncation.m; ++m) {
        for (int n = 1; n <= truncation.n; ++n) {
            ModalIndex idx{m, n};
            acc += exact_spectrum(plate, load, exc, idx, omega, tolerance) *
                   mode_shape(plate, idx, sensor.pos_x, sensor.pos_y);
        }
    }
    return acc;
}

/// Pole frequency [Hz] of mode (m, n) of the load-free denominator:
/// the omega solving omega^2 rho = D omega_mn^2.
inline double pole_frequency_hz(const PlateModel& plate, const ModalIndex& idx) {
    using std::numbers::pi;
    double wmn = modal_frequency(plate, idx);
    return std::sqrt(plate.flexural_rigidity_d / plate.areal_density_rho) * wmn / (2.0 * pi);
}

/// All pole frequencies up to the truncation order, ascending.
inline std::vector<double> pole_frequencies_hz(const PlateModel& plate,
                                               const ModalIndex& truncation = {20, 20}) {
    std::vector<double> poles;
    poles.reserve(static_cast<std::size_t>(truncation.m) * truncation.n);
    for (int m = 1; m <= truncation.m; ++m)
        for (int n = 1; n <= truncation.n; ++n)
            poles.push_back(pole_frequency_hz(plate, {m, n}));
    std::sort(poles.begin(), poles.end());
    return poles;
}

/// Off-resonance predicate used by the linearity analyses: relative detuning
/// of f from every pole must reach `detuning` (default kOffResonanceDetuning).
inline bool is_off_resonance(double f_hz, const std::vector<double>& poles_hz,
                             double detuning = kOffResonanceDetuning) {
    double f2 = f_hz * f_hz;
    for (double p : poles_hz) {
        if (std::abs(p * p - f2) / f2 < detuning) return false;
    }
    return true;
}

}  // namespace wevibe
