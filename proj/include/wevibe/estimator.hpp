#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "wevibe/common.hpp"
#include "wevibe/dsp.hpp"
#include "wevibe/rng.hpp"

namespace wevibe {

/// Principal subspace of a feature matrix: mean vector, orthonormal component
/// rows, and per-component explained-variance ratios (non-increasing).
struct PcaBasis {
    Eigen::VectorXd mean;        ///< d
    Eigen::MatrixXd components;  ///< k x d, orthonormal rows
    Eigen::VectorXd ratios;      ///< k, fractions of total variance

    Eigen::Index dim() const { return mean.size(); }
    Eigen::Index num_components() const { return components.rows(); }

    Eigen::VectorXd project(const Eigen::VectorXd& x) const {
        if (x.size() != mean.size()) throw std::invalid_argument("feature dimension mismatch");
        return components * (x - mean);
    }
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& z) const {
        return components.transpose() * z + mean;
    }
};

/// PCA by SVD of the centered data. Keeps the smallest component count whose
/// cumulative explained variance reaches variance_target, capped at n-1.
/// Component signs are canonicalized (largest-magnitude entry positive).
inline PcaBasis fit_pca(const Eigen::MatrixXd& features, double variance_target = 0.95) {
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (n < 2) throw std::invalid_argument("PCA requires at least 2 rows");
    if (variance_target <= 0.0 || variance_target > 1.0)
        throw std::invalid_argument("variance target must be in (0, 1]");

    PcaBasis basis;
    basis.mean = features.colwise().mean();
    Eigen::MatrixXd centered = features.rowwise() - basis.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    Eigen::VectorXd var = svd.singularValues().array().square();
    const double total = var.sum();

    Eigen::Index max_k = std::min<Eigen::Index>(n - 1, d);
    Eigen::Index k = max_k;
    if (total > 0.0) {
        double cum = 0.0;
        for (Eigen::Index i = 0; i < max_k; ++i) {
            cum += var(i) / total;
            if (cum >= variance_target - 1e-12) {
                k = i + 1;
                break;
            }
        }
    } else {
        k = 1;  // degenerate constant data: keep one (arbitrary) direction
    }

    basis.components = svd.matrixV().leftCols(k).transpose();
    basis.ratios.resize(k);
    for (Eigen::Index i = 0; i < k; ++i)
        basis.ratios(i) = total > 0.0 ? var(i) / total : 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        Eigen::Index at;
        basis.components.row(i).cwiseAbs().maxCoeff(&at);
        if (basis.components(i, at) < 0.0) basis.components.row(i) *= -1.0;
    }
    return basis;
}

struct RidgeModel {
    Eigen::VectorXd weights;
    double intercept = 0.0;
};

/// Minimize ||X w + b - y||^2 + lambda ||w||^2 with unpenalized intercept,
/// via the centered normal equations. lambda = 0 requires full column rank.
inline RidgeModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    if (n < 1) throw std::invalid_argument("ridge requires at least one row");
    if (x.rows() != y.size()) throw std::invalid_argument("row/label count mismatch");
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");

    Eigen::RowVectorXd xm = x.colwise().mean();
    Eigen::MatrixXd xc = x.rowwise() - xm;
    const double ym = y.mean();
    Eigen::VectorXd yc = y.array() - ym;

    if (lambda == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
        if (qr.rank() < k)
            throw IllPosedError("lambda = 0 with rank-deficient design has no unique minimizer");
    }
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += lambda;
    RidgeModel model;
    model.weights = gram.ldlt().solve(xc.transpose() * yc);
    model.intercept = ym - xm * model.weights;
    return model;
}

/// Per-feature affine scaler (training statistics).
struct FeatureScaler {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;  ///< standard deviation; 1 where degenerate

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        return (x - mean).cwiseQuotient(scale);
    }
};

inline FeatureScaler fit_scaler(const Eigen::MatrixXd& x) {
    FeatureScaler s;
    s.mean = x.colwise().mean();
    Eigen::MatrixXd c = x.rowwise() - s.mean.transpose();
    const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
    s.scale = (c.array().square().colwise().sum() / denom).sqrt();
    for (Eigen::Index i = 0; i < s.scale.size(); ++i)
        if (!(s.scale(i) > 0.0)) s.scale(i) = 1.0;
    return s;
}

struct TrainingSelection {
    std::vector<double> classes_g;  ///< weight classes to train on
    double fraction = 0.1;          ///< per-class fraction, floor(fraction*n), min 1
};

/// Fitted per-location estimator: PCA basis over raw magnitudes, a scaler
/// standardizing the ridge inputs to unit variance, and the ridge readout.
/// expand_squares appends squared projections (the quadratic study baseline).
struct LocationModel {
    int location_id = 0;
    PcaBasis pca;
    FeatureScaler scaler;  ///< over (optionally expanded) projections
    RidgeModel ridge;
    double lambda = 0.01;
    bool expand_squares = false;
    // training metadata
    std::vector<double> training_classes_g;
    double training_fraction = 0.1;
    int training_rows = 0;
    double variance_target = 0.95;
    std::vector<int> sensor_ids;  ///< sensors whose features are concatenated

    Eigen::Index feature_dim() const { return pca.dim(); }
};

struct WeightEstimate {
    double grams = 0.0;
    int location_id = 0;
    int sample_index = -1;
};

namespace detail {
inline Eigen::VectorXd expand_projection(const Eigen::VectorXd& z, bool expand_squares) {
    if (!expand_squares) return z;
    Eigen::VectorXd out(2 * z.size());
    out.head(z.size()) = z;
    out.tail(z.size()) = z.array().square();
    return out;
}
}  // namespace detail

/// Deterministic stratified training-row choice: per selected class, the
/// nearest-rounded fraction of its rows (at least one), sampled without
/// replacement from a seed keyed by (seed, location, class slot).
/// Requires at least two distinct selected classes to be present.
inline std::vector<Eigen::Index> select_training_rows(const std::vector<double>& weights_g,
                                                      const TrainingSelection& selection,
                                                      int location_id, std::uint64_t seed) {
    if (selection.fraction <= 0.0 || selection.fraction > 1.0)
        throw std::invalid_argument("training fraction must be in (0, 1]");
    std::map<double, std::vector<Eigen::Index>> by_class;
    for (std::size_t i = 0; i < weights_g.size(); ++i)
        by_class[weights_g[i]].push_back(static_cast<Eigen::Index>(i));

    std::vector<Eigen::Index> train_rows;
    int classes_used = 0;
    for (std::size_t c = 0; c < selection.classes_g.size(); ++c) {
        auto it = by_class.find(selection.classes_g[c]);
        if (it == by_class.end() || it->second.empty()) continue;
        ++classes_used;
        const auto& rows = it->second;
        // nearest rounding with a floor of one: 10% of 28 samples -> 3
        auto n_take = static_cast<std::size_t>(
            std::max<long long>(1, std::llround(selection.fraction * static_cast<double>(rows.size()))));
        n_take = std::min(n_take, rows.size());
        auto picks = sample_without_replacement(
            rows.size(), n_take,
            derive_seed(seed, "train-select", {static_cast<std::uint64_t>(location_id), c}));
        std::sort(picks.begin(), picks.end());
        for (auto p : picks) train_rows.push_back(rows[p]);
    }
    if (classes_used < 2)
        throw std::invalid_argument("training selection must cover at least two weight classes");
    return train_rows;
}

/// Fit the PCA + scaler + ridge stack on an explicit training matrix.
inline LocationModel fit_model_on(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                  double lambda, double variance_target, int location_id = 0,
                                  bool expand_squares = false) {
    LocationModel model;
    model.location_id = location_id;
    model.lambda = lambda;
    model.variance_target = variance_target;
    model.expand_squares = expand_squares;
    model.training_rows = static_cast<int>(x.rows());
    model.pca = fit_pca(x, variance_target);

    Eigen::MatrixXd z(x.rows(), model.pca.num_components() * (expand_squares ? 2 : 1));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        z.row(i) = detail::expand_projection(model.pca.project(x.row(i)), expand_squares);
    model.scaler = fit_scaler(z);
    Eigen::MatrixXd zs(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i) zs.row(i) = model.scaler.apply(z.row(i));
    model.ridge = fit_ridge(zs, y, lambda);
    return model;
}

/// Rows of `features` (n x d) labeled with weights_g: select training rows,
/// then fit. Deterministic in (inputs, seed).
inline LocationModel fit_location_model(const Eigen::MatrixXd& features,
                                        const std::vector<double>& weights_g,
                                        const TrainingSelection& selection, double lambda,
                                        double variance_target, std::uint64_t seed,
                                        int location_id = 0, bool expand_squares = false) {
    if (features.rows() != static_cast<Eigen::Index>(weights_g.size()))
        throw std::invalid_argument("feature/label count mismatch");
    auto train_rows = select_training_rows(weights_g, selection, location_id, seed);

    Eigen::MatrixXd x(train_rows.size(), features.cols());
    Eigen::VectorXd y(train_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
        x.row(i) = features.row(train_rows[i]);
        y(i) = weights_g[train_rows[i]];
    }
    LocationModel model = fit_model_on(x, y, lambda, variance_target, location_id, expand_squares);
    model.training_classes_g = selection.classes_g;
    model.training_fraction = selection.fraction;
    return model;
}

/// grams = ridge(standardize(project(feature))).
inline WeightEstimate predict_weight(const LocationModel& model, const Eigen::VectorXd& feature,
                                     int sample_index = -1) {
    Eigen::VectorXd z = detail::expand_projection(model.pca.project(feature), model.expand_squares);
    WeightEstimate est;
    est.location_id = model.location_id;
    est.sample_index = sample_index;
    est.grams = model.ridge.weights.dot(model.scaler.apply(z)) + model.ridge.intercept;
    return est;
}

inline WeightEstimate predict_weight(const LocationModel& model, const FeatureVector& feature,
                                     int sample_index = -1) {
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
        feature.magnitudes.data(), static_cast<Eigen::Index>(feature.magnitudes.size()));
    return predict_weight(model, x, sample_index);
}

/// Signed change after - before; both estimates must come from one location.
inline double weight_change(const WeightEstimate& before, const WeightEstimate& after) {
    if (before.location_id != after.location_id)
        throw std::invalid_argument("weight change requires estimates from the same location");
    return after.grams - before.grams;
}

}  // namespace wevibe
