#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wevibe/estimator.hpp"
#include "wevibe/simulator.hpp"

namespace wevibe {

/// One extracted sample: the feature vector of one shelf sensor for one
/// impulse window of one record.
struct FeatureEntry {
    int location_id = 0;
    double weight_g = 0.0;
    int sample_index = 0;
    int sensor_id = 1;  ///< 1-based, matching channel order after the reference
    std::vector<double> magnitudes;
};

struct FeatureTable {
    std::vector<FeatureEntry> entries;

    std::vector<int> location_ids() const {
        std::set<int> ids;
        for (const auto& e : entries) ids.insert(e.location_id);
        return {ids.begin(), ids.end()};
    }
    std::vector<int> sensor_ids() const {
        std::set<int> ids;
        for (const auto& e : entries) ids.insert(e.sensor_id);
        return {ids.begin(), ids.end()};
    }
};

/// Streaming sink for generate_dataset: runs the first impulse window of each
/// record through the pipeline and keeps only features (records are dropped).
struct FeatureCollector {
    OnsetParams onsets;
    double window_s = 1.0;
    double pre_trigger_s = 0.1;
    FeatureTable table;

    void operator()(const ManifestEntry& entry, const VibrationRecord& record) {
        auto times = detect_onsets(record.channels[record.reference_channel()],
                                   record.sampling_rate_hz, onsets);
        auto windows = segment(record, times, window_s, pre_trigger_s);
        if (windows.empty())
            throw std::runtime_error("record yields no analysis window: " + entry.file);
        int sensor = 0;
        for (std::size_t c = 0; c < record.num_channels(); ++c) {
            if (record.roles[c] != ChannelRole::shelf) continue;
            ++sensor;
            auto f = extract_features(windows.front(), c);
            table.entries.push_back({entry.location_id, entry.weight_g, entry.sample_index,
                                     sensor, std::move(f.magnitudes)});
        }
    }
};

/// Per-location design matrix with the chosen sensors' features concatenated
/// in ascending sensor order.
struct LocationData {
    Eigen::MatrixXd features;        ///< n x (191 * |sensors|)
    std::vector<double> weights_g;   ///< n
    std::vector<int> sample_index;   ///< n
};

inline LocationData assemble_location(const FeatureTable& table, int location_id,
                                      const std::vector<int>& sensors) {
    std::vector<int> wanted(sensors);
    std::sort(wanted.begin(), wanted.end());
    if (wanted.empty()) throw std::invalid_argument("sensor subset is empty");

    // key: (weight, sample) -> per-sensor features
    std::map<std::pair<double, int>, std::map<int, const FeatureEntry*>> rows;
    for (const auto& e : table.entries) {
        if (e.location_id != location_id) continue;
        if (!std::binary_search(wanted.begin(), wanted.end(), e.sensor_id)) continue;
        rows[{e.weight_g, e.sample_index}][e.sensor_id] = &e;
    }

    LocationData out;
    std::size_t dim = 0;
    for (const auto& [key, per_sensor] : rows) {
        if (per_sensor.size() != wanted.size())
            throw std::invalid_argument("sensor subset not present for every sample");
        if (dim == 0)
            for (int s : wanted) dim += per_sensor.at(s)->magnitudes.size();
        (void)key;
    }
    out.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    Eigen::Index r = 0;
    for (const auto& [key, per_sensor] : rows) {
        Eigen::Index at = 0;
        for (int s : wanted) {
            const auto& m = per_sensor.at(s)->magnitudes;
            for (double v : m) out.features(r, at++) = v;
        }
        out.weights_g.push_back(key.first);
        out.sample_index.push_back(key.second);
        ++r;
    }
    return out;
}

/// Sample-level aggregate of |error| values.
struct PairStats {
    double mae_g = 0.0;
    double std_g = 0.0;
    std::size_t n_pairs = 0;
};

namespace detail {
inline PairStats stats_of(const std::vector<double>& abs_errors) {
    PairStats s;
    s.n_pairs = abs_errors.size();
    if (abs_errors.empty()) return s;
    double sum = 0.0;
    for (double e : abs_errors) sum += e;
    s.mae_g = sum / abs_errors.size();
    if (abs_errors.size() > 1) {
        double ss = 0.0;
        for (double e : abs_errors) ss += (e - s.mae_g) * (e - s.mae_g);
        s.std_g = std::sqrt(ss / (abs_errors.size() - 1));
    }
    return s;
}
}  // namespace detail

/// Predicted and true weights of the test samples of one location.
struct LocationPredictions {
    int location_id = 0;
    std::vector<double> predicted_g;
    std::vector<double> true_g;
};

struct WeightChangeResult {
    PairStats pooled;
    std::map<int, PairStats> by_location;
    std::map<long long, PairStats> by_magnitude;  ///< keyed by |true change| in grams
    std::size_t big_pairs = 0;          ///< pairs with |true change| >= 100 g
    std::size_t big_pairs_correct = 0;  ///< of those: correct sign and within +-50 g
};

/// Weight-change errors over all ordered pairs of test samples within each
/// location: error = (pred_j - pred_i) - (true_j - true_i). Reporting
/// aggregates by the absolute true change (the signed distributions of (i,j)
/// and (j,i) mirror each other).
inline WeightChangeResult evaluate_weight_change(const std::vector<LocationPredictions>& preds) {
    WeightChangeResult result;
    std::vector<double> pooled;
    std::map<long long, std::vector<double>> by_mag;
    for (const auto& loc : preds) {
        std::vector<double> local;
        const std::size_t n = loc.predicted_g.size();
        if (n != loc.true_g.size())
            throw std::invalid_argument("prediction/label count mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                double pred_change = loc.predicted_g[j] - loc.predicted_g[i];
                double true_change = loc.true_g[j] - loc.true_g[i];
                double err = std::abs(pred_change - true_change);
                local.push_back(err);
                pooled.push_back(err);
                by_mag[std::llround(std::abs(true_change))].push_back(err);
                if (std::abs(true_change) >= 100.0) {
                    ++result.big_pairs;
                    bool sign_ok = (pred_change > 0) == (true_change > 0);
                    if (sign_ok && err <= 50.0) ++result.big_pairs_correct;
                }
            }
        }
        result.by_location[loc.location_id] = detail::stats_of(local);
    }
    result.pooled = detail::stats_of(pooled);
    for (auto& [mag, errs] : by_mag) result.by_magnitude[mag] = detail::stats_of(errs);
    return result;
}

enum class ModelVariant { per_location_linear, global_linear, per_location_quadratic };

inline std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::per_location_linear: return "per-location-linear";
        case ModelVariant::global_linear: return "global-linear";
        case ModelVariant::per_location_quadratic: return "per-location-quadratic";
    }
    return "?";
}

struct ProtocolParams {
    std::vector<int> sensors{1};
    std::vector<double> training_classes_g{50.0, 300.0, 500.0};
    double training_fraction = 0.1;
    double lambda = 0.01;
    double variance_target = 0.95;
};

/// One train/evaluate pass: per-location (or pooled) training on the seeded
/// selection, prediction of every remaining sample, pairwise change errors.
inline WeightChangeResult run_protocol(const FeatureTable& table, const ProtocolParams& params,
                                       ModelVariant variant, std::uint64_t seed) {
    TrainingSelection selection{params.training_classes_g, params.training_fraction};
    auto locations = table.location_ids();
    std::vector<LocationData> data;
    std::vector<std::vector<Eigen::Index>> train_rows;
    data.reserve(locations.size());
    for (std::size_t l = 0; l < locations.size(); ++l) {
        data.push_back(assemble_location(table, locations[l], params.sensors));
        train_rows.push_back(
            select_training_rows(data[l].weights_g, selection, locations[l], seed));
    }

    std::vector<LocationModel> models;
    if (variant == ModelVariant::global_linear) {
        // one model over the union of the per-location selections
        std::size_t total = 0;
        for (const auto& rows : train_rows) total += rows.size();
        Eigen::MatrixXd x(total, data[0].features.cols());
        Eigen::VectorXd y(total);
        Eigen::Index at = 0;
        for (std::size_t l = 0; l < data.size(); ++l) {
            for (auto r : train_rows[l]) {
                x.row(at) = data[l].features.row(r);
                y(at) = data[l].weights_g[r];
                ++at;
            }
        }
        models.assign(locations.size(),
                      fit_model_on(x, y, params.lambda, params.variance_target, -1, false));
    } else {
        const bool quad = variant == ModelVariant::per_location_quadratic;
        for (std::size_t l = 0; l < data.size(); ++l) {
            Eigen::MatrixXd x(train_rows[l].size(), data[l].features.cols());
            Eigen::VectorXd y(train_rows[l].size());
            for (std::size_t i = 0; i < train_rows[l].size(); ++i) {
                x.row(i) = data[l].features.row(train_rows[l][i]);
                y(i) = data[l].weights_g[train_rows[l][i]];
            }
            models.push_back(fit_model_on(x, y, params.lambda, params.variance_target,
                                          locations[l], quad));
        }
    }

    std::vector<LocationPredictions> preds;
    for (std::size_t l = 0; l < data.size(); ++l) {
        std::set<Eigen::Index> in_train(train_rows[l].begin(), train_rows[l].end());
        LocationPredictions p;
        p.location_id = locations[l];
        for (Eigen::Index r = 0; r < data[l].features.rows(); ++r) {
            if (in_train.count(r)) continue;
            p.predicted_g.push_back(
                predict_weight(models[l], Eigen::VectorXd(data[l].features.row(r))).grams);
            p.true_g.push_back(data[l].weights_g[r]);
        }
        preds.push_back(std::move(p));
    }
    return evaluate_weight_change(preds);
}

/// One row of a study table.
struct StudyCell {
    std::string study;
    std::string params;
    double mae_g = 0.0;
    double std_g = 0.0;
    std::size_t n_pairs = 0;
    int seeds = 1;
};

struct StudyResult {
    std::vector<StudyCell> cells;
};

namespace detail {

struct SeedAverage {
    double mae_sum = 0.0;
    double std_sum = 0.0;
    std::size_t n_pairs = 0;
    int count = 0;

    void add(const WeightChangeResult& r) {
        mae_sum += r.pooled.mae_g;
        std_sum += r.pooled.std_g;
        n_pairs = r.pooled.n_pairs;
        ++count;
    }
    StudyCell cell(const std::string& study, const std::string& params) const {
        return {study, params, mae_sum / count, std_sum / count, n_pairs, count};
    }
};

inline std::string classes_tag(const std::vector<double>& classes) {
    std::ostringstream os;
    os << "classes=";
    for (std::size_t i = 0; i < classes.size(); ++i)
        os << (i ? "+" : "") << static_cast<long long>(std::llround(classes[i]));
    return os.str();
}

inline std::string sensors_tag(const std::vector<int>& sensors) {
    std::ostringstream os;
    os << "sensors=";
    for (std::size_t i = 0; i < sensors.size(); ++i) os << (i ? "+" : "") << sensors[i];
    return os.str();
}

inline std::uint64_t study_seed(std::uint64_t master, int i) {
    return derive_seed(master, "study-seed", {static_cast<std::uint64_t>(i)});
}

}  // namespace detail

/// Weight-change report at the default protocol: pooled row plus one row per
/// absolute-change magnitude (only positive magnitudes, mirroring the
/// symmetric negative half).
inline StudyResult run_weight_change_report(const FeatureTable& table,
                                            const ProtocolParams& params, int num_seeds,
                                            std::uint64_t master_seed) {
    StudyResult out;
    detail::SeedAverage pooled;
    std::map<long long, detail::SeedAverage> by_mag;
    std::map<int, detail::SeedAverage> by_loc;
    double big_ok = 0.0;
    for (int s = 0; s < num_seeds; ++s) {
        auto r = run_protocol(table, params, ModelVariant::per_location_linear,
                              detail::study_seed(master_seed, s));
        pooled.add(r);
        for (const auto& [mag, st] : r.by_magnitude) {
            WeightChangeResult tmp;
            tmp.pooled = st;
            by_mag[mag].add(tmp);
        }
        for (const auto& [loc, st] : r.by_location) {
            WeightChangeResult tmp;
            tmp.pooled = st;
            by_loc[loc].add(tmp);
        }
        big_ok += r.big_pairs ? static_cast<double>(r.big_pairs_correct) / r.big_pairs : 1.0;
    }
    out.cells.push_back(pooled.cell("weight-change", "pooled"));
    for (const auto& [mag, avg] : by_mag)
        out.cells.push_back(avg.cell("weight-change", "|change|=" + std::to_string(mag)));
    for (const auto& [loc, avg] : by_loc)
        out.cells.push_back(avg.cell("weight-change", "location=" + std::to_string(loc)));
    StudyCell frac;
    frac.study = "weight-change";
    frac.params = "big-change-accuracy";
    frac.mae_g = big_ok / num_seeds;  // fraction, not grams; labeled by the params tag
    frac.n_pairs = 0;
    frac.seeds = num_seeds;
    out.cells.push_back(frac);
    return out;
}

/// The three model variants on identical splits and seeds.
inline StudyResult run_ablation_study(const FeatureTable& table, const ProtocolParams& params,
                                      int num_seeds, std::uint64_t master_seed) {
    StudyResult out;
    for (ModelVariant v : {ModelVariant::per_location_linear, ModelVariant::global_linear,
                           ModelVariant::per_location_quadratic}) {
        detail::SeedAverage avg;
        for (int s = 0; s < num_seeds; ++s)
            avg.add(run_protocol(table, params, v, detail::study_seed(master_seed, s)));
        out.cells.push_back(avg.cell("ablation", "model=" + to_string(v)));
    }
    return out;
}

struct DataEfficiencyGrids {
    std::vector<std::vector<double>> class_sets{{50.0, 500.0},
                                                {50.0, 300.0, 500.0},
                                                {50.0, 200.0, 350.0, 500.0}};
    std::vector<double> fractions{0.1, 0.2, 0.5, 1.0};
};

/// Span sweep (smallest class paired with each larger), class-count sweep
/// (the interpolation sets), and per-class training-fraction sweep.
inline StudyResult run_data_efficiency_study(const FeatureTable& table,
                                             const ProtocolParams& params,
                                             const DataEfficiencyGrids& grids, int num_seeds,
                                             std::uint64_t master_seed) {
    StudyResult out;
    std::set<double> class_pool;
    for (const auto& e : table.entries) class_pool.insert(e.weight_g);
    std::vector<double> classes(class_pool.begin(), class_pool.end());

    for (std::size_t hi = 1; hi < classes.size(); ++hi) {
        ProtocolParams p = params;
        p.training_classes_g = {classes.front(), classes[hi]};
        detail::SeedAverage avg;
        for (int s = 0; s < num_seeds; ++s)
            avg.add(run_protocol(table, p, ModelVariant::per_location_linear,
                                 detail::study_seed(master_seed, s)));
        out.cells.push_back(avg.cell("span", detail::classes_tag(p.training_classes_g)));
    }
    for (const auto& set : grids.class_sets) {
        ProtocolParams p = params;
        p.training_classes_g = set;
        detail::SeedAverage avg;
        for (int s = 0; s < num_seeds; ++s)
            avg.add(run_protocol(table, p, ModelVariant::per_location_linear,
                                 detail::study_seed(master_seed, s)));
        out.cells.push_back(avg.cell("class-count", detail::classes_tag(set)));
    }
    for (double f : grids.fractions) {
        ProtocolParams p = params;
        p.training_fraction = f;
        detail::SeedAverage avg;
        for (int s = 0; s < num_seeds; ++s)
            avg.add(run_protocol(table, p, ModelVariant::per_location_linear,
                                 detail::study_seed(master_seed, s)));
        std::ostringstream tag;
        tag << "fraction=" << f;
        out.cells.push_back(avg.cell("fraction", tag.str()));
    }
    return out;
}

/// Every single sensor plus the named combinations.
inline StudyResult run_sensor_study(const FeatureTable& table, const ProtocolParams& params,
                                    const std::vector<std::vector<int>>& combos, int num_seeds,
                                    std::uint64_t master_seed) {
    if (table.sensor_ids().size() < 2)
        throw std::invalid_argument("sensor study needs at least two shelf sensors");
    StudyResult out;
    for (const auto& combo : combos) {
        ProtocolParams p = params;
        p.sensors = combo;
        detail::SeedAverage avg;
        for (int s = 0; s < num_seeds; ++s)
            avg.add(run_protocol(table, p, ModelVariant::per_location_linear,
                                 detail::study_seed(master_seed, s)));
        out.cells.push_back(avg.cell("sensors", detail::sensors_tag(combo)));
    }
    return out;
}

struct DenseLayoutParams {
    double base_g = 3302.0;
    double item_g = 61.0;
    int items = 5;              ///< ladder: base, base - item, ..., base - items*item
    int samples_per_class = 28;
    double noise_snr_db = 30.0;
    std::uint64_t dataset_seed = 1;
};

/// Heavy static load per location with small per-item decrements; training on
/// 10% of {min, mid, max} classes. Generates its own synthetic dataset.
inline StudyResult run_dense_layout_study(const SimulationSetup& setup,
                                          const std::vector<SensorPosition>& locations,
                                          const DenseLayoutParams& dense,
                                          const ProtocolParams& base_params, int num_seeds,
                                          std::uint64_t master_seed) {
    std::vector<double> ladder;
    for (int j = dense.items; j >= 0; --j) ladder.push_back(dense.base_g - j * dense.item_g);

    DatasetSpec spec;
    spec.locations = locations;
    spec.weights_g = ladder;
    spec.samples_per_class = dense.samples_per_class;
    spec.noise_snr_db = dense.noise_snr_db;
    spec.master_seed = dense.dataset_seed;

    FeatureCollector collect;
    collect.window_s = setup.window_s;
    collect.pre_trigger_s = setup.pre_trigger_s;
    generate_dataset(setup, spec, std::ref(collect));

    ProtocolParams params = base_params;
    params.training_classes_g = {ladder.front(), ladder[ladder.size() / 2], ladder.back()};

    StudyResult out;
    detail::SeedAverage pooled;
    std::map<int, detail::SeedAverage> by_loc;
    for (int s = 0; s < num_seeds; ++s) {
        auto r = run_protocol(collect.table, params, ModelVariant::per_location_linear,
                              detail::study_seed(master_seed, s));
        pooled.add(r);
        for (const auto& [loc, st] : r.by_location) {
            WeightChangeResult tmp;
            tmp.pooled = st;
            by_loc[loc].add(tmp);
        }
    }
    out.cells.push_back(pooled.cell("dense-layout", detail::classes_tag(params.training_classes_g)));
    for (const auto& [loc, avg] : by_loc)
        out.cells.push_back(avg.cell("dense-layout", "location=" + std::to_string(loc)));
    return out;
}

}  // namespace wevibe
