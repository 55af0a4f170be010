#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "wevibe/common.hpp"
#include "wevibe/dsp.hpp"
#include "wevibe/evaluation.hpp"
#include "wevibe/simulator.hpp"

namespace wevibe {

/// Complete run configuration. Every paper-stated constant appears here as a
/// default; any field can be overridden by a (partial) JSON config file.
/// Unknown keys in such a file are hard errors.
struct RunConfig {
    SimulationSetup setup;  // plate, source, sensors, impulse train, grids

    // dataset collection grid: item row along the shelf length
    double location_x0_m = 0.2286;
    double location_spacing_m = 0.1524;
    int location_count = 4;
    double location_y_m = 0.14016;
    std::vector<double> weights_g{50, 100, 150, 200, 250, 300, 350, 400, 450, 500};
    int samples_per_class = 28;
    double noise_snr_db = 30.0;

    // pipeline
    int band_low_hz = 50;
    int band_high_hz = 240;
    OnsetParams onsets;

    // estimator
    double variance_target = 0.95;
    double lambda = 0.01;
    std::vector<double> training_classes_g{50, 300, 500};
    double training_fraction = 0.1;
    std::vector<int> estimator_sensors{1};

    // studies
    int study_seeds = 30;
    DataEfficiencyGrids grids;
    std::vector<std::vector<int>> sensor_combos{{1}, {2}, {3}, {1, 3}, {1, 2, 3}};
    DenseLayoutParams dense;

    std::uint64_t master_seed = 20240809;

    std::vector<SensorPosition> locations() const {
        std::vector<SensorPosition> out;
        out.reserve(location_count);
        for (int i = 0; i < location_count; ++i)
            out.push_back({location_x0_m + i * location_spacing_m, location_y_m});
        return out;
    }

    DatasetSpec dataset_spec() const {
        DatasetSpec spec;
        spec.locations = locations();
        spec.weights_g = weights_g;
        spec.samples_per_class = samples_per_class;
        spec.noise_snr_db = noise_snr_db;
        spec.master_seed = master_seed;
        return spec;
    }

    ProtocolParams protocol() const {
        ProtocolParams p;
        p.sensors = estimator_sensors;
        p.training_classes_g = training_classes_g;
        p.training_fraction = training_fraction;
        p.lambda = lambda;
        p.variance_target = variance_target;
        return p;
    }

    void validate() const {
        setup.validate();
        if (band_low_hz != kBandLowHz || band_high_hz != kBandHighHz)
            throw ConfigError("the analysis band is fixed at 50-240 Hz");
        if (location_count < 1) throw ConfigError("location_count must be >= 1");
        for (const auto& l : locations())
            if (!setup.plate.contains(l.pos_x, l.pos_y))
                throw ConfigError("item location outside the shelf");
        if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
        if (variance_target <= 0.0 || variance_target > 1.0)
            throw ConfigError("variance_target must be in (0, 1]");
        if (training_fraction <= 0.0 || training_fraction > 1.0)
            throw ConfigError("training_fraction must be in (0, 1]");
        if (study_seeds < 1) throw ConfigError("studies.seeds must be >= 1");
    }
};

inline RunConfig default_config() {
    RunConfig c;
    c.setup.plate.modal_damping_zeta = 0.02;
    c.setup.source = {{0.82 * c.setup.plate.length_a, 0.23 * c.setup.plate.width_b}, 1.0};
    c.setup.sensors = {{c.setup.plate.length_a - 0.02, c.setup.plate.width_b / 2.0},
                       {c.setup.plate.length_a / 2.0, 0.02},
                       {0.02, c.setup.plate.width_b / 2.0}};
    return c;
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + " must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key))
            throw ConfigError("unknown config key '" + context + "." + key + "'");
    }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace detail

/// Merge a (partial) JSON config onto defaults. Unknown keys anywhere are
/// ConfigErrors, not warnings.
inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c = default_config();
    detail::check_keys(j, {"seed", "plate", "excitation", "sensors", "sampling", "pipeline",
                           "dataset", "estimator", "studies"},
                       "config");
    detail::maybe(j, "seed", c.master_seed);

    if (j.contains("plate")) {
        const auto& p = j.at("plate");
        detail::check_keys(p,
                           {"length_m", "width_m", "flexural_rigidity_nm", "areal_density_kg_m2",
                            "poisson_ratio", "damping_ratio", "area_normalized_load"},
                           "plate");
        detail::maybe(p, "length_m", c.setup.plate.length_a);
        detail::maybe(p, "width_m", c.setup.plate.width_b);
        detail::maybe(p, "flexural_rigidity_nm", c.setup.plate.flexural_rigidity_d);
        detail::maybe(p, "areal_density_kg_m2", c.setup.plate.areal_density_rho);
        detail::maybe(p, "poisson_ratio", c.setup.plate.poisson_nu);
        detail::maybe(p, "damping_ratio", c.setup.plate.modal_damping_zeta);
        detail::maybe(p, "area_normalized_load", c.setup.plate.area_normalized_load);
    }
    if (j.contains("excitation")) {
        const auto& e = j.at("excitation");
        detail::check_keys(e,
                           {"source_x_m", "source_y_m", "amplitude_n", "sinc_central_hz",
                            "period_s", "count", "sinc_half_width_s", "edge_taper_s"},
                           "excitation");
        detail::maybe(e, "source_x_m", c.setup.source.source.pos_x);
        detail::maybe(e, "source_y_m", c.setup.source.source.pos_y);
        detail::maybe(e, "amplitude_n", c.setup.train.amplitude);
        detail::maybe(e, "sinc_central_hz", c.setup.train.central_frequency_hz);
        detail::maybe(e, "period_s", c.setup.train.period_s);
        detail::maybe(e, "count", c.setup.train.count);
        detail::maybe(e, "sinc_half_width_s", c.setup.train.sinc_half_width_s);
        detail::maybe(e, "edge_taper_s", c.setup.train.edge_taper_s);
    }
    if (j.contains("sensors")) {
        c.setup.sensors.clear();
        for (const auto& s : j.at("sensors"))
            c.setup.sensors.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
    }
    if (j.contains("sampling")) {
        const auto& s = j.at("sampling");
        detail::check_keys(s, {"rate_hz", "synthesis_max_hz", "modal_truncation"}, "sampling");
        detail::maybe(s, "rate_hz", c.setup.sampling_rate_hz);
        detail::maybe(s, "synthesis_max_hz", c.setup.synthesis_max_hz);
        if (s.contains("modal_truncation")) {
            c.setup.truncation = {s.at("modal_truncation").at(0).get<int>(),
                                  s.at("modal_truncation").at(1).get<int>()};
        }
    }
    if (j.contains("pipeline")) {
        const auto& p = j.at("pipeline");
        detail::check_keys(p,
                           {"band_low_hz", "band_high_hz", "window_s", "pre_trigger_s",
                            "onset_threshold_factor", "onset_refractory_s", "onset_hop_s"},
                           "pipeline");
        detail::maybe(p, "band_low_hz", c.band_low_hz);
        detail::maybe(p, "band_high_hz", c.band_high_hz);
        detail::maybe(p, "window_s", c.setup.window_s);
        detail::maybe(p, "pre_trigger_s", c.setup.pre_trigger_s);
        detail::maybe(p, "onset_threshold_factor", c.onsets.threshold_factor);
        detail::maybe(p, "onset_refractory_s", c.onsets.refractory_s);
        detail::maybe(p, "onset_hop_s", c.onsets.hop_s);
    }
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        detail::check_keys(d,
                           {"location_x0_m", "location_spacing_m", "location_count",
                            "location_y_m", "weights_g", "samples_per_class", "noise_snr_db"},
                           "dataset");
        detail::maybe(d, "location_x0_m", c.location_x0_m);
        detail::maybe(d, "location_spacing_m", c.location_spacing_m);
        detail::maybe(d, "location_count", c.location_count);
        detail::maybe(d, "location_y_m", c.location_y_m);
        detail::maybe(d, "weights_g", c.weights_g);
        detail::maybe(d, "samples_per_class", c.samples_per_class);
        detail::maybe(d, "noise_snr_db", c.noise_snr_db);
    }
    if (j.contains("estimator")) {
        const auto& e = j.at("estimator");
        detail::check_keys(e,
                           {"variance_target", "lambda", "training_classes_g",
                            "training_fraction", "sensors"},
                           "estimator");
        detail::maybe(e, "variance_target", c.variance_target);
        detail::maybe(e, "lambda", c.lambda);
        detail::maybe(e, "training_classes_g", c.training_classes_g);
        detail::maybe(e, "training_fraction", c.training_fraction);
        detail::maybe(e, "sensors", c.estimator_sensors);
    }
    if (j.contains("studies")) {
        const auto& s = j.at("studies");
        detail::check_keys(s, {"seeds", "class_sets", "fractions", "sensor_combos", "dense"},
                           "studies");
        detail::maybe(s, "seeds", c.study_seeds);
        detail::maybe(s, "class_sets", c.grids.class_sets);
        detail::maybe(s, "fractions", c.grids.fractions);
        detail::maybe(s, "sensor_combos", c.sensor_combos);
        if (s.contains("dense")) {
            const auto& d = s.at("dense");
            detail::check_keys(d, {"base_g", "item_g", "items", "samples_per_class",
                                   "noise_snr_db"},
                               "studies.dense");
            detail::maybe(d, "base_g", c.dense.base_g);
            detail::maybe(d, "item_g", c.dense.item_g);
            detail::maybe(d, "items", c.dense.items);
            detail::maybe(d, "samples_per_class", c.dense.samples_per_class);
            detail::maybe(d, "noise_snr_db", c.dense.noise_snr_db);
        }
    }
    c.validate();
    return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.master_seed;
    j["plate"] = {{"length_m", c.setup.plate.length_a},
                  {"width_m", c.setup.plate.width_b},
                  {"flexural_rigidity_nm", c.setup.plate.flexural_rigidity_d},
                  {"areal_density_kg_m2", c.setup.plate.areal_density_rho},
                  {"poisson_ratio", c.setup.plate.poisson_nu},
                  {"damping_ratio", c.setup.plate.modal_damping_zeta},
                  {"area_normalized_load", c.setup.plate.area_normalized_load}};
    j["excitation"] = {{"source_x_m", c.setup.source.source.pos_x},
                       {"source_y_m", c.setup.source.source.pos_y},
                       {"amplitude_n", c.setup.train.amplitude},
                       {"sinc_central_hz", c.setup.train.central_frequency_hz},
                       {"period_s", c.setup.train.period_s},
                       {"count", c.setup.train.count},
                       {"sinc_half_width_s", c.setup.train.sinc_half_width_s},
                       {"edge_taper_s", c.setup.train.edge_taper_s}};
    nlohmann::json sensors = nlohmann::json::array();
    for (const auto& s : c.setup.sensors) sensors.push_back({s.pos_x, s.pos_y});
    j["sensors"] = sensors;
    j["sampling"] = {{"rate_hz", c.setup.sampling_rate_hz},
                     {"synthesis_max_hz", c.setup.synthesis_max_hz},
                     {"modal_truncation", {c.setup.truncation.m, c.setup.truncation.n}}};
    j["pipeline"] = {{"band_low_hz", c.band_low_hz},
                     {"band_high_hz", c.band_high_hz},
                     {"window_s", c.setup.window_s},
                     {"pre_trigger_s", c.setup.pre_trigger_s},
                     {"onset_threshold_factor", c.onsets.threshold_factor},
                     {"onset_refractory_s", c.onsets.refractory_s},
                     {"onset_hop_s", c.onsets.hop_s}};
    j["dataset"] = {{"location_x0_m", c.location_x0_m},
                    {"location_spacing_m", c.location_spacing_m},
                    {"location_count", c.location_count},
                    {"location_y_m", c.location_y_m},
                    {"weights_g", c.weights_g},
                    {"samples_per_class", c.samples_per_class},
                    {"noise_snr_db", c.noise_snr_db}};
    j["estimator"] = {{"variance_target", c.variance_target},
                      {"lambda", c.lambda},
                      {"training_classes_g", c.training_classes_g},
                      {"training_fraction", c.training_fraction},
                      {"sensors", c.estimator_sensors}};
    j["studies"] = {{"seeds", c.study_seeds},
                    {"class_sets", c.grids.class_sets},
                    {"fractions", c.grids.fractions},
                    {"sensor_combos", c.sensor_combos},
                    {"dense",
                     {{"base_g", c.dense.base_g},
                      {"item_g", c.dense.item_g},
                      {"items", c.dense.items},
                      {"samples_per_class", c.dense.samples_per_class},
                      {"noise_snr_db", c.dense.noise_snr_db}}}};
    return j;
}

/// "default" loads the built-in defaults; anything else is a JSON file path.
inline RunConfig load_config(const std::string& spec) {
    if (spec == "default") return default_config();
    std::ifstream in(spec);
    if (!in) throw ConfigError("cannot open config: " + spec);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    return config_from_json(j);
}

}  // namespace wevibe
