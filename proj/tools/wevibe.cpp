// Command-line front end: simulate -> featurize -> train -> predict/change ->
// evaluate, all driven by one JSON config and a master seed.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "wevibe/config.hpp"
#include "wevibe/estimator.hpp"
#include "wevibe/evaluation.hpp"
#include "wevibe/io.hpp"
#include "wevibe/simulator.hpp"

namespace fs = std::filesystem;
using namespace wevibe;

namespace {

struct SampleRef {
    int location_id;
    double weight_g;
    int sample_index;
};

SampleRef parse_sample_ref(const std::string& s) {
    SampleRef ref{};
    auto a = s.find(':');
    auto b = s.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos)
        throw ConfigError("sample reference must be LOCATION:WEIGHT:INDEX, got '" + s + "'");
    ref.location_id = std::stoi(s.substr(0, a));
    ref.weight_g = std::stod(s.substr(a + 1, b - a - 1));
    ref.sample_index = std::stoi(s.substr(b + 1));
    return ref;
}

RunConfig load_config_with_seed(const std::string& config_spec,
                                const std::optional<std::uint64_t>& seed) {
    RunConfig cfg = load_config(config_spec);
    if (seed) cfg.master_seed = *seed;
    return cfg;
}

/// Features of one dataset sample, concatenated over the model's sensors.
Eigen::VectorXd sample_features(const fs::path& dataset, const DatasetManifest& manifest,
                                const SampleRef& ref, const std::vector<int>& sensors,
                                const OnsetParams& onsets) {
    for (const auto& entry : manifest.entries) {
        if (entry.location_id != ref.location_id || entry.sample_index != ref.sample_index ||
            entry.weight_g != ref.weight_g)
            continue;
        FeatureCollector collect;
        collect.onsets = onsets;
        collect.window_s = manifest.setup.window_s;
        collect.pre_trigger_s = manifest.setup.pre_trigger_s;
        collect(entry, load_container_record(dataset, manifest, entry));
        auto data = assemble_location(collect.table, ref.location_id, sensors);
        if (data.features.rows() != 1) throw FormatError("sample assembly failed");
        return data.features.row(0);
    }
    throw ConfigError("sample not found in dataset manifest");
}

int run_simulate(const std::string& config_spec, const std::optional<std::uint64_t>& seed,
                 const fs::path& out) {
    RunConfig cfg = load_config_with_seed(config_spec, seed);
    ContainerWriter writer(out);
    auto manifest = generate_dataset(cfg.setup, cfg.dataset_spec(), writer);
    write_manifest(out, manifest);
    std::cout << "wrote " << manifest.entries.size() << " records to " << out.string() << "\n";
    return 0;
}

int run_featurize(const fs::path& dataset, const fs::path& out, const std::string& config_spec) {
    RunConfig cfg = load_config(config_spec);
    auto manifest = read_manifest(dataset);
    auto table = featurize_container(dataset, manifest, cfg.onsets);
    write_text(out, feature_table_csv(table));
    std::cout << "wrote " << table.entries.size() << " feature rows to " << out.string() << "\n";
    return 0;
}

int run_train(const fs::path& dataset, const std::string& config_spec,
              const std::optional<std::uint64_t>& seed, std::optional<int> location,
              const fs::path& out) {
    RunConfig cfg = load_config_with_seed(config_spec, seed);
    auto manifest = read_manifest(dataset);
    auto table = featurize_container(dataset, manifest, cfg.onsets);
    TrainingSelection selection{cfg.training_classes_g, cfg.training_fraction};

    auto fit_one = [&](int loc) {
        auto data = assemble_location(table, loc, cfg.estimator_sensors);
        auto model = fit_location_model(data.features, data.weights_g, selection, cfg.lambda,
                                        cfg.variance_target,
                                        derive_seed(cfg.master_seed, "study-seed", {0}), loc);
        model.sensor_ids = cfg.estimator_sensors;
        return model;
    };

    if (location) {
        save_model(out, fit_one(*location));
        std::cout << "wrote model for location " << *location << " to " << out.string() << "\n";
        return 0;
    }
    fs::create_directories(out);
    for (int loc : table.location_ids()) {
        auto path = out / ("model_l" + std::to_string(loc) + ".txt");
        save_model(path, fit_one(loc));
        std::cout << "wrote " << path.string() << "\n";
    }
    return 0;
}

int run_predict(const fs::path& dataset, const fs::path& model_path, const std::string& sample,
                const std::string& config_spec) {
    RunConfig cfg = load_config(config_spec);
    auto model = load_model(model_path);
    auto manifest = read_manifest(dataset);
    auto ref = parse_sample_ref(sample);
    if (ref.location_id != model.location_id)
        throw ConfigError("sample location does not match the model's location");
    auto x = sample_features(dataset, manifest, ref, model.sensor_ids, cfg.onsets);
    std::cout << fmt_double(predict_weight(model, x).grams) << "\n";
    return 0;
}

int run_change(const fs::path& dataset, const fs::path& model_path, const std::string& before,
               const std::string& after, const std::string& config_spec) {
    RunConfig cfg = load_config(config_spec);
    auto model = load_model(model_path);
    auto manifest = read_manifest(dataset);
    auto b = parse_sample_ref(before);
    auto a = parse_sample_ref(after);
    if (b.location_id != a.location_id)
        throw ConfigError("weight change needs two samples from one location");
    if (b.location_id != model.location_id)
        throw ConfigError("sample location does not match the model's location");
    auto xb = sample_features(dataset, manifest, b, model.sensor_ids, cfg.onsets);
    auto xa = sample_features(dataset, manifest, a, model.sensor_ids, cfg.onsets);
    double change = weight_change(predict_weight(model, xb), predict_weight(model, xa));
    std::cout << fmt_double(change) << "\n";
    return 0;
}

int run_evaluate(const fs::path& dataset, const std::string& config_spec,
                 const std::optional<std::uint64_t>& seed, const std::string& study,
                 const fs::path& out) {
    RunConfig cfg = load_config_with_seed(config_spec, seed);
    fs::create_directories(out);

    FeatureTable table;
    bool need_dataset = study != "dense-layout";
    if (need_dataset) {
        if (dataset.empty()) throw ConfigError("--dataset is required for this study");
        auto manifest = read_manifest(dataset);
        table = featurize_container(dataset, manifest, cfg.onsets);
    }

    auto emit = [&](const std::string& name, const StudyResult& result) {
        write_text(out / (name + ".csv"), result_table_csv(result));
        write_text(out / (name + "_summary.txt"), result_summary_kv(result));
        std::cout << result_table_csv(result);
    };

    auto params = cfg.protocol();
    if (study == "change" || study == "all")
        emit("weight_change",
             run_weight_change_report(table, params, cfg.study_seeds, cfg.master_seed));
    if (study == "ablation" || study == "all")
        emit("ablation", run_ablation_study(table, params, cfg.study_seeds, cfg.master_seed));
    if (study == "data-efficiency" || study == "all")
        emit("data_efficiency", run_data_efficiency_study(table, params, cfg.grids,
                                                          cfg.study_seeds, cfg.master_seed));
    if (study == "sensors" || study == "all")
        emit("sensors", run_sensor_study(table, params, cfg.sensor_combos, cfg.study_seeds,
                                         cfg.master_seed));
    if (study == "dense-layout" || study == "all") {
        DenseLayoutParams dense = cfg.dense;
        dense.dataset_seed = derive_seed(cfg.master_seed, "dense-dataset");
        emit("dense_layout", run_dense_layout_study(cfg.setup, cfg.locations(), dense, params,
                                                    cfg.study_seeds, cfg.master_seed));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wevibe: shelf-vibration weight change estimation toolkit"};
    app.require_subcommand(1);

    std::string config_spec = "default";
    std::optional<std::uint64_t> seed;
    std::string dataset, out, model_path, sample, before, after, study = "all";
    std::optional<int> location;

    auto add_common = [&](CLI::App* cmd, bool with_seed = true) {
        cmd->add_option("--config", config_spec, "config JSON path or 'default'");
        if (with_seed) cmd->add_option("--seed", seed, "override the master seed");
    };

    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset container");
    add_common(sim);
    sim->add_option("--out", out, "output dataset directory")->required();

    auto* feat = app.add_subcommand("featurize", "extract feature vectors from a dataset");
    add_common(feat, false);
    feat->add_option("--dataset", dataset, "dataset directory")->required();
    feat->add_option("--out", out, "output CSV path")->required();

    auto* train = app.add_subcommand("train", "fit per-location weight models");
    add_common(train);
    train->add_option("--dataset", dataset, "dataset directory")->required();
    train->add_option("--location", location, "train a single location id");
    train->add_option("--out", out, "model file (with --location) or directory")->required();

    auto* predict = app.add_subcommand("predict", "estimate the weight of one sample");
    add_common(predict, false);
    predict->add_option("--dataset", dataset, "dataset directory")->required();
    predict->add_option("--model", model_path, "model file")->required();
    predict->add_option("--sample", sample, "sample reference LOCATION:WEIGHT:INDEX")->required();

    auto* change = app.add_subcommand("change", "signed weight change between two samples");
    add_common(change, false);
    change->add_option("--dataset", dataset, "dataset directory")->required();
    change->add_option("--model", model_path, "model file")->required();
    change->add_option("--before", before, "sample reference LOCATION:WEIGHT:INDEX")->required();
    change->add_option("--after", after, "sample reference LOCATION:WEIGHT:INDEX")->required();

    auto* eval = app.add_subcommand("evaluate", "run the study suites");
    add_common(eval);
    eval->add_option("--dataset", dataset, "dataset directory");
    eval->add_option("--study", study,
                     "change | ablation | data-efficiency | sensors | dense-layout | all");
    eval->add_option("--out", out, "output directory for tables")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(config_spec, seed, out);
        if (feat->parsed()) return run_featurize(dataset, out, config_spec);
        if (train->parsed()) return run_train(dataset, config_spec, seed, location, out);
        if (predict->parsed()) return run_predict(dataset, model_path, sample, config_spec);
        if (change->parsed()) return run_change(dataset, model_path, before, after, config_spec);
        if (eval->parsed()) return run_evaluate(dataset, config_spec, seed, study, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
