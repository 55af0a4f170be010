#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "wevibe/config.hpp"
#include "wevibe/io.hpp"

using namespace wevibe;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("wevibe_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

VibrationRecord random_record(std::uint64_t seed, std::size_t channels = 3,
                              std::size_t samples = 4096) {
    std::mt19937_64 rng(seed);
    VibrationRecord rec;
    rec.sampling_rate_hz = 51200.0;
    for (std::size_t c = 0; c < channels; ++c) {
        std::vector<float> ch(samples);
        for (auto& v : ch) v = static_cast<float>((rng() >> 11) * 0x1.0p-53 - 0.5);
        rec.channels.push_back(std::move(ch));
        rec.roles.push_back(c == 0 ? ChannelRole::reference : ChannelRole::shelf);
    }
    return rec;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("WVB1 round-trip") {
    TempDir tmp;
    auto rec = random_record(1);

    SECTION("write then read is bit-identical") {
        write_record(tmp.path / "a.wvb", rec);
        auto back = read_record(tmp.path / "a.wvb");
        REQUIRE(back.channels == rec.channels);
        REQUIRE(back.sampling_rate_hz == rec.sampling_rate_hz);
    }

    SECTION("bad magic is rejected") {
        write_record(tmp.path / "a.wvb", rec);
        auto bytes = slurp(tmp.path / "a.wvb");
        bytes[0] = 'X';
        std::ofstream(tmp.path / "bad.wvb", std::ios::binary) << bytes;
        REQUIRE_THROWS_AS(read_record(tmp.path / "bad.wvb"), FormatError);
    }

    SECTION("truncated payload is rejected") {
        write_record(tmp.path / "a.wvb", rec);
        auto bytes = slurp(tmp.path / "a.wvb");
        // drop one channel's worth of the final frame
        bytes.resize(bytes.size() - sizeof(float));
        std::ofstream(tmp.path / "short.wvb", std::ios::binary) << bytes;
        REQUIRE_THROWS_AS(read_record(tmp.path / "short.wvb"), FormatError);
    }

    SECTION("fractional sampling rates cannot be stored") {
        auto bad = rec;
        bad.sampling_rate_hz = 51200.5;
        REQUIRE_THROWS_AS(write_record(tmp.path / "a.wvb", bad), FormatError);
    }
}

TEST_CASE("dataset manifest round-trip") {
    TempDir tmp;
    RunConfig cfg = default_config();
    DatasetManifest m;
    m.setup = cfg.setup;
    m.spec = cfg.dataset_spec();
    m.entries.push_back({0, 50.0, 0, "rec_l0_w50_s0.wvb", 123456789ULL});
    m.entries.push_back({1, 300.0, 2, "rec_l1_w300_s2.wvb", 42ULL});
    write_manifest(tmp.path, m);
    auto back = read_manifest(tmp.path);
    REQUIRE(back.entries.size() == 2);
    REQUIRE(back.entries[1].weight_g == 300.0);
    REQUIRE(back.entries[1].seed == 42ULL);
    REQUIRE(back.setup.plate.length_a == m.setup.plate.length_a);
    REQUIRE(back.setup.sensors.size() == m.setup.sensors.size());
    REQUIRE(back.spec.locations.size() == m.spec.locations.size());
    REQUIRE(back.spec.weights_g == m.spec.weights_g);
}

TEST_CASE("model file round-trip is bit-exact") {
    TempDir tmp;
    // fit a small but non-trivial model
    std::mt19937_64 rng(5);
    Eigen::MatrixXd x(12, 20);
    std::vector<double> labels(12);
    for (int r = 0; r < 12; ++r) {
        labels[r] = 50.0 + 50.0 * (r % 4);
        for (int c = 0; c < 20; ++c)
            x(r, c) = (rng() >> 11) * 0x1.0p-53 + 0.001 * labels[r] * ((c * 7) % 5);
    }
    TrainingSelection sel{{50.0, 100.0, 150.0, 200.0}, 1.0};
    auto model = fit_location_model(x, labels, sel, 0.01, 0.95, 9, 3);
    model.sensor_ids = {1, 3};

    save_model(tmp.path / "m.txt", model);
    auto back = load_model(tmp.path / "m.txt");

    REQUIRE(back.location_id == 3);
    REQUIRE(back.lambda == model.lambda);
    REQUIRE(back.pca.mean == model.pca.mean);
    REQUIRE(back.pca.components == model.pca.components);
    REQUIRE(back.pca.ratios == model.pca.ratios);
    REQUIRE(back.scaler.mean == model.scaler.mean);
    REQUIRE(back.scaler.scale == model.scaler.scale);
    REQUIRE(back.ridge.weights == model.ridge.weights);
    REQUIRE(back.ridge.intercept == model.ridge.intercept);
    REQUIRE(back.sensor_ids == model.sensor_ids);
    REQUIRE(back.training_classes_g == model.training_classes_g);

    // a second save of the loaded model reproduces the file byte for byte
    save_model(tmp.path / "m2.txt", back);
    REQUIRE(slurp(tmp.path / "m2.txt") == slurp(tmp.path / "m.txt"));

    // and predictions agree bitwise
    Eigen::VectorXd probe = x.row(7);
    REQUIRE(predict_weight(back, probe).grams == predict_weight(model, probe).grams);
}

TEST_CASE("model file errors") {
    TempDir tmp;
    std::ofstream(tmp.path / "junk.txt") << "not-a-model 1\n";
    REQUIRE_THROWS_AS(load_model(tmp.path / "junk.txt"), FormatError);
    std::ofstream(tmp.path / "trunc.txt") << "wevibe-model 1\nlocation_id 0\n";
    REQUIRE_THROWS_AS(load_model(tmp.path / "trunc.txt"), FormatError);
}

TEST_CASE("config parsing") {
    SECTION("'default' spec loads the built-in defaults") {
        auto cfg = load_config("default");
        REQUIRE(cfg.setup.sampling_rate_hz == 51200.0);
    }

    SECTION("unknown keys are errors at every level") {
        REQUIRE_THROWS_AS(config_from_json({{"banana", 1}}), ConfigError);
        REQUIRE_THROWS_AS(config_from_json({{"plate", {{"lenght_m", 0.9}}}}), ConfigError);
        REQUIRE_THROWS_AS(config_from_json({{"studies", {{"dense", {{"pase_g", 1}}}}}}),
                          ConfigError);
    }

    SECTION("partial configs override only their keys") {
        nlohmann::json j;
        j["dataset"]["samples_per_class"] = 5;
        j["estimator"]["lambda"] = 0.5;
        auto cfg = config_from_json(j);
        REQUIRE(cfg.samples_per_class == 5);
        REQUIRE(cfg.lambda == 0.5);
        REQUIRE(cfg.setup.plate.length_a == Approx(0.9144));
    }

    SECTION("invalid values are rejected") {
        nlohmann::json j;
        j["estimator"]["training_fraction"] = 1.5;
        REQUIRE_THROWS_AS(config_from_json(j), ConfigError);
        nlohmann::json j2;
        j2["dataset"]["location_x0_m"] = 5.0;  // off the shelf
        REQUIRE_THROWS_AS(config_from_json(j2), ConfigError);
    }

    SECTION("round-trips through JSON") {
        auto cfg = default_config();
        auto back = config_from_json(config_to_json(cfg));
        REQUIRE(back.setup.plate.length_a == cfg.setup.plate.length_a);
        REQUIRE(back.weights_g == cfg.weights_g);
        REQUIRE(back.master_seed == cfg.master_seed);
        REQUIRE(back.sensor_combos == cfg.sensor_combos);
    }
}

TEST_CASE("default config carries every protocol constant") {
    auto cfg = default_config();
    REQUIRE(cfg.setup.sampling_rate_hz == 51200.0);       // ADC rate
    REQUIRE(cfg.setup.window_s == 1.0);                   // sample window
    REQUIRE(cfg.setup.pre_trigger_s == 0.1);              // pre-onset margin
    REQUIRE(cfg.band_low_hz == 50);                       // feature band
    REQUIRE(cfg.band_high_hz == 240);
    REQUIRE(cfg.setup.train.period_s == 2.0);             // burst period
    REQUIRE(cfg.setup.train.central_frequency_hz == 10.0);  // sinc center
    REQUIRE(cfg.weights_g.size() == 10);                  // 50..500 g ladder
    REQUIRE(cfg.weights_g.front() == 50.0);
    REQUIRE(cfg.weights_g.back() == 500.0);
    for (std::size_t i = 1; i < cfg.weights_g.size(); ++i)
        REQUIRE(cfg.weights_g[i] - cfg.weights_g[i - 1] == 50.0);
    REQUIRE(cfg.samples_per_class == 28);                 // samples per class
    REQUIRE(cfg.location_count == 4);                     // item locations
    REQUIRE(cfg.location_spacing_m == 0.1524);            // 15.24 cm interval
    REQUIRE(cfg.setup.plate.length_a == 0.9144);          // shelf 91.44 cm
    REQUIRE(cfg.setup.plate.width_b == 0.4672);           // shelf 46.72 cm
    REQUIRE(cfg.training_fraction == 0.1);
    REQUIRE(cfg.training_classes_g == std::vector<double>{50, 300, 500});
    REQUIRE(cfg.grids.class_sets ==
            std::vector<std::vector<double>>{{50, 500}, {50, 300, 500}, {50, 200, 350, 500}});
    REQUIRE(cfg.dense.base_g == 3302.0);
    REQUIRE(cfg.dense.item_g == 61.0);
    REQUIRE(cfg.dense.items == 5);
}

TEST_CASE("result tables") {
    StudyResult r;
    r.cells.push_back({"span", "classes=50+100", 12.5, 3.25, 840, 10});
    r.cells.push_back({"span", "classes=50+500", 6.0, 2.0, 840, 10});
    auto csv = result_table_csv(r);
    REQUIRE(csv == "study,cell,mae_g,std_g,n_pairs,seeds\n"
                   "span,classes=50+100,12.5,3.25,840,10\n"
                   "span,classes=50+500,6,2,840,10\n");
    auto kv = result_summary_kv(r);
    REQUIRE(kv.find("wevibe-summary 1\ncells 2\n") == 0);
    REQUIRE(result_table_csv(r) == csv);  // deterministic bytes
}

TEST_CASE("feature table export") {
    FeatureTable t;
    FeatureEntry e;
    e.location_id = 2;
    e.weight_g = 150.0;
    e.sample_index = 7;
    e.sensor_id = 1;
    e.magnitudes.assign(kFeatureDim, 0.5);
    t.entries.push_back(e);
    auto csv = feature_table_csv(t);
    REQUIRE(csv.find("location_id,weight_g,sample_index,sensor_id,f50,") == 0);
    REQUIRE(csv.find("f240\n") != std::string::npos);
    REQUIRE(csv.find("2,150,7,1,0.5,") != std::string::npos);
}
