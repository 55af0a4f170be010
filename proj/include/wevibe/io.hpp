#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "wevibe/common.hpp"
#include "wevibe/estimator.hpp"
#include "wevibe/evaluation.hpp"
#include "wevibe/record.hpp"
#include "wevibe/simulator.hpp"

namespace wevibe {

// ---------------------------------------------------------------------------
// number formatting: shortest round-trip decimal, so text formats are
// bit-exact for doubles and byte-deterministic across runs
// ---------------------------------------------------------------------------

inline std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw FormatError("bad floating-point value: '" + std::string(s) + "'");
    return v;
}

// ---------------------------------------------------------------------------
// WVB1 signal files: 16-byte header (magic "WVB1", u32 channel count, u32
// sample count, u32 sampling rate Hz, little-endian), then float32
// little-endian channel-interleaved frames
// ---------------------------------------------------------------------------

namespace detail {
inline void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}
inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
}  // namespace detail

inline void write_record(const std::filesystem::path& path, const VibrationRecord& record) {
    record.validate();
    double rate = record.sampling_rate_hz;
    if (std::abs(rate - std::llround(rate)) > 1e-9 || rate <= 0.0 || rate > 4.0e9)
        throw FormatError("WVB1 requires an integral sampling rate in Hz");

    std::string header = "WVB1";
    detail::put_u32(header, static_cast<std::uint32_t>(record.num_channels()));
    detail::put_u32(header, static_cast<std::uint32_t>(record.num_samples()));
    detail::put_u32(header, static_cast<std::uint32_t>(std::llround(rate)));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    const std::size_t frames = record.num_samples();
    const std::size_t nch = record.num_channels();
    std::vector<float> frame(nch);
    for (std::size_t i = 0; i < frames; ++i) {
        for (std::size_t c = 0; c < nch; ++c) frame[c] = record.channels[c][i];
        out.write(reinterpret_cast<const char*>(frame.data()),
                  static_cast<std::streamsize>(nch * sizeof(float)));
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

/// Reads a WVB1 file. Channel roles are not stored in the signal file; the
/// convention (first channel reference, rest shelf) applies unless the caller
/// reassigns them from a dataset manifest.
inline VibrationRecord read_record(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    unsigned char header[16];
    in.read(reinterpret_cast<char*>(header), 16);
    if (in.gcount() != 16) throw FormatError("truncated header: " + path.string());
    if (std::memcmp(header, "WVB1", 4) != 0)
        throw FormatError("bad magic in " + path.string());
    const std::uint32_t nch = detail::get_u32(header + 4);
    const std::uint32_t nsamp = detail::get_u32(header + 8);
    const std::uint32_t rate = detail::get_u32(header + 12);
    if (nch == 0) throw FormatError("zero channels in " + path.string());

    VibrationRecord rec;
    rec.sampling_rate_hz = rate;
    rec.channels.assign(nch, std::vector<float>(nsamp));
    std::vector<float> frame(nch);
    for (std::uint32_t i = 0; i < nsamp; ++i) {
        in.read(reinterpret_cast<char*>(frame.data()),
                static_cast<std::streamsize>(nch * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(nch * sizeof(float)))
            throw FormatError("truncated payload: " + path.string());
        for (std::uint32_t c = 0; c < nch; ++c) rec.channels[c][i] = frame[c];
    }
    rec.roles.assign(nch, ChannelRole::shelf);
    rec.roles[0] = ChannelRole::reference;
    return rec;
}

// ---------------------------------------------------------------------------
// dataset container: a directory with manifest.json plus one WVB1 per record
// ---------------------------------------------------------------------------

inline nlohmann::json setup_to_json(const SimulationSetup& s) {
    nlohmann::json j;
    j["plate"] = {{"length_m", s.plate.length_a},
                  {"width_m", s.plate.width_b},
                  {"flexural_rigidity_nm", s.plate.flexural_rigidity_d},
                  {"areal_density_kg_m2", s.plate.areal_density_rho},
                  {"poisson_ratio", s.plate.poisson_nu},
                  {"damping_ratio", s.plate.modal_damping_zeta},
                  {"area_normalized_load", s.plate.area_normalized_load}};
    j["source"] = {{"x_m", s.source.source.pos_x},
                   {"y_m", s.source.source.pos_y},
                   {"amplitude_n", s.source.amplitude}};
    nlohmann::json sensors = nlohmann::json::array();
    for (const auto& p : s.sensors) sensors.push_back({p.pos_x, p.pos_y});
    j["sensors"] = sensors;
    j["impulse"] = {{"sinc_central_hz", s.train.central_frequency_hz},
                    {"period_s", s.train.period_s},
                    {"amplitude_n", s.train.amplitude},
                    {"count", s.train.count},
                    {"sinc_half_width_s", s.train.sinc_half_width_s},
                    {"edge_taper_s", s.train.edge_taper_s}};
    j["sampling_rate_hz"] = s.sampling_rate_hz;
    j["window_s"] = s.window_s;
    j["pre_trigger_s"] = s.pre_trigger_s;
    j["synthesis_max_hz"] = s.synthesis_max_hz;
    j["modal_truncation"] = {s.truncation.m, s.truncation.n};
    return j;
}

inline SimulationSetup setup_from_json(const nlohmann::json& j) {
    SimulationSetup s;
    const auto& p = j.at("plate");
    s.plate.length_a = p.at("length_m");
    s.plate.width_b = p.at("width_m");
    s.plate.flexural_rigidity_d = p.at("flexural_rigidity_nm");
    s.plate.areal_density_rho = p.at("areal_density_kg_m2");
    s.plate.poisson_nu = p.at("poisson_ratio");
    s.plate.modal_damping_zeta = p.at("damping_ratio");
    s.plate.area_normalized_load = p.at("area_normalized_load");
    s.source.source.pos_x = j.at("source").at("x_m");
    s.source.source.pos_y = j.at("source").at("y_m");
    s.source.amplitude = j.at("source").at("amplitude_n");
    for (const auto& sp : j.at("sensors"))
        s.sensors.push_back({sp.at(0).get<double>(), sp.at(1).get<double>()});
    const auto& t = j.at("impulse");
    s.train.central_frequency_hz = t.at("sinc_central_hz");
    s.train.period_s = t.at("period_s");
    s.train.amplitude = t.at("amplitude_n");
    s.train.count = t.at("count");
    s.train.sinc_half_width_s = t.at("sinc_half_width_s");
    s.train.edge_taper_s = t.at("edge_taper_s");
    s.sampling_rate_hz = j.at("sampling_rate_hz");
    s.window_s = j.at("window_s");
    s.pre_trigger_s = j.at("pre_trigger_s");
    s.synthesis_max_hz = j.at("synthesis_max_hz");
    s.truncation = {j.at("modal_truncation").at(0).get<int>(),
                    j.at("modal_truncation").at(1).get<int>()};
    return s;
}

inline void write_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest) {
    nlohmann::json j;
    j["format"] = "wevibe-dataset";
    j["version"] = 1;
    j["setup"] = setup_to_json(manifest.setup);
    nlohmann::json locs = nlohmann::json::array();
    for (const auto& l : manifest.spec.locations) locs.push_back({l.pos_x, l.pos_y});
    j["locations"] = locs;
    j["weights_g"] = manifest.spec.weights_g;
    j["samples_per_class"] = manifest.spec.samples_per_class;
    j["noise_snr_db"] = manifest.spec.noise_snr_db;
    j["master_seed"] = manifest.spec.master_seed;
    nlohmann::json roles = nlohmann::json::array();
    roles.push_back("reference");
    for (std::size_t i = 0; i < manifest.setup.sensors.size(); ++i) roles.push_back("shelf");
    j["channel_roles"] = roles;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : manifest.entries) {
        entries.push_back({{"location_id", e.location_id},
                           {"weight_g", e.weight_g},
                           {"sample_index", e.sample_index},
                           {"file", e.file},
                           {"seed", e.seed}});
    }
    j["entries"] = entries;
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw FormatError("cannot write manifest in " + dir.string());
    out << j.dump(2) << "\n";
}

inline DatasetManifest read_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw FormatError("cannot open manifest in " + dir.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest parse error: " + std::string(e.what()));
    }
    if (j.value("format", "") != "wevibe-dataset")
        throw FormatError("not a dataset manifest: " + dir.string());
    DatasetManifest m;
    m.setup = setup_from_json(j.at("setup"));
    for (const auto& l : j.at("locations"))
        m.spec.locations.push_back({l.at(0).get<double>(), l.at(1).get<double>()});
    m.spec.weights_g = j.at("weights_g").get<std::vector<double>>();
    m.spec.samples_per_class = j.at("samples_per_class");
    m.spec.noise_snr_db = j.at("noise_snr_db");
    m.spec.master_seed = j.at("master_seed");
    for (const auto& e : j.at("entries")) {
        ManifestEntry entry;
        entry.location_id = e.at("location_id");
        entry.weight_g = e.at("weight_g");
        entry.sample_index = e.at("sample_index");
        entry.file = e.at("file");
        entry.seed = e.at("seed");
        m.entries.push_back(std::move(entry));
    }
    return m;
}

/// RecordSink that writes a dataset container directory.
struct ContainerWriter {
    std::filesystem::path dir;

    explicit ContainerWriter(std::filesystem::path d) : dir(std::move(d)) {
        std::filesystem::create_directories(dir);
    }
    void operator()(const ManifestEntry& entry, const VibrationRecord& record) const {
        write_record(dir / entry.file, record);
    }
};

/// Load one record of a container, checking it against the manifest.
inline VibrationRecord load_container_record(const std::filesystem::path& dir,
                                             const DatasetManifest& manifest,
                                             const ManifestEntry& entry) {
    auto rec = read_record(dir / entry.file);
    if (rec.num_channels() != manifest.setup.sensors.size() + 1)
        throw FormatError("channel count mismatch vs manifest: " + entry.file);
    if (std::llround(rec.sampling_rate_hz) != std::llround(manifest.setup.sampling_rate_hz))
        throw FormatError("sampling rate mismatch vs manifest: " + entry.file);
    return rec;
}

/// Run the whole container through the pipeline into a feature table.
inline FeatureTable featurize_container(const std::filesystem::path& dir,
                                        const DatasetManifest& manifest,
                                        const OnsetParams& onsets = {}) {
    FeatureCollector collect;
    collect.onsets = onsets;
    collect.window_s = manifest.setup.window_s;
    collect.pre_trigger_s = manifest.setup.pre_trigger_s;
    for (const auto& entry : manifest.entries)
        collect(entry, load_container_record(dir, manifest, entry));
    return std::move(collect.table);
}

// ---------------------------------------------------------------------------
// model files: self-describing key-value text with explicit shape headers
// ---------------------------------------------------------------------------

namespace detail {

inline void write_vector(std::ostream& out, const std::string& key, const Eigen::VectorXd& v) {
    out << key << " vec " << v.size() << "\n";
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out << fmt_double(v(i)) << ((i + 1) % 8 == 0 || i + 1 == v.size() ? "\n" : " ");
}

inline void write_matrix(std::ostream& out, const std::string& key, const Eigen::MatrixXd& m) {
    out << key << " mat " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            out << fmt_double(m(r, c)) << ((c + 1 == m.cols()) ? "\n" : " ");
}

class KvReader {
public:
    explicit KvReader(std::istream& in) : in_(in) {}

    std::string expect_key() {
        std::string key;
        if (!(in_ >> key)) throw FormatError("model file ends unexpectedly");
        return key;
    }
    std::string word() {
        std::string w;
        if (!(in_ >> w)) throw FormatError("model file ends unexpectedly");
        return w;
    }
    double number() { return parse_double(word()); }
    long long integer() {
        auto w = word();
        long long v = 0;
        auto res = std::from_chars(w.data(), w.data() + w.size(), v);
        if (res.ec != std::errc{} || res.ptr != w.data() + w.size())
            throw FormatError("bad integer: '" + w + "'");
        return v;
    }
    Eigen::VectorXd vector(const std::string& key) {
        require(key);
        if (word() != "vec") throw FormatError(key + ": expected vec shape header");
        auto n = integer();
        if (n < 0) throw FormatError(key + ": negative length");
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = number();
        return v;
    }
    Eigen::MatrixXd matrix(const std::string& key) {
        require(key);
        if (word() != "mat") throw FormatError(key + ": expected mat shape header");
        auto r = integer();
        auto c = integer();
        if (r < 0 || c < 0) throw FormatError(key + ": negative shape");
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = number();
        return m;
    }
    void require(const std::string& key) {
        auto got = expect_key();
        if (got != key) throw FormatError("expected key '" + key + "', found '" + got + "'");
    }

private:
    std::istream& in_;
};

}  // namespace detail

inline void save_model(const std::filesystem::path& path, const LocationModel& model) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write model: " + path.string());
    out << "wevibe-model 1\n";
    out << "location_id " << model.location_id << "\n";
    out << "lambda " << fmt_double(model.lambda) << "\n";
    out << "variance_target " << fmt_double(model.variance_target) << "\n";
    out << "expand_squares " << (model.expand_squares ? 1 : 0) << "\n";
    out << "training_fraction " << fmt_double(model.training_fraction) << "\n";
    out << "training_rows " << model.training_rows << "\n";
    out << "training_classes_g vec " << model.training_classes_g.size() << "\n";
    for (std::size_t i = 0; i < model.training_classes_g.size(); ++i)
        out << fmt_double(model.training_classes_g[i])
            << (i + 1 == model.training_classes_g.size() ? "\n" : " ");
    if (model.training_classes_g.empty()) out << "\n";
    out << "sensor_ids vec " << model.sensor_ids.size() << "\n";
    for (std::size_t i = 0; i < model.sensor_ids.size(); ++i)
        out << model.sensor_ids[i] << (i + 1 == model.sensor_ids.size() ? "\n" : " ");
    if (model.sensor_ids.empty()) out << "\n";
    detail::write_vector(out, "pca_mean", model.pca.mean);
    detail::write_matrix(out, "pca_components", model.pca.components);
    detail::write_vector(out, "pca_ratios", model.pca.ratios);
    detail::write_vector(out, "scaler_mean", model.scaler.mean);
    detail::write_vector(out, "scaler_scale", model.scaler.scale);
    detail::write_vector(out, "ridge_weights", model.ridge.weights);
    out << "ridge_intercept " << fmt_double(model.ridge.intercept) << "\n";
    if (!out) throw FormatError("write failed: " + path.string());
}

inline LocationModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open model: " + path.string());
    detail::KvReader kv(in);
    kv.require("wevibe-model");
    if (kv.integer() != 1) throw FormatError("unsupported model version");
    LocationModel m;
    kv.require("location_id");
    m.location_id = static_cast<int>(kv.integer());
    kv.require("lambda");
    m.lambda = kv.number();
    kv.require("variance_target");
    m.variance_target = kv.number();
    kv.require("expand_squares");
    m.expand_squares = kv.integer() != 0;
    kv.require("training_fraction");
    m.training_fraction = kv.number();
    kv.require("training_rows");
    m.training_rows = static_cast<int>(kv.integer());
    auto classes = kv.vector("training_classes_g");
    m.training_classes_g.assign(classes.data(), classes.data() + classes.size());
    auto sensors = kv.vector("sensor_ids");
    for (Eigen::Index i = 0; i < sensors.size(); ++i)
        m.sensor_ids.push_back(static_cast<int>(sensors(i)));
    m.pca.mean = kv.vector("pca_mean");
    m.pca.components = kv.matrix("pca_components");
    m.pca.ratios = kv.vector("pca_ratios");
    m.scaler.mean = kv.vector("scaler_mean");
    m.scaler.scale = kv.vector("scaler_scale");
    m.ridge.weights = kv.vector("ridge_weights");
    kv.require("ridge_intercept");
    m.ridge.intercept = kv.number();
    if (m.pca.components.rows() != m.pca.ratios.size() ||
        m.pca.components.cols() != m.pca.mean.size())
        throw FormatError("inconsistent shapes in model file");
    return m;
}

// ---------------------------------------------------------------------------
// study tables: comma-separated, one row per cell, byte-deterministic
// ---------------------------------------------------------------------------

inline std::string result_table_csv(const StudyResult& result) {
    std::ostringstream os;
    os << "study,cell,mae_g,std_g,n_pairs,seeds\n";
    for (const auto& c : result.cells)
        os << c.study << "," << c.params << "," << fmt_double(c.mae_g) << ","
           << fmt_double(c.std_g) << "," << c.n_pairs << "," << c.seeds << "\n";
    return os.str();
}

/// Machine-readable summary in the model-file key-value shape.
inline std::string result_summary_kv(const StudyResult& result) {
    std::ostringstream os;
    os << "wevibe-summary 1\n";
    os << "cells " << result.cells.size() << "\n";
    for (const auto& c : result.cells) {
        os << "cell " << c.study << " " << c.params << " mae_g " << fmt_double(c.mae_g)
           << " std_g " << fmt_double(c.std_g) << " n_pairs " << c.n_pairs << " seeds "
           << c.seeds << "\n";
    }
    return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw FormatError("cannot write: " + path.string());
    out << content;
}

// ---------------------------------------------------------------------------
// feature export (featurize subcommand)
// ---------------------------------------------------------------------------

inline std::string feature_table_csv(const FeatureTable& table) {
    std::ostringstream os;
    os << "location_id,weight_g,sample_index,sensor_id";
    for (int f = kBandLowHz; f <= kBandHighHz; ++f) os << ",f" << f;
    os << "\n";
    for (const auto& e : table.entries) {
        os << e.location_id << "," << fmt_double(e.weight_g) << "," << e.sample_index << ","
           << e.sensor_id;
        for (double v : e.magnitudes) os << "," << fmt_double(v);
        os << "\n";
    }
    return os.str();
}

}  // namespace wevibe
