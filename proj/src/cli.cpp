#include "jlvae/cli.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "jlvae/baselines/iforest.hpp"
#include "jlvae/baselines/lof.hpp"
#include "jlvae/checkpoint.hpp"
#include "jlvae/csv.hpp"
#include "jlvae/data/dataset.hpp"
#include "jlvae/data/kdd.hpp"
#include "jlvae/data/synth.hpp"
#include "jlvae/error.hpp"
#include "jlvae/metrics.hpp"
#include "jlvae/model.hpp"
#include "jlvae/robustness.hpp"
#include "jlvae/scoring.hpp"
#include "jlvae/training.hpp"

namespace jlvae {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Logging (level from JLVAE_LOG: debug|info|warn|error; default info)
// ---------------------------------------------------------------------------

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("JLVAE_LOG");
        if (!env) return LogLevel::Info;
        const std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "warn") return LogLevel::Warn;
        if (v == "error") return LogLevel::Error;
        return LogLevel::Info;
    }();
    return level;
}

void log_msg(LogLevel level, const std::string& msg) {
    static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
    if (level >= log_level()) {
        std::cerr << "[" << kNames[static_cast<int>(level)] << "] " << msg << "\n";
    }
}

void log_info(const std::string& msg) { log_msg(LogLevel::Info, msg); }
void log_warn(const std::string& msg) { log_msg(LogLevel::Warn, msg); }

// ---------------------------------------------------------------------------
// Run configuration: preset defaults < config file < command-line flags
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string preset = "kdd99";
    std::uint64_t seed = 42;

    ModelConfig model = ModelConfig::kdd99();
    bool model_dims_pinned = false;  // true when the config file pins dim_x/dim_c

    TrainConfig train;
    double val_fraction = 0.1;

    // eval
    std::size_t folds = 5;
    std::size_t subsample = 150000;  // 0 = full data
    std::size_t mc_samples_score = 10;
    std::size_t lof_k = 20;
    std::size_t lof_cap = 50000;
    std::size_t iforest_trees = 100;
    std::size_t iforest_subsample = 256;

    // robustness
    double target_rate = 0.01;
    std::size_t robustness_rows = 10000;

    // synth
    SynthSpec synth;
};

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("unknown config key '" + key + "' in " + where);
        }
    }
}

void apply_preset(RunConfig& rc, const std::string& preset) {
    rc.preset = preset;
    if (preset == "kdd99") {
        rc.model = ModelConfig::kdd99();
        rc.synth = SynthSpec{};
    } else if (preset == "plant_synth") {
        rc.model = ModelConfig::plant_synth();
        rc.synth = SynthSpec::plant(40000);
    } else {
        throw ConfigError("unknown preset '" + preset + "' (expected kdd99 or plant_synth)");
    }
}

std::vector<std::size_t> sizes_from(const json& j) {
    return j.get<std::vector<std::size_t>>();
}

void load_config_json(RunConfig& rc, const json& j) {
    check_keys(j, {"preset", "seed", "model", "train", "data", "eval", "robustness", "synth"},
               "top level");
    if (j.contains("preset")) apply_preset(rc, j.at("preset").get<std::string>());
    if (j.contains("seed")) rc.seed = j.at("seed").get<std::uint64_t>();

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m,
                   {"dim_x", "dim_c", "latent_x", "latent_c", "recognizer_x_hidden",
                    "recognizer_c_hidden", "generator_x_hidden", "generator_c_hidden",
                    "l1_lambda", "mc_samples_train", "recon_loss"},
                   "model");
        if (m.contains("dim_x")) {
            rc.model.dim_x = m.at("dim_x").get<std::size_t>();
            rc.model_dims_pinned = true;
        }
        if (m.contains("dim_c")) {
            rc.model.dim_c = m.at("dim_c").get<std::size_t>();
            rc.model_dims_pinned = true;
        }
        if (m.contains("latent_x")) rc.model.latent_x = m.at("latent_x").get<std::size_t>();
        if (m.contains("latent_c")) rc.model.latent_c = m.at("latent_c").get<std::size_t>();
        if (m.contains("recognizer_x_hidden"))
            rc.model.recognizer_x_hidden = sizes_from(m.at("recognizer_x_hidden"));
        if (m.contains("recognizer_c_hidden"))
            rc.model.recognizer_c_hidden = sizes_from(m.at("recognizer_c_hidden"));
        if (m.contains("generator_x_hidden"))
            rc.model.generator_x_hidden = sizes_from(m.at("generator_x_hidden"));
        if (m.contains("generator_c_hidden"))
            rc.model.generator_c_hidden = sizes_from(m.at("generator_c_hidden"));
        if (m.contains("l1_lambda")) rc.model.l1_lambda = m.at("l1_lambda").get<double>();
        if (m.contains("mc_samples_train"))
            rc.model.mc_samples_train = m.at("mc_samples_train").get<std::size_t>();
        if (m.contains("recon_loss"))
            rc.model.recon_loss = recon_loss_from_name(m.at("recon_loss").get<std::string>());
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t,
                   {"batch_size", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
                    "max_epochs", "patience", "seed", "val_fraction"},
                   "train");
        if (t.contains("batch_size")) rc.train.batch_size = t.at("batch_size").get<std::size_t>();
        if (t.contains("learning_rate"))
            rc.train.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("adam_beta1")) rc.train.adam_beta1 = t.at("adam_beta1").get<double>();
        if (t.contains("adam_beta2")) rc.train.adam_beta2 = t.at("adam_beta2").get<double>();
        if (t.contains("adam_eps")) rc.train.adam_eps = t.at("adam_eps").get<double>();
        if (t.contains("max_epochs")) rc.train.max_epochs = t.at("max_epochs").get<std::size_t>();
        if (t.contains("patience")) rc.train.patience = t.at("patience").get<std::size_t>();
        if (t.contains("seed")) rc.train.seed = t.at("seed").get<std::uint64_t>();
        if (t.contains("val_fraction")) rc.val_fraction = t.at("val_fraction").get<double>();
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        check_keys(e,
                   {"folds", "subsample", "mc_samples_score", "lof_k", "lof_cap", "iforest_trees",
                    "iforest_subsample"},
                   "eval");
        if (e.contains("folds")) rc.folds = e.at("folds").get<std::size_t>();
        if (e.contains("subsample")) rc.subsample = e.at("subsample").get<std::size_t>();
        if (e.contains("mc_samples_score"))
            rc.mc_samples_score = e.at("mc_samples_score").get<std::size_t>();
        if (e.contains("lof_k")) rc.lof_k = e.at("lof_k").get<std::size_t>();
        if (e.contains("lof_cap")) rc.lof_cap = e.at("lof_cap").get<std::size_t>();
        if (e.contains("iforest_trees"))
            rc.iforest_trees = e.at("iforest_trees").get<std::size_t>();
        if (e.contains("iforest_subsample"))
            rc.iforest_subsample = e.at("iforest_subsample").get<std::size_t>();
    }

    if (j.contains("robustness")) {
        const json& r = j.at("robustness");
        check_keys(r, {"target_rate", "rows"}, "robustness");
        if (r.contains("target_rate")) rc.target_rate = r.at("target_rate").get<double>();
        if (r.contains("rows")) rc.robustness_rows = r.at("rows").get<std::size_t>();
    }

    if (j.contains("synth")) {
        const json& s = j.at("synth");
        check_keys(s,
                   {"n_rows", "dim_x", "dim_c", "latent_x", "latent_c", "noise_x", "noise_c",
                    "anomaly_fraction", "anomaly_scale", "cross_coupling"},
                   "synth");
        if (s.contains("n_rows")) rc.synth.n_rows = s.at("n_rows").get<std::size_t>();
        if (s.contains("dim_x")) rc.synth.dim_x = s.at("dim_x").get<std::size_t>();
        if (s.contains("dim_c")) rc.synth.dim_c = s.at("dim_c").get<std::size_t>();
        if (s.contains("latent_x")) rc.synth.latent_x = s.at("latent_x").get<std::size_t>();
        if (s.contains("latent_c")) rc.synth.latent_c = s.at("latent_c").get<std::size_t>();
        if (s.contains("noise_x")) rc.synth.noise_x = s.at("noise_x").get<double>();
        if (s.contains("noise_c")) rc.synth.noise_c = s.at("noise_c").get<double>();
        if (s.contains("anomaly_fraction"))
            rc.synth.anomaly_fraction = s.at("anomaly_fraction").get<double>();
        if (s.contains("anomaly_scale"))
            rc.synth.anomaly_scale = s.at("anomaly_scale").get<double>();
        if (s.contains("cross_coupling"))
            rc.synth.cross_coupling = s.at("cross_coupling").get<double>();
    }
}

json run_config_to_json(const RunConfig& rc) {
    json j;
    j["preset"] = rc.preset;
    j["seed"] = rc.seed;
    j["model"] = json::parse(model_config_to_json(rc.model));
    j["train"] = {{"batch_size", rc.train.batch_size},
                  {"learning_rate", rc.train.learning_rate},
                  {"adam_beta1", rc.train.adam_beta1},
                  {"adam_beta2", rc.train.adam_beta2},
                  {"adam_eps", rc.train.adam_eps},
                  {"max_epochs", rc.train.max_epochs},
                  {"patience", rc.train.patience},
                  {"seed", rc.train.seed},
                  {"val_fraction", rc.val_fraction}};
    j["eval"] = {{"folds", rc.folds},
                 {"subsample", rc.subsample},
                 {"mc_samples_score", rc.mc_samples_score},
                 {"lof_k", rc.lof_k},
                 {"lof_cap", rc.lof_cap},
                 {"iforest_trees", rc.iforest_trees},
                 {"iforest_subsample", rc.iforest_subsample}};
    j["robustness"] = {{"target_rate", rc.target_rate}, {"rows", rc.robustness_rows}};
    j["synth"] = json::parse(rc.synth.to_json());
    return j;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

class ManifestWriter {
public:
    ManifestWriter(std::string path, std::string command, const RunConfig& rc)
        : path_(std::move(path)), start_(std::chrono::steady_clock::now()) {
        body_["tool_version"] = kToolVersion;
        body_["command"] = std::move(command);
        body_["config"] = run_config_to_json(rc);
    }

    json& body() { return body_; }

    void finish() {
        body_["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_file_atomic(path_, body_.dump(2) + "\n");
    }

private:
    std::string path_;
    std::chrono::steady_clock::time_point start_;
    json body_;
};

std::string dataset_preprocess_fingerprint(const std::string& data_dir) {
    const json manifest = json::parse(read_file(data_dir + "/manifest.json"));
    if (manifest.contains("details")) {
        const json& d = manifest.at("details");
        if (d.contains("preprocess_fingerprint")) {
            return d.at("preprocess_fingerprint").get<std::string>();
        }
        if (d.contains("synth_fingerprint")) {
            return d.at("synth_fingerprint").get<std::string>();
        }
    }
    return "none";
}

// ---------------------------------------------------------------------------
// Shared command helpers
// ---------------------------------------------------------------------------

struct TrainedModel {
    Checkpoint checkpoint;
    TrainHistory history;
};

TrainedModel train_on_dataset(const PreparedDataset& data, RunConfig rc,
                              const std::string& fingerprint) {
    if (!rc.model_dims_pinned) {
        rc.model.dim_x = data.dim_x();
        rc.model.dim_c = data.dim_c();
    }
    rc.model.validate();
    auto [train_set, val_set] = split_train_val(data, rc.val_fraction, mix64(rc.seed ^ 0x51ULL));
    log_info("training on " + std::to_string(train_set.rows()) + " rows, validating on " +
             std::to_string(val_set.rows()));
    TrainResult result = train(train_set, val_set, rc.model, rc.train);
    TrainedModel out;
    out.checkpoint = Checkpoint{rc.model, std::move(result.params), fingerprint};
    out.history = std::move(result.history);
    return out;
}

std::string scores_to_csv(const std::vector<std::size_t>& row_ids,
                          const std::vector<double>& scores,
                          const std::vector<std::uint8_t>* flags) {
    std::ostringstream ss;
    ss << "row_id,score,flagged\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        ss << row_ids[i] << ',' << format_double(scores[i]) << ','
           << (flags ? static_cast<int>((*flags)[i]) : 0) << '\n';
    }
    return ss.str();
}

json metrics_to_json(const MetricsSummary& m) {
    return json{{"prc_auc", m.prc_auc},
                {"aps", m.aps},
                {"roc_auc", m.roc_auc},
                {"top100_precision", m.top100_precision}};
}

MetricsSummary mean_metrics(const std::vector<MetricsSummary>& folds) {
    MetricsSummary mean;
    for (const auto& m : folds) {
        mean.prc_auc += m.prc_auc;
        mean.aps += m.aps;
        mean.roc_auc += m.roc_auc;
        mean.top100_precision += m.top100_precision;
    }
    const double n = static_cast<double>(folds.size());
    mean.prc_auc /= n;
    mean.aps /= n;
    mean.roc_auc /= n;
    mean.top100_precision /= n;
    return mean;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

void cmd_synth(const RunConfig& rc, const std::string& out_dir) {
    SynthSpec spec = rc.synth;
    if (spec.n_rows == 0) throw ConfigError("synth: n_rows must be set (flag --rows or config)");
    spec.validate();
    const SynthResult result = synth_generate(spec, rc.seed);

    std::filesystem::create_directories(out_dir);
    json details;
    details["synth_spec"] = json::parse(spec.to_json());
    details["synth_fingerprint"] = fnv1a_hex(spec.to_json());
    details["seed"] = rc.seed;
    save_dataset(result.data, out_dir, "synth", details.dump());

    ManifestWriter manifest(out_dir + "/run_manifest.json", "synth", rc);
    manifest.body()["rows"] = result.data.rows();
    manifest.body()["anomalies"] = result.data.anomaly_count();
    manifest.body()["dim_x"] = result.data.dim_x();
    manifest.body()["dim_c"] = result.data.dim_c();
    manifest.finish();
    log_info("synth dataset written to " + out_dir);
}

// Reference totals for the retained-label subset of the full intrusion data.
constexpr std::size_t kReferenceTotal = 605803;
constexpr std::size_t kReferenceNormal = 595797;
constexpr std::size_t kReferenceAnomalies = 10006;

json label_counts_json(const LabelFilterResult& filtered) {
    json j;
    j["retained_total"] = filtered.records.size();
    j["retained_normal"] = filtered.normal_count;
    j["retained_anomalies"] = filtered.anomaly_count;
    j["reference_total"] = kReferenceTotal;
    j["reference_normal"] = kReferenceNormal;
    j["reference_anomalies"] = kReferenceAnomalies;
    json per_label;
    for (const auto& [label, count] : filtered.retained) per_label[label] = count;
    j["retained_by_label"] = per_label;
    json dropped;
    for (const auto& [label, count] : filtered.dropped) dropped[label] = count;
    j["dropped_by_label"] = dropped;
    return j;
}

void cmd_preprocess(const RunConfig& rc, const std::string& input_csv,
                    const std::string& out_dir) {
    log_info("parsing " + input_csv);
    KddParseResult parsed = parse_kdd_csv(input_csv);
    if (!parsed.errors.empty()) {
        log_warn(std::to_string(parsed.errors.size()) + " malformed lines (first: line " +
                 std::to_string(parsed.errors.front().line_no) + ": " +
                 parsed.errors.front().message + ")");
    }
    if (parsed.records.empty()) {
        throw ValueError("no parseable records in '" + input_csv + "'");
    }

    LabelFilterResult filtered = filter_labels(std::move(parsed.records));
    if (filtered.records.empty()) {
        throw ValueError("no records remain after label filtering");
    }
    log_info("retained " + std::to_string(filtered.records.size()) + " records (" +
             std::to_string(filtered.anomaly_count) + " anomalies)");

    const PreprocessSpec spec = fit_preprocess(filtered.records);
    const PreparedDataset data = apply_preprocess(spec, filtered.records, &filtered.anomaly);

    std::filesystem::create_directories(out_dir);
    json details;
    details["preprocess_spec"] = json::parse(spec.to_json());
    details["preprocess_fingerprint"] = spec.fingerprint();
    details["label_counts"] = label_counts_json(filtered);
    details["parse_errors"] = parsed.errors.size();
    save_dataset(data, out_dir, "kdd99", details.dump());

    ManifestWriter manifest(out_dir + "/run_manifest.json", "preprocess", rc);
    manifest.body()["input"] = input_csv;
    manifest.body()["rows"] = data.rows();
    manifest.body()["dim_x"] = data.dim_x();
    manifest.body()["dim_c"] = data.dim_c();
    manifest.body()["label_counts"] = label_counts_json(filtered);
    manifest.body()["parse_errors"] = parsed.errors.size();
    manifest.finish();
    log_info("prepared dataset written to " + out_dir + " (behavioral width " +
             std::to_string(data.dim_x()) + ", contextual width " + std::to_string(data.dim_c()) +
             ")");
}

void cmd_train(const RunConfig& rc, const std::string& data_dir, const std::string& out_dir) {
    const PreparedDataset data = load_dataset(data_dir);
    const std::string fingerprint = dataset_preprocess_fingerprint(data_dir);

    TrainedModel trained = train_on_dataset(data, rc, fingerprint);

    std::filesystem::create_directories(out_dir);
    save_checkpoint(trained.checkpoint, out_dir + "/checkpoint.json");
    write_file_atomic(out_dir + "/history.csv", history_to_csv(trained.history));

    ManifestWriter manifest(out_dir + "/run_manifest.json", "train", rc);
    manifest.body()["data_dir"] = data_dir;
    manifest.body()["rows"] = data.rows();
    manifest.body()["epochs_run"] = trained.history.epochs.size();
    if (trained.history.best_epoch) {
        manifest.body()["best_epoch"] = *trained.history.best_epoch;
        manifest.body()["best_val_total"] =
            trained.history.epochs[*trained.history.best_epoch].val_loss.total;
    }
    manifest.finish();
    log_info("checkpoint written to " + out_dir + "/checkpoint.json");
}

void cmd_score(const RunConfig& rc, const std::string& checkpoint_path,
               const std::string& data_dir, const std::string& method_name,
               const std::string& out_csv, std::optional<double> target_rate) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const PreparedDataset data = load_dataset(data_dir);
    if (data.dim_x() != ckpt.config.dim_x || data.dim_c() != ckpt.config.dim_c) {
        throw ShapeError("score: dataset dims (" + std::to_string(data.dim_x()) + ", " +
                         std::to_string(data.dim_c()) + ") do not match checkpoint (" +
                         std::to_string(ckpt.config.dim_x) + ", " +
                         std::to_string(ckpt.config.dim_c) + ")");
    }

    const ScoreMethod method = score_method_from_name(method_name);
    std::vector<double> scores;
    if (method == ScoreMethod::ReconErrorNorm) {
        scores = recon_error_score(ckpt.params, ckpt.config, data.X, data.C);
    } else {
        scores = recon_probability_score(ckpt.params, ckpt.config, data.X, data.C,
                                         rc.mc_samples_score, rc.seed);
    }

    ScoreReport report;
    report.method = method;
    report.scores = std::move(scores);
    if (target_rate) {
        report.threshold = calibrate_threshold(report.scores, *target_rate);
        report.flags = classify(report.scores, *report.threshold);
    }

    write_file_atomic(out_csv, scores_to_csv(data.row_ids, report.scores,
                                             report.flags ? &*report.flags : nullptr));
    json sidecar;
    sidecar["method"] = score_method_name(method);
    sidecar["checkpoint"] = checkpoint_path;
    sidecar["data_dir"] = data_dir;
    sidecar["mc_samples"] = method == ScoreMethod::ReconProbability
                                ? json(rc.mc_samples_score)
                                : json(nullptr);
    sidecar["seed"] = rc.seed;
    sidecar["threshold"] = report.threshold ? json(*report.threshold) : json(nullptr);
    sidecar["target_rate"] = target_rate ? json(*target_rate) : json(nullptr);
    write_file_atomic(out_csv + ".meta.json", sidecar.dump(2) + "\n");
    log_info("scores written to " + out_csv);
}

struct FoldInputs {
    PreparedDataset train_full;  // before train/val split
    PreparedDataset test;
};

// Per-fold materialisation. For raw records the preprocessing statistics are
// fitted on the training split only; prepared directories are used as-is.
class EvalSource {
public:
    virtual ~EvalSource() = default;
    virtual std::size_t rows() const = 0;
    virtual const std::vector<std::uint8_t>& labels() const = 0;
    virtual FoldInputs materialise(const std::vector<std::size_t>& train_idx,
                                   const std::vector<std::size_t>& test_idx) const = 0;
    virtual json describe() const = 0;
};

class PreparedEvalSource final : public EvalSource {
public:
    explicit PreparedEvalSource(PreparedDataset data) : data_(std::move(data)) {
        if (!data_.labels) throw ValueError("eval: dataset has no labels");
    }
    std::size_t rows() const override { return data_.rows(); }
    const std::vector<std::uint8_t>& labels() const override { return *data_.labels; }
    FoldInputs materialise(const std::vector<std::size_t>& train_idx,
                           const std::vector<std::size_t>& test_idx) const override {
        return {data_.subset(train_idx), data_.subset(test_idx)};
    }
    json describe() const override {
        return json{{"kind", "prepared"},
                    {"rows", data_.rows()},
                    {"dim_x", data_.dim_x()},
                    {"dim_c", data_.dim_c()},
                    {"fingerprint", dataset_fingerprint(data_)}};
    }

private:
    PreparedDataset data_;
};

class KddEvalSource final : public EvalSource {
public:
    KddEvalSource(std::vector<RawRecord> records, std::vector<std::uint8_t> anomaly,
                  json label_counts)
        : records_(std::move(records)),
          anomaly_(std::move(anomaly)),
          label_counts_(std::move(label_counts)) {}

    std::size_t rows() const override { return records_.size(); }
    const std::vector<std::uint8_t>& labels() const override { return anomaly_; }

    FoldInputs materialise(const std::vector<std::size_t>& train_idx,
                           const std::vector<std::size_t>& test_idx) const override {
        auto gather = [this](const std::vector<std::size_t>& idx) {
            std::vector<RawRecord> recs;
            std::vector<std::uint8_t> labels;
            recs.reserve(idx.size());
            labels.reserve(idx.size());
            for (auto i : idx) {
                recs.push_back(records_[i]);
                labels.push_back(anomaly_[i]);
            }
            return std::make_pair(std::move(recs), std::move(labels));
        };
        auto [train_recs, train_labels] = gather(train_idx);
        auto [test_recs, test_labels] = gather(test_idx);
        const PreprocessSpec spec = fit_preprocess(train_recs);
        FoldInputs out;
        out.train_full = apply_preprocess(spec, train_recs, &train_labels);
        out.test = apply_preprocess(spec, test_recs, &test_labels);
        return out;
    }

    json describe() const override {
        return json{{"kind", "kdd99_raw"}, {"rows", records_.size()},
                    {"label_counts", label_counts_}};
    }

private:
    std::vector<RawRecord> records_;
    std::vector<std::uint8_t> anomaly_;
    json label_counts_;
};

void cmd_eval(const RunConfig& rc, const std::string& input, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (rc.folds < 2) throw ConfigError("eval: folds must be >= 2");

    std::unique_ptr<EvalSource> source;
    if (fs::is_directory(input)) {
        source = std::make_unique<PreparedEvalSource>(load_dataset(input));
    } else {
        KddParseResult parsed = parse_kdd_csv(input);
        if (!parsed.errors.empty()) {
            log_warn(std::to_string(parsed.errors.size()) + " malformed lines skipped");
        }
        if (parsed.records.empty()) throw ValueError("eval: no parseable records");
        LabelFilterResult filtered = filter_labels(std::move(parsed.records));
        json counts = label_counts_json(filtered);
        std::vector<RawRecord> records = std::move(filtered.records);
        std::vector<std::uint8_t> anomaly = std::move(filtered.anomaly);
        if (rc.subsample > 0 && rc.subsample < records.size()) {
            const auto keep = stratified_subsample(anomaly, rc.subsample, mix64(rc.seed ^ 0x5ab5ULL));
            std::vector<RawRecord> recs;
            std::vector<std::uint8_t> labs;
            recs.reserve(keep.size());
            for (auto i : keep) {
                recs.push_back(std::move(records[i]));
                labs.push_back(anomaly[i]);
            }
            records = std::move(recs);
            anomaly = std::move(labs);
            counts["subsampled_to"] = records.size();
            log_info("stratified subsample: " + std::to_string(records.size()) + " rows");
        }
        source = std::make_unique<KddEvalSource>(std::move(records), std::move(anomaly),
                                                 std::move(counts));
    }

    const auto folds = stratified_kfold(source->labels(), rc.folds, mix64(rc.seed ^ 0xf01dULL));

    const std::array<const char*, 4> method_names = {"jlvae_recon_error",
                                                     "jlvae_recon_probability", "iforest", "lof"};
    std::array<std::vector<MetricsSummary>, 4> per_method;
    json fold_details = json::array();

    for (std::size_t f = 0; f < folds.size(); ++f) {
        log_info("fold " + std::to_string(f + 1) + "/" + std::to_string(folds.size()));
        const auto train_idx = fold_complement(folds, f);
        FoldInputs inputs = source->materialise(train_idx, folds[f]);
        const auto& test_labels = *inputs.test.labels;

        RunConfig fold_rc = rc;
        fold_rc.seed = mix64(rc.seed ^ (0xA000 + f));
        fold_rc.train.seed = mix64(rc.train.seed ^ (0xB000 + f));
        TrainedModel trained = train_on_dataset(inputs.train_full, fold_rc, "eval");
        const Checkpoint& ckpt = trained.checkpoint;

        // JLVAE scores
        const auto err_scores =
            recon_error_score(ckpt.params, ckpt.config, inputs.test.X, inputs.test.C);
        per_method[0].push_back(compute_metrics(err_scores, test_labels));
        const auto prob_scores =
            recon_probability_score(ckpt.params, ckpt.config, inputs.test.X, inputs.test.C,
                                    rc.mc_samples_score, mix64(fold_rc.seed ^ 0x5c0));
        per_method[1].push_back(compute_metrics(prob_scores, test_labels));

        // Point baselines on the concatenated [c, x] observation.
        const Matrix train_cx = hconcat(inputs.train_full.C, inputs.train_full.X);
        const Matrix test_cx = hconcat(inputs.test.C, inputs.test.X);
        const std::size_t if_sub = std::min(rc.iforest_subsample, train_cx.rows());
        const IsoForestModel forest =
            iforest_fit(train_cx, rc.iforest_trees, if_sub, mix64(fold_rc.seed ^ 0x1f0));
        per_method[2].push_back(compute_metrics(iforest_score(forest, test_cx), test_labels));

        // LOF is transductive over the test fold, capped for tractability.
        std::vector<std::uint8_t> lof_labels = test_labels;
        Matrix lof_input = test_cx;
        bool lof_capped = false;
        if (rc.lof_cap > 0 && test_cx.rows() > rc.lof_cap) {
            const auto keep =
                stratified_subsample(test_labels, rc.lof_cap, mix64(fold_rc.seed ^ 0x10f));
            lof_input = gather_rows(test_cx, keep);
            std::vector<std::uint8_t> labs;
            labs.reserve(keep.size());
            for (auto i : keep) labs.push_back(test_labels[i]);
            lof_labels = std::move(labs);
            lof_capped = true;
        }
        per_method[3].push_back(
            compute_metrics(lof_score(lof_input, LofConfig{rc.lof_k}), lof_labels));

        json fd;
        fd["fold"] = f + 1;
        fd["train_rows"] = inputs.train_full.rows();
        fd["test_rows"] = inputs.test.rows();
        fd["test_anomalies"] = inputs.test.anomaly_count();
        fd["dim_x"] = inputs.test.dim_x();
        fd["dim_c"] = inputs.test.dim_c();
        fd["epochs_run"] = trained.history.epochs.size();
        fd["lof_capped"] = lof_capped;
        fd["lof_rows"] = lof_input.rows();
        fold_details.push_back(std::move(fd));
    }

    json report;
    report["format_version"] = 1;
    report["folds"] = folds.size();
    json methods;
    for (std::size_t m = 0; m < method_names.size(); ++m) {
        json entry;
        entry["folds"] = json::array();
        for (std::size_t f = 0; f < per_method[m].size(); ++f) {
            json row = metrics_to_json(per_method[m][f]);
            row["fold"] = f + 1;
            entry["folds"].push_back(std::move(row));
        }
        entry["mean"] = metrics_to_json(mean_metrics(per_method[m]));
        methods[method_names[m]] = std::move(entry);
    }
    report["methods"] = std::move(methods);

    fs::create_directories(out_dir);
    write_file_atomic(out_dir + "/report.json", report.dump(2) + "\n");

    ManifestWriter manifest(out_dir + "/run_manifest.json", "eval", rc);
    manifest.body()["input"] = input;
    manifest.body()["source"] = source->describe();
    manifest.body()["fold_details"] = fold_details;
    manifest.body()["report"] = report;
    manifest.finish();
    log_info("report written to " + out_dir + "/report.json");
}

void cmd_robustness(const RunConfig& rc, const std::string& checkpoint_path,
                    const std::string& data_dir, const std::string& out_csv) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const PreparedDataset data = load_dataset(data_dir);
    if (data.dim_x() != ckpt.config.dim_x || data.dim_c() != ckpt.config.dim_c) {
        throw ShapeError("robustness: dataset dims do not match checkpoint");
    }

    const auto specs = preset_corruption_specs(rc.robustness_rows, rc.seed);
    const auto table =
        run_protocol(ckpt.params, ckpt.config, data, specs, rc.target_rate, mix64(rc.seed ^ 0x20ULL));

    write_file_atomic(out_csv, robustness_table_csv(table));

    const std::string manifest_path = out_csv + ".manifest.json";
    ManifestWriter manifest(manifest_path, "robustness", rc);
    manifest.body()["checkpoint"] = checkpoint_path;
    manifest.body()["data_dir"] = data_dir;
    json rows = json::array();
    for (const auto& r : table) {
        rows.push_back(json{{"name", r.name},
                            {"n_behavioral_transformed", r.n_behavioral_transformed},
                            {"n_contextual_transformed", r.n_contextual_transformed},
                            {"anomalies_reported", r.anomalies_reported}});
    }
    manifest.body()["table"] = std::move(rows);
    manifest.finish();
    log_info("robustness table written to " + out_csv);
}

std::string error_type_name(const std::exception& e) {
    if (dynamic_cast<const ShapeError*>(&e)) return "shape_error";
    if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
    if (dynamic_cast<const IoError*>(&e)) return "io_error";
    if (dynamic_cast<const NonFiniteError*>(&e)) return "non_finite_error";
    if (dynamic_cast<const ValueError*>(&e)) return "value_error";
    if (dynamic_cast<const Error*>(&e)) return "error";
    return "internal_error";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Joint latent variational auto-encoder for contextual anomaly detection"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    app.fallthrough(true);  // global flags may follow the subcommand name

    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed_flag;
    app.add_option("--config", config_path, "JSON run configuration")->expected(1);
    app.add_option("--preset", preset, "kdd99 or plant_synth");
    app.add_option("--seed", seed_flag, "master seed (overrides config)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic contextual dataset");
    std::string synth_out;
    std::optional<std::size_t> synth_rows;
    std::optional<double> synth_fraction, synth_scale, synth_noise, synth_coupling;
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--rows", synth_rows, "number of rows");
    synth->add_option("--anomaly-fraction", synth_fraction, "fraction of injected anomalies");
    synth->add_option("--anomaly-scale", synth_scale, "latent amplitude for injected anomalies");
    synth->add_option("--noise", synth_noise, "noise scale for both blocks");
    synth->add_option("--cross-coupling", synth_coupling, "multiplier on the z_c -> x path");

    // preprocess
    auto* preprocess = app.add_subcommand("preprocess", "parse, filter and transform a KDD csv");
    std::string pre_input, pre_out;
    preprocess->add_option("--input", pre_input, "raw kddcup99 csv")->required();
    preprocess->add_option("--out", pre_out, "output dataset directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model on a prepared dataset");
    std::string train_data, train_out;
    std::optional<std::size_t> train_epochs, train_batch, train_patience;
    std::optional<double> train_lr, train_val_fraction;
    train_cmd->add_option("--data", train_data, "prepared dataset directory")->required();
    train_cmd->add_option("--out", train_out, "output directory")->required();
    train_cmd->add_option("--epochs", train_epochs, "max epochs");
    train_cmd->add_option("--batch-size", train_batch, "minibatch size");
    train_cmd->add_option("--patience", train_patience, "early-stop patience");
    train_cmd->add_option("--learning-rate", train_lr, "Adam learning rate");
    train_cmd->add_option("--val-fraction", train_val_fraction, "validation split fraction");

    // score
    auto* score = app.add_subcommand("score", "score a prepared dataset with a checkpoint");
    std::string score_ckpt, score_data, score_method = "recon_error", score_out;
    std::optional<double> score_rate;
    std::optional<std::size_t> score_mc;
    score->add_option("--checkpoint", score_ckpt, "checkpoint path")->required();
    score->add_option("--data", score_data, "prepared dataset directory")->required();
    score->add_option("--method", score_method, "recon_error or recon_probability");
    score->add_option("--out", score_out, "output csv path")->required();
    score->add_option("--target-rate", score_rate, "calibrate threshold at this rate");
    score->add_option("--mc-samples", score_mc, "MC samples for recon_probability");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "k-fold evaluation with baselines");
    std::string eval_input, eval_out;
    std::optional<std::size_t> eval_folds, eval_subsample, eval_epochs;
    eval_cmd->add_option("--input", eval_input, "kdd csv or prepared dataset directory")
        ->required();
    eval_cmd->add_option("--out", eval_out, "output directory")->required();
    eval_cmd->add_option("--folds", eval_folds, "number of folds");
    eval_cmd->add_option("--subsample", eval_subsample, "stratified subsample size (0 = full)");
    eval_cmd->add_option("--epochs", eval_epochs, "max epochs per fold");

    // robustness
    auto* robust = app.add_subcommand("robustness", "contextual corruption protocol");
    std::string rob_ckpt, rob_data, rob_out;
    std::optional<double> rob_rate;
    std::optional<std::size_t> rob_rows;
    robust->add_option("--checkpoint", rob_ckpt, "checkpoint path")->required();
    robust->add_option("--data", rob_data, "prepared dataset directory (with labels)")->required();
    robust->add_option("--out", rob_out, "output csv path")->required();
    robust->add_option("--target-rate", rob_rate, "clean-set calibration rate");
    robust->add_option("--rows", rob_rows, "normal rows to corrupt");

    std::vector<std::string> argv_like(args.rbegin(), args.rend());
    try {
        app.parse(argv_like);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunConfig rc;
        if (!config_path.empty()) {
            const json file_config = json::parse(read_file(config_path));
            // File preset first so later file keys override its defaults.
            load_config_json(rc, file_config);
        }
        // Flags take precedence over the config file.
        if (!preset.empty()) apply_preset(rc, preset);
        if (seed_flag) {
            rc.seed = *seed_flag;
            rc.train.seed = *seed_flag;
        }

        if (*synth) {
            if (synth_rows) rc.synth.n_rows = *synth_rows;
            if (synth_fraction) rc.synth.anomaly_fraction = *synth_fraction;
            if (synth_scale) rc.synth.anomaly_scale = *synth_scale;
            if (synth_noise) rc.synth.noise_x = rc.synth.noise_c = *synth_noise;
            if (synth_coupling) rc.synth.cross_coupling = *synth_coupling;
            cmd_synth(rc, synth_out);
        } else if (*preprocess) {
            cmd_preprocess(rc, pre_input, pre_out);
        } else if (*train_cmd) {
            if (train_epochs) rc.train.max_epochs = *train_epochs;
            if (train_batch) rc.train.batch_size = *train_batch;
            if (train_patience) rc.train.patience = *train_patience;
            if (train_lr) rc.train.learning_rate = *train_lr;
            if (train_val_fraction) rc.val_fraction = *train_val_fraction;
            cmd_train(rc, train_data, train_out);
        } else if (*score) {
            if (score_mc) rc.mc_samples_score = *score_mc;
            cmd_score(rc, score_ckpt, score_data, score_method, score_out, score_rate);
        } else if (*eval_cmd) {
            if (eval_folds) rc.folds = *eval_folds;
            if (eval_subsample) rc.subsample = *eval_subsample;
            if (eval_epochs) rc.train.max_epochs = *eval_epochs;
            cmd_eval(rc, eval_input, eval_out);
        } else if (*robust) {
            if (rob_rate) rc.target_rate = *rob_rate;
            if (rob_rows) rc.robustness_rows = *rob_rows;
            cmd_robustness(rc, rob_ckpt, rob_data, rob_out);
        }
        return 0;
    } catch (const std::exception& e) {
        json err;
        err["error"]["type"] = error_type_name(e);
        err["error"]["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
}

}  // namespace jlvae
