// bilstm-ae: synth / train / detect / eval / compare.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <bilstm_ae/bilstm_ae.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "svg_plots.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace bilstm_ae;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr const char* kOutDirEnv = "BILSTM_AE_OUT_DIR";

/// Failure inside a named pipeline stage.
struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what) : std::runtime_error(stage + ": " + what) {}
};

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

fs::path default_out_dir() {
    const char* env = std::getenv(kOutDirEnv);
    return env && *env ? fs::path(env) : fs::path(".");
}

fs::path resolve(const std::string& given, const std::string& fallback_name) {
    if (!given.empty()) return given;
    return default_out_dir() / fallback_name;
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int k = 0; k < len; ++k) {
        s += hex[md[k] >> 4];
        s += hex[md[k] & 0xF];
    }
    return s;
}

std::string iso8601(std::time_t t) {
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Wall-clock time would make manifests differ between identical runs, so it
// is recorded only on request or when SOURCE_DATE_EPOCH pins it.
json timestamps(bool wall_clock) {
    json t = json::object();
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
        t["created"] = iso8601(static_cast<std::time_t>(std::stoll(sde)));
        t["source"] = "SOURCE_DATE_EPOCH";
    } else if (wall_clock) {
        t["created"] = iso8601(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
        t["source"] = "wall_clock";
    } else {
        t["created"] = nullptr;
        t["source"] = "omitted";
    }
    return t;
}

json manifest_base(const std::string& command, const std::vector<std::string>& argv, bool wall_clock) {
    json m;
    m["tool"] = "bilstm-ae";
    m["command"] = command;
    m["arguments"] = argv;
    m["timestamps"] = timestamps(wall_clock);
    return m;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
    std::vector<std::size_t> out;
    for (auto cell : detail::split_commas(text)) {
        const auto v = detail::parse_double(cell);
        if (!v || *v < 1 || std::floor(*v) != *v) throw ArgumentError("--widths: '" + text + "' is not a list of positive integers");
        out.push_back(static_cast<std::size_t>(*v));
    }
    if (out.empty()) throw ArgumentError("--widths: at least one layer is required");
    return out;
}

std::vector<AnomalyKind> parse_kinds(const std::string& text) {
    std::vector<AnomalyKind> out;
    for (auto cell : detail::split_commas(text)) out.push_back(parse_anomaly_kind(detail::trim(cell)));
    return out;
}

ScalerMode parse_scaler(const std::string& s) {
    if (s == "minmax") return ScalerMode::min_max;
    if (s == "zscore") return ScalerMode::z_score;
    throw ArgumentError("unknown scaler '" + s + "'");
}

json to_json(const SplitCounts& c) {
    return {{"total_rows", c.total_rows},         {"split_row", c.split_row},
            {"train_rows", c.train_rows},         {"train_anomalies_removed", c.train_anomalies_removed},
            {"train_rows_kept", c.train_rows_kept}, {"test_rows", c.test_rows},
            {"test_anomalies", c.test_anomalies}};
}

json to_json(const ScalerParams& p) {
    return {{"mode", p.mode == ScalerMode::min_max ? "minmax" : "zscore"}, {"offset", p.offset}, {"spread", p.spread}};
}

json to_json(const ModelConfig& c) {
    return {{"lookback", c.lookback},   {"features", c.features},      {"encoder_widths", c.encoder_widths},
            {"decoder_widths", c.decoder_widths}, {"bidirectional", c.bidirectional}, {"seed", c.seed},
            {"parameters", parameter_count(c)}};
}

json to_json(const EvaluationSummary& s) {
    json j = {{"tp", s.counts.tp},          {"fp", s.counts.fp},
              {"tn", s.counts.tn},          {"fn", s.counts.fn},
              {"accuracy", s.metrics.accuracy}, {"precision", s.metrics.precision},
              {"recall", s.metrics.recall}, {"f1", s.metrics.f1}};
    j["auc"] = s.auc ? json(*s.auc) : json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------

struct SynthOptions {
    std::size_t rows = 5000;
    double anomaly_fraction = 0.02;
    std::uint64_t seed = 0;
    std::string kinds = "spike,level_shift";
    std::size_t event_length = 10;
    double region_start = 0.0;
    std::size_t features_per_event = 4;
    double min_sigma = 6.0;
    double max_sigma = 10.0;
    double noise_scale = 1.0;
    std::string out;
    std::string manifest;
    bool wall_clock = false;
};

int run_synth(const SynthOptions& o, const std::vector<std::string>& argv) {
    SyntheticConfig g;
    g.rows = o.rows;
    g.anomaly_fraction = o.anomaly_fraction;
    g.event_length = o.event_length;
    g.anomaly_region_start = o.region_start;
    g.features_per_event = o.features_per_event;
    g.min_sigma = o.min_sigma;
    g.max_sigma = o.max_sigma;
    g.noise_scale = o.noise_scale;
    g.kinds = stage("synth", [&] { return parse_kinds(o.kinds); });
    const TimeSeriesFrame frame = stage("synth", [&] { return generate_synthetic(g, o.seed); });
    const fs::path out = o.out;
    const fs::path manifest = resolve(o.manifest, "synth_manifest.json");
    stage("write", [&] { write_file(out, [&](std::ostream& s) { write_csv(frame, s); }); });

    json m = manifest_base("synth", argv, o.wall_clock);
    std::vector<std::string> kinds;
    for (auto k : g.kinds) kinds.push_back(to_string(k));
    m["config"] = {{"rows", g.rows},
                   {"anomaly_fraction", g.anomaly_fraction},
                   {"kinds", kinds},
                   {"event_length", g.event_length},
                   {"anomaly_region_start", g.anomaly_region_start},
                   {"features_per_event", g.features_per_event},
                   {"min_sigma", g.min_sigma},
                   {"max_sigma", g.max_sigma},
                   {"noise_scale", g.noise_scale}};
    m["seeds"] = {{"generator", o.seed}};
    m["counts"] = {{"rows", frame.rows()}, {"anomalous_rows", frame.anomaly_count()}};
    m["outputs"] = {{"data", out.string()}, {"data_sha256", sha256_file(out)}};
    stage("write", [&] { write_file(manifest, [&](std::ostream& s) { s << m.dump(2) << '\n'; }); });
    std::cout << "wrote " << frame.rows() << " rows (" << frame.anomaly_count() << " anomalous) to " << out.string()
              << '\n';
    return 0;
}

struct TrainOptions {
    std::string data;
    double train_ratio = 0.7;
    std::size_t lookback = 10;
    std::string widths = "64,32";
    std::string baseline = "bilstm";
    double learning_rate = 1e-4;
    std::size_t batch_size = 128;
    std::size_t epochs = 50;
    double validation_fraction = 0.1;
    std::size_t patience = 0;
    double clip_norm = 5.0;
    std::uint64_t seed = 0;
    std::string scaler = "minmax";
    std::size_t threads = 1;
    std::string model;
    std::string curves;
    std::string manifest;
    bool wall_clock = false;
};

int run_train(const TrainOptions& o, const std::vector<std::string>& argv) {
    const fs::path data_path = o.data;
    const TimeSeriesFrame frame = stage("load", [&] { return load_csv(data_path); });

    ModelConfig mc;
    mc.lookback = o.lookback;
    mc.features = frame.feature_count();
    mc.encoder_widths = stage("config", [&] { return parse_widths(o.widths); });
    mc.decoder_widths.assign(mc.encoder_widths.rbegin(), mc.encoder_widths.rend());
    mc.seed = o.seed;
    if (o.baseline != "bilstm" && o.baseline != "lstm") {
        throw StageError("config", "--baseline must be 'bilstm' or 'lstm'");
    }
    mc.bidirectional = o.baseline == "bilstm";
    stage("config", [&] { mc.validate(); });

    TrainConfig tc;
    tc.learning_rate = o.learning_rate;
    tc.batch_size = o.batch_size;
    tc.epochs = o.epochs;
    tc.validation_fraction = o.validation_fraction;
    tc.patience = o.patience;
    tc.clip_norm = o.clip_norm;
    tc.seed = o.seed;
    tc.threads = o.threads;
    stage("config", [&] { tc.validate(); });

    const ScalerMode mode = stage("config", [&] { return parse_scaler(o.scaler); });
    const PreparedData prepared = stage("prepare", [&] { return prepare_data(frame, o.train_ratio, o.lookback, mode); });
    const FitResult fitted = stage("train", [&] { return fit(build_model(mc), prepared.train_windows, tc); });

    const fs::path model_path = resolve(o.model, "model.blae");
    const fs::path curves_path = resolve(o.curves, "curves.csv");
    const fs::path manifest_path = resolve(o.manifest, "train_manifest.json");
    stage("write", [&] {
        ensure_parent(model_path);
        save_model(fitted.model, model_path);
        write_file(curves_path, [&](std::ostream& s) { write_curves_csv(fitted.curves, s); });
    });

    json m = manifest_base("train", argv, o.wall_clock);
    m["config"] = {{"train_ratio", o.train_ratio},
                   {"scaler", to_json(prepared.scaler)},
                   {"model", to_json(mc)},
                   {"train",
                    {{"learning_rate", tc.learning_rate},
                     {"batch_size", tc.batch_size},
                     {"epochs", tc.epochs},
                     {"validation_fraction", tc.validation_fraction},
                     {"beta1", tc.beta1},
                     {"beta2", tc.beta2},
                     {"adam_epsilon", tc.adam_epsilon},
                     {"clip_norm", tc.clip_norm},
                     {"patience", tc.patience},
                     {"threads", tc.threads}}}};
    m["seeds"] = {{"init", mc.seed}, {"shuffle", tc.seed}};
    m["inputs"] = {{"data", data_path.string()}, {"data_sha256", sha256_file(data_path)}};
    m["counts"] = to_json(prepared.split.counts);
    m["counts"]["train_windows_total"] = prepared.train_windows.samples();
    m["counts"]["train_windows"] = fitted.train_windows;
    m["counts"]["validation_windows"] = fitted.validation_windows;
    m["counts"]["test_windows"] = prepared.test_windows.samples();
    m["counts"]["epochs_run"] = fitted.epochs_run;
    m["final"] = {{"train_loss", fitted.curves.train_loss.back()}};
    m["final"]["val_loss"] = fitted.curves.val_loss.back() ? json(*fitted.curves.val_loss.back()) : json(nullptr);
    m["outputs"] = {{"model", model_path.string()},
                    {"model_sha256", sha256_file(model_path)},
                    {"curves", curves_path.string()},
                    {"curves_sha256", sha256_file(curves_path)}};
    stage("write", [&] { write_file(manifest_path, [&](std::ostream& s) { s << m.dump(2) << '\n'; }); });
    std::cout << "trained " << (mc.bidirectional ? "Bi-LSTM" : "LSTM") << " autoencoder for " << fitted.epochs_run
              << " epochs on " << fitted.train_windows << " windows; final train loss "
              << fitted.curves.train_loss.back() << '\n';
    return 0;
}

struct DetectOptions {
    std::string model;
    std::string data;
    double train_ratio = 0.7;
    std::string scaler = "minmax";
    std::string threshold = "quantile:0.99";
    std::size_t threads = 1;
    std::string report;
    std::string manifest;
    bool wall_clock = false;
};

int run_detect(const DetectOptions& o, const std::vector<std::string>& argv) {
    const fs::path model_path = o.model;
    const fs::path data_path = o.data;
    const ModelParams model = stage("load model", [&] { return load_model(model_path); });
    const TimeSeriesFrame frame = stage("load", [&] { return load_csv(data_path); });
    const ThresholdStrategy strategy = stage("config", [&] { return parse_threshold_strategy(o.threshold); });
    if (frame.feature_count() != model.config.features) {
        throw StageError("config", "model expects windows of " +
                                       Matrix::shape_string(model.config.lookback, model.config.features) +
                                       " but the data has " + std::to_string(frame.feature_count()) + " features");
    }
    const ScalerMode mode = stage("config", [&] { return parse_scaler(o.scaler); });
    const PreparedData prepared =
        stage("prepare", [&] { return prepare_data(frame, o.train_ratio, model.config.lookback, mode); });
    const auto train_losses = stage("score", [&] { return score(model, prepared.train_windows, o.threads); });
    const double eta = stage("threshold", [&] { return estimate_threshold(train_losses, strategy); });
    const auto test_losses = stage("score", [&] { return score(model, prepared.test_windows, o.threads); });
    const ReconstructionReport report = classify(test_losses, eta, prepared.test_windows.window_end_indices);

    const fs::path report_path = resolve(o.report, "report.csv");
    const fs::path manifest_path = resolve(o.manifest, "detect_manifest.json");
    stage("write", [&] { write_file(report_path, [&](std::ostream& s) { write_report_csv(report, s); }); });

    json m = manifest_base("detect", argv, o.wall_clock);
    m["config"] = {{"train_ratio", o.train_ratio},
                   {"scaler", to_json(prepared.scaler)},
                   {"model", to_json(model.config)},
                   {"threshold_strategy", to_string(strategy)},
                   {"threads", o.threads}};
    m["seeds"] = {{"init", model.config.seed}};
    m["inputs"] = {{"model", model_path.string()},
                   {"model_sha256", sha256_file(model_path)},
                   {"data", data_path.string()},
                   {"data_sha256", sha256_file(data_path)}};
    m["counts"] = to_json(prepared.split.counts);
    m["counts"]["train_windows"] = prepared.train_windows.samples();
    m["counts"]["test_windows"] = prepared.test_windows.samples();
    m["counts"]["flagged_windows"] = report.anomaly_count();
    m["threshold"] = eta;
    m["outputs"] = {{"report", report_path.string()}, {"report_sha256", sha256_file(report_path)}};
    stage("write", [&] { write_file(manifest_path, [&](std::ostream& s) { s << m.dump(2) << '\n'; }); });
    std::cout << "threshold " << detail::format_double(eta) << " (" << to_string(strategy) << "): flagged "
              << report.anomaly_count() << " of " << report.losses.size() << " test windows\n";
    return 0;
}

struct EvalOptions {
    std::string report;
    std::string data;
    std::string out_dir;
    bool plots = false;
    double threshold = std::numeric_limits<double>::quiet_NaN();
    std::string manifest;
    bool wall_clock = false;
};

int run_eval(const EvalOptions& o, const std::vector<std::string>& argv) {
    const fs::path report_path = o.report;
    const fs::path data_path = o.data;
    ReconstructionReport report = stage("load report", [&] { return read_report_csv(report_path); });
    const TimeSeriesFrame frame = stage("load", [&] { return load_csv(data_path); });
    const auto truth = stage("labels", [&] { return labels_for_windows(frame, report.window_end_indices); });
    if (report.losses.empty()) throw StageError("evaluate", "report holds no windows");
    report.threshold = o.threshold;

    const EvaluationSummary summary = stage("evaluate", [&] { return evaluate(report, truth); });
    const fs::path dir = o.out_dir.empty() ? default_out_dir() : fs::path(o.out_dir);
    json outputs = json::object();
    auto emit = [&](const std::string& key, const std::string& name, const std::function<void(std::ostream&)>& body) {
        const fs::path p = dir / name;
        stage("write", [&] { write_file(p, body); });
        outputs[key] = p.string();
        outputs[key + "_sha256"] = sha256_file(p);
    };
    emit("metrics", "metrics.csv", [&](std::ostream& s) { write_metrics_csv(summary, s); });
    emit("confusion", "confusion.csv", [&](std::ostream& s) { write_confusion_csv(summary.counts, s); });
    std::optional<RocCurve> roc;
    if (summary.auc) {
        roc = roc_auc(report.losses, truth);
        emit("roc", "roc.csv", [&](std::ostream& s) { write_roc_csv(*roc, s); });
    } else {
        std::cerr << "warning: ground truth holds a single class; ROC skipped\n";
    }
    if (o.plots) {
        emit("loss_histogram", "loss_histogram.svg",
             [&](std::ostream& s) { plots::loss_histogram(s, report.losses, report.threshold); });
        emit("loss_scatter", "loss_scatter.svg",
             [&](std::ostream& s) { plots::loss_scatter(s, report, truth, report.threshold); });
        if (roc) emit("roc_plot", "roc.svg", [&](std::ostream& s) { plots::roc_plot(s, *roc); });
    }

    json m = manifest_base("eval", argv, o.wall_clock);
    m["inputs"] = {{"report", report_path.string()},
                   {"report_sha256", sha256_file(report_path)},
                   {"data", data_path.string()},
                   {"data_sha256", sha256_file(data_path)}};
    m["counts"] = {{"windows", report.losses.size()},
                   {"anomalous_windows", static_cast<std::size_t>(std::count(truth.begin(), truth.end(), 1))},
                   {"flagged_windows", report.anomaly_count()}};
    m["evaluation"] = to_json(summary);
    m["outputs"] = outputs;
    const fs::path manifest_path = o.manifest.empty() ? dir / "eval_manifest.json" : fs::path(o.manifest);
    stage("write", [&] { write_file(manifest_path, [&](std::ostream& s) { s << m.dump(2) << '\n'; }); });
    std::cout << format_metric_table({{"model", summary}});
    return 0;
}

struct CompareOptions {
    std::string report_a;
    std::string report_b;
    std::string data;
    std::string name_a = "bilstm";
    std::string name_b = "lstm";
    std::string out;
    std::string manifest;
    bool wall_clock = false;
};

int run_compare(const CompareOptions& o, const std::vector<std::string>& argv) {
    const ReconstructionReport a = stage("load report", [&] { return read_report_csv(fs::path(o.report_a)); });
    const ReconstructionReport b = stage("load report", [&] { return read_report_csv(fs::path(o.report_b)); });
    const TimeSeriesFrame frame = stage("load", [&] { return load_csv(fs::path(o.data)); });
    const auto truth = stage("labels", [&] { return labels_for_windows(frame, a.window_end_indices); });
    const ModelComparison c = stage("compare", [&] { return compare_models(a, b, truth); });

    const fs::path out = resolve(o.out, "comparison.csv");
    const fs::path manifest_path = resolve(o.manifest, "compare_manifest.json");
    stage("write", [&] { write_file(out, [&](std::ostream& s) { write_comparison_csv(c, o.name_a, o.name_b, s); }); });

    json m = manifest_base("compare", argv, o.wall_clock);
    m["inputs"] = {{"report_a", o.report_a}, {"report_a_sha256", sha256_file(o.report_a)},
                   {"report_b", o.report_b}, {"report_b_sha256", sha256_file(o.report_b)},
                   {"data", o.data},         {"data_sha256", sha256_file(o.data)}};
    m["evaluation"] = {{o.name_a, to_json(c.a)}, {o.name_b, to_json(c.b)}};
    m["outputs"] = {{"comparison", out.string()}, {"comparison_sha256", sha256_file(out)}};
    stage("write", [&] { write_file(manifest_path, [&](std::ostream& s) { s << m.dump(2) << '\n'; }); });
    std::cout << format_metric_table({{o.name_a, c.a}, {o.name_b, c.b}});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    CLI::App app{"Bi-LSTM autoencoder anomaly detection for multivariate time series"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "bilstm-ae 1.0.0");
    const std::string out_dir_note = " (default: $" + std::string(kOutDirEnv) + " or the current directory)";

    SynthOptions so;
    auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic series");
    synth->add_option("--rows", so.rows, "Number of rows")->capture_default_str();
    synth->add_option("--anomaly-fraction", so.anomaly_fraction, "Fraction of anomalous rows, in [0, 0.3]")
        ->capture_default_str();
    synth->add_option("--seed", so.seed, "Generator seed")->capture_default_str();
    synth->add_option("--kinds", so.kinds, "Comma list of spike, level_shift, noise_burst")->capture_default_str();
    synth->add_option("--event-length", so.event_length, "Rows per anomaly event")->capture_default_str();
    synth->add_option("--region-start", so.region_start, "Anomalies are placed after this fraction of the rows")
        ->capture_default_str();
    synth->add_option("--features-per-event", so.features_per_event, "Features distorted by each event")
        ->capture_default_str();
    synth->add_option("--min-sigma", so.min_sigma, "Smallest displacement in noise sigmas")->capture_default_str();
    synth->add_option("--max-sigma", so.max_sigma, "Largest displacement in noise sigmas")->capture_default_str();
    synth->add_option("--noise-scale", so.noise_scale, "Multiplier on the base noise")->capture_default_str();
    synth->add_option("--out", so.out, "Output CSV")->required();
    synth->add_option("--manifest", so.manifest, "Manifest path" + out_dir_note);
    synth->add_flag("--wall-clock", so.wall_clock, "Record the wall-clock time in the manifest");

    TrainOptions to;
    auto* train = app.add_subcommand("train", "Train an autoencoder on the normal rows of the training split");
    train->add_option("--data", to.data, "Input CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--train-ratio", to.train_ratio, "Chronological train fraction")->capture_default_str();
    train->add_option("--lookback", to.lookback, "Window length")->capture_default_str();
    train->add_option("--widths", to.widths, "Encoder widths; the decoder mirrors them")->capture_default_str();
    train->add_option("--baseline", to.baseline, "bilstm or lstm (unidirectional)")->capture_default_str();
    train->add_option("--lr", to.learning_rate, "Adam learning rate")->capture_default_str();
    train->add_option("--batch-size", to.batch_size, "Mini-batch size")->capture_default_str();
    train->add_option("--epochs", to.epochs, "Epochs")->capture_default_str();
    train->add_option("--validation-fraction", to.validation_fraction, "Trailing share of windows held out")
        ->capture_default_str();
    train->add_option("--patience", to.patience, "Early-stopping patience, 0 disables")->capture_default_str();
    train->add_option("--clip-norm", to.clip_norm, "Global gradient norm clip, 0 disables")->capture_default_str();
    train->add_option("--seed", to.seed, "Initialisation and shuffling seed")->capture_default_str();
    train->add_option("--scaler", to.scaler, "minmax or zscore")->capture_default_str();
    train->add_option("--threads", to.threads, "Worker threads")->capture_default_str();
    train->add_option("--model", to.model, "Model file" + out_dir_note);
    train->add_option("--curves", to.curves, "Learning-curve CSV" + out_dir_note);
    train->add_option("--manifest", to.manifest, "Manifest path" + out_dir_note);
    train->add_flag("--wall-clock", to.wall_clock, "Record the wall-clock time in the manifest");

    DetectOptions dopt;
    auto* detect = app.add_subcommand("detect", "Score the test split and flag anomalous windows");
    detect->add_option("--model", dopt.model, "Model file")->required()->check(CLI::ExistingFile);
    detect->add_option("--data", dopt.data, "Input CSV")->required()->check(CLI::ExistingFile);
    detect->add_option("--train-ratio", dopt.train_ratio, "Chronological train fraction")->capture_default_str();
    detect->add_option("--scaler", dopt.scaler, "minmax or zscore")->capture_default_str();
    detect->add_option("--threshold", dopt.threshold, "quantile:Q, max, mean_plus_k_std:K or fixed:ETA")
        ->capture_default_str();
    detect->add_option("--threads", dopt.threads, "Worker threads")->capture_default_str();
    detect->add_option("--report", dopt.report, "Report CSV" + out_dir_note);
    detect->add_option("--manifest", dopt.manifest, "Manifest path" + out_dir_note);
    detect->add_flag("--wall-clock", dopt.wall_clock, "Record the wall-clock time in the manifest");

    EvalOptions eo;
    auto* eval = app.add_subcommand("eval", "Metrics, confusion matrix and ROC for a report");
    eval->add_option("--report", eo.report, "Report CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", eo.data, "CSV holding the ground-truth labels")->required()->check(CLI::ExistingFile);
    eval->add_option("--out-dir", eo.out_dir, "Output directory" + out_dir_note);
    eval->add_option("--threshold", eo.threshold, "Threshold to mark on the plots");
    eval->add_flag("--plots", eo.plots, "Also write SVG plots");
    eval->add_option("--manifest", eo.manifest, "Manifest path (default: <out-dir>/eval_manifest.json)");
    eval->add_flag("--wall-clock", eo.wall_clock, "Record the wall-clock time in the manifest");

    CompareOptions co;
    auto* compare = app.add_subcommand("compare", "Compare two reports scored on the same windows");
    compare->add_option("--report-a", co.report_a, "First report")->required()->check(CLI::ExistingFile);
    compare->add_option("--report-b", co.report_b, "Second report")->required()->check(CLI::ExistingFile);
    compare->add_option("--data", co.data, "CSV holding the ground-truth labels")->required()->check(CLI::ExistingFile);
    compare->add_option("--name-a", co.name_a, "Label for the first report")->capture_default_str();
    compare->add_option("--name-b", co.name_b, "Label for the second report")->capture_default_str();
    compare->add_option("--out", co.out, "Comparison CSV" + out_dir_note);
    compare->add_option("--manifest", co.manifest, "Manifest path" + out_dir_note);
    compare->add_flag("--wall-clock", co.wall_clock, "Record the wall-clock time in the manifest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*synth) return run_synth(so, args);
        if (*train) return run_train(to, args);
        if (*detect) return run_detect(dopt, args);
        if (*eval) return run_eval(eo, args);
        if (*compare) return run_compare(co, args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
