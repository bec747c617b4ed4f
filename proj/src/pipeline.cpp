#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "errors.hpp"
#include "powercurve.hpp"
#include "rng.hpp"
#include "textio.hpp"

namespace turbperf {

namespace {

constexpr const char* kEpochTimestamp = "1970-01-01T00:00:00Z";

void gather_rows(const LabeledDataset& ds, const std::vector<long>& rows,
                 Eigen::MatrixXd& x, Eigen::VectorXd& y) {
    x.resize(static_cast<long>(rows.size()), ds.features.cols());
    y.resize(static_cast<long>(rows.size()));
    for (long i = 0; i < static_cast<long>(rows.size()); ++i) {
        x.row(i) = ds.features.row(rows[i]);
        y(i) = ds.power_target(rows[i]);
    }
}

// Deterministic subsample: seeded shuffle, keep `cap`, restore row order.
void apply_train_cap(std::vector<long>& rows, long cap, std::uint64_t seed) {
    if (cap <= 0 || cap >= static_cast<long>(rows.size())) return;
    Rng rng(seed);
    rng.shuffle(rows);
    rows.resize(cap);
    std::sort(rows.begin(), rows.end());
}

} // namespace

StageSet StageSet::all() {
    StageSet s;
    s.ingest = s.label = s.train_svr = s.sweep_nn = s.report = true;
    return s;
}

StageSet StageSet::from_csv(const std::string& csv) {
    StageSet s;
    for (const std::string& raw : split(csv, ',')) {
        std::string name = lower(trim(raw));
        std::replace(name.begin(), name.end(), '-', '_');
        if (name == "ingest") {
            s.ingest = true;
        } else if (name == "label") {
            s.label = true;
        } else if (name == "train_svr") {
            s.train_svr = true;
        } else if (name == "sweep_nn") {
            s.sweep_nn = true;
        } else if (name == "report") {
            s.report = true;
        } else {
            fail(ErrKind::BadConfig, "unknown stage \"" + trim(raw) + "\"");
        }
    }
    return s;
}

std::string artifact_path(const RunConfig& cfg, const std::string& name) {
    return cfg.out_dir() + "/" + name;
}

std::vector<MetRecord> make_records(const RunConfig& cfg) {
    const std::string csv = cfg.get("data.csv");
    if (!csv.empty()) {
        if (!file_exists(csv)) fail(ErrKind::MissingFile, "dataset file not found: " + csv);
        return ingest_csv(csv, cfg.schema(),
                          cfg.get_bool("data.strict") ? IngestMode::Strict : IngestMode::Lenient);
    }
    return synth_dataset(cfg.turbine(), cfg.get_long("synth.n"),
                         cfg.get_double("synth.noise_sigma"),
                         cfg.get_double("synth.fault_fraction"),
                         static_cast<std::uint64_t>(cfg.get_long("synth.seed")),
                         cfg.synth_params());
}

LabeledDataset make_dataset(const RunConfig& cfg, const std::vector<MetRecord>& records) {
    return build_labeled_dataset(records, cfg.turbine(), cfg.fractions(), cfg.split_mode(),
                                 cfg.split_seed());
}

SvrRun run_svr_training(const RunConfig& cfg, const LabeledDataset& ds) {
    std::vector<long> train_rows = ds.rows_with_tag(SplitTag::Train);
    if (train_rows.size() < 2) fail(ErrKind::EmptySplit, "train split too small for the regressor");
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_long("svr.seed"));
    apply_train_cap(train_rows, cfg.get_long("svr.train_cap"), seed);

    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    gather_rows(ds, train_rows, x, y);

    SvrHyper hyper = cfg.svr_hyper();
    if (cfg.get_bool("svr.auto_epsilon")) hyper.epsilon = auto_epsilon(y);

    SvrRun out;
    const auto t0 = std::chrono::steady_clock::now();
    out.model = train_svr(x, y, ds.stats, hyper, seed, &out.summary);
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.train_mse = mse(predict_svr_batch(out.model, x), y);

    const std::vector<long> test_rows = ds.rows_with_tag(SplitTag::Test);
    if (test_rows.empty()) fail(ErrKind::EmptySplit, "test split is empty");
    Eigen::MatrixXd xt;
    Eigen::VectorXd yt;
    gather_rows(ds, test_rows, xt, yt);
    out.test_mse = mse(predict_svr_batch(out.model, xt), yt);
    return out;
}

NnRun run_nn_training(const RunConfig& cfg, const LabeledDataset& ds, ArchKind kind) {
    const TrainConfig tc = cfg.nn_train_config(kind);
    NetModel model = build_arch(kind, kFeatureCount, cfg.nn_arch_overrides(kind));

    NnRun out;
    auto trained = train(std::move(model), ds, tc);
    out.model = std::move(trained.first);
    out.trace = std::move(trained.second);

    std::vector<Window> test_ws;
    for (Window& w : make_windows(ds, out.model.window, kind)) {
        if (w.tag == SplitTag::Test) test_ws.push_back(std::move(w));
    }
    if (test_ws.empty()) fail(ErrKind::EmptySplit, "no test windows");
    out.test_mse = evaluate_mse(out.model, test_ws);
    return out;
}

CvReport run_cv(const RunConfig& cfg, const LabeledDataset& ds, long k) {
    std::vector<long> rows(ds.n());
    std::iota(rows.begin(), rows.end(), 0L);
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_long("svr.seed"));
    apply_train_cap(rows, cfg.get_long("svr.train_cap"), seed);

    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    gather_rows(ds, rows, x, y);

    SvrHyper hyper = cfg.svr_hyper();
    if (cfg.get_bool("svr.auto_epsilon")) hyper.epsilon = auto_epsilon(y);
    return kfold_cv(x, y, ds.stats, k, hyper, seed);
}

// ---------------------------------------------------------------------------
// evaluation summaries and the stage manifest

namespace {

std::map<std::string, std::string> parse_kv_body(const std::string& text,
                                                 const std::string& magic) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != magic) {
        fail(ErrKind::ParseError, "expected a \"" + magic + "\" file");
    }
    std::map<std::string, std::string> out;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) fail(ErrKind::ParseError, "bad line: " + line);
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) fail(ErrKind::ParseError, "missing \"" + key + "\"");
    const auto v = parse_double(it->second);
    if (!v) fail(ErrKind::ParseError, "bad number for \"" + key + "\"");
    return *v;
}

long kv_long(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) fail(ErrKind::ParseError, "missing \"" + key + "\"");
    const auto v = parse_int(it->second);
    if (!v) fail(ErrKind::ParseError, "bad integer for \"" + key + "\"");
    return static_cast<long>(*v);
}

} // namespace

std::string render_svr_eval(const SvrRun& run, bool measured) {
    std::string out = "turbperf-eval v1\n";
    out += "model = svr\n";
    out += "epochs = 0\n";
    out += "passes = " + std::to_string(run.summary.passes) + "\n";
    out += "updates = " + std::to_string(run.summary.updates) + "\n";
    out += "sv_count = " + std::to_string(run.summary.sv_rows.size()) + "\n";
    out += std::string("converged = ") + (run.summary.converged ? "1" : "0") + "\n";
    out += "wall_time_seconds = " + format_double(measured ? run.wall_seconds : 0.0) + "\n";
    out += "train_mse = " + format_double(run.train_mse) + "\n";
    out += "test_mse = " + format_double(run.test_mse) + "\n";
    return out;
}

std::string render_nn_eval(ArchKind kind, const NnRun& run, bool measured) {
    const double best_val =
        run.trace.best_epoch >= 1 &&
                run.trace.best_epoch <= static_cast<long>(run.trace.val_loss_per_epoch.size())
            ? run.trace.val_loss_per_epoch[run.trace.best_epoch - 1]
            : 0.0;
    std::string out = "turbperf-eval v1\n";
    out += std::string("model = ") + arch_name(kind) + "\n";
    out += "epochs = " + std::to_string(run.trace.epochs_run) + "\n";
    out += "pretrain_epochs = " + std::to_string(run.trace.pretrain_epochs) + "\n";
    out += "best_epoch = " + std::to_string(run.trace.best_epoch) + "\n";
    out += "wall_time_seconds = " +
           format_double(measured ? run.trace.wall_time_seconds : 0.0) + "\n";
    out += "test_mse = " + format_double(run.test_mse) + "\n";
    out += "best_val_mse = " + format_double(best_val) + "\n";
    return out;
}

namespace {

using Manifest = std::map<std::string, std::string>;

Manifest load_manifest(const std::string& path) {
    if (!file_exists(path)) return {};
    Manifest m;
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || trim(line) != "turbperf-manifest v1") return {};
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        m[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return m;
}

void save_manifest(const std::string& path, const Manifest& manifest) {
    std::string out = "turbperf-manifest v1\n";
    for (const auto& [k, v] : manifest) out += k + " = " + v + "\n";
    if (file_exists(path) && read_file(path) == out) return;
    write_file_atomic(path, out);
}

std::string file_fingerprint(const std::string& path, const std::string& hint) {
    if (!file_exists(path)) fail(ErrKind::MissingFile, path + " not found; " + hint);
    return hex64(fnv1a_file(path));
}

struct CurveData {
    BinnedCurve actual;
    std::vector<std::pair<double, double>> predicted; // (raw speed, power in [0,1])
};

CurveData build_curve_data(const RunConfig& cfg, const std::vector<MetRecord>& records,
                           const LabeledDataset& ds, const SvrModel& svr) {
    if (static_cast<long>(records.size()) != ds.n()) {
        fail(ErrKind::ParseError, "records and dataset artifacts disagree on row count");
    }
    const std::vector<long> test_rows = ds.rows_with_tag(SplitTag::Test);
    if (test_rows.empty()) fail(ErrKind::EmptySplit, "test split is empty");

    std::vector<std::pair<double, double>> measured;
    measured.reserve(test_rows.size());
    CurveData out;
    out.predicted.reserve(test_rows.size());
    for (long row : test_rows) {
        measured.emplace_back(records[row].wind_speed, records[row].power);
        out.predicted.emplace_back(records[row].wind_speed,
                                   predict_svr(svr, ds.features.row(row).transpose()));
    }
    out.actual = bin_curve(measured, cfg.get_double("report.bin_width"));
    return out;
}

} // namespace

PipelineResult run_pipeline(const RunConfig& cfg, const StageSet& stages, int jobs) {
    cfg.validate();
    if (jobs < 1) fail(ErrKind::BadConfig, "jobs must be >= 1");

    const std::string dir = cfg.out_dir();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrKind::IoError, "cannot create output directory " + dir);

    const std::string manifest_path = artifact_path(cfg, "manifest.tp");
    const std::string records_path = artifact_path(cfg, "records.csv");
    const std::string dataset_path = artifact_path(cfg, "dataset.tp");
    const std::string svr_model_path = artifact_path(cfg, "svr.model");
    const std::string svr_eval_path = artifact_path(cfg, "svr.eval");

    Manifest manifest = load_manifest(manifest_path);
    PipelineResult result;
    const bool measured = cfg.measure_time();

    const auto fresh = [&](const std::string& stage, const std::string& fp,
                           const std::vector<std::string>& outputs) {
        const auto it = manifest.find(stage);
        if (it == manifest.end() || it->second != fp) return false;
        for (const std::string& out : outputs) {
            if (!file_exists(out)) return false;
        }
        return true;
    };
    const auto commit = [&](const std::string& stage, const std::string& fp) {
        manifest[stage] = fp;
        save_manifest(manifest_path, manifest);
        result.ran.push_back(stage);
    };

    if (stages.ingest) {
        const std::string csv = cfg.get("data.csv");
        std::string source = "synth";
        if (!csv.empty()) {
            if (!file_exists(csv)) fail(ErrKind::MissingFile, "dataset file not found: " + csv);
            source = hex64(fnv1a_file(csv));
        }
        const std::string fp = hex64(fnv1a("ingest|" + cfg.hash() + "|" + source));
        if (fresh("ingest", fp, {records_path})) {
            result.skipped.push_back("ingest");
        } else {
            write_file_atomic(records_path, render_records_csv(make_records(cfg)));
            commit("ingest", fp);
        }
    }

    if (stages.label) {
        const std::string src =
            file_fingerprint(records_path, "run the ingest stage first");
        const std::string fp = hex64(fnv1a("label|" + cfg.hash() + "|" + src));
        if (fresh("label", fp, {dataset_path})) {
            result.skipped.push_back("label");
        } else {
            const std::vector<MetRecord> records = ingest_csv(records_path, CsvSchema{});
            save_dataset(make_dataset(cfg, records), dataset_path);
            commit("label", fp);
        }
    }

    if (stages.train_svr) {
        const std::string src = file_fingerprint(dataset_path, "run the label stage first");
        const std::string fp = hex64(fnv1a("train_svr|" + cfg.hash() + "|" + src));
        if (fresh("train_svr", fp, {svr_model_path, svr_eval_path})) {
            result.skipped.push_back("train_svr");
        } else {
            const LabeledDataset ds = load_dataset(dataset_path);
            const SvrRun run = run_svr_training(cfg, ds);
            write_file_atomic(svr_model_path, render_svr(run.model));
            write_file_atomic(svr_eval_path, render_svr_eval(run, measured));
            commit("train_svr", fp);
        }
    }

    if (stages.sweep_nn) {
        const std::string src = file_fingerprint(dataset_path, "run the label stage first");
        const std::string fp = hex64(fnv1a("sweep_nn|" + cfg.hash() + "|" + src));
        std::vector<std::string> outputs;
        for (ArchKind kind : kAllArchs) {
            outputs.push_back(artifact_path(cfg, std::string("nn.") + arch_name(kind) + ".model"));
            outputs.push_back(artifact_path(cfg, std::string("nn.") + arch_name(kind) + ".eval"));
        }
        if (fresh("sweep_nn", fp, outputs)) {
            result.skipped.push_back("sweep_nn");
        } else {
            const LabeledDataset ds = load_dataset(dataset_path);
            constexpr int kArchCount = 5;
            std::vector<NnRun> runs(kArchCount);
            std::vector<std::exception_ptr> errors(kArchCount);
            if (jobs <= 1) {
                for (int i = 0; i < kArchCount; ++i) {
                    runs[i] = run_nn_training(cfg, ds, kAllArchs[i]);
                }
            } else {
                std::atomic<int> next{0};
                const int workers = std::min(jobs, kArchCount);
                std::vector<std::thread> pool;
                pool.reserve(workers);
                for (int t = 0; t < workers; ++t) {
                    pool.emplace_back([&] {
                        for (int i = next.fetch_add(1); i < kArchCount; i = next.fetch_add(1)) {
                            try {
                                runs[i] = run_nn_training(cfg, ds, kAllArchs[i]);
                            } catch (...) {
                                errors[i] = std::current_exception();
                            }
                        }
                    });
                }
                for (std::thread& t : pool) t.join();
                for (const std::exception_ptr& e : errors) {
                    if (e) std::rethrow_exception(e);
                }
            }
            for (int i = 0; i < kArchCount; ++i) {
                write_file_atomic(outputs[2 * i], render_net(runs[i].model));
                write_file_atomic(outputs[2 * i + 1],
                                  render_nn_eval(kAllArchs[i], runs[i], measured));
            }
            commit("sweep_nn", fp);
        }
    }

    if (stages.report) {
        std::string basis = "report|" + cfg.hash();
        basis += "|" + file_fingerprint(records_path, "run the ingest stage first");
        basis += "|" + file_fingerprint(dataset_path, "run the label stage first");
        basis += "|" + file_fingerprint(svr_model_path, "run the train_svr stage first");
        basis += "|" + file_fingerprint(svr_eval_path, "run the train_svr stage first");
        std::vector<std::string> eval_paths;
        for (ArchKind kind : kAllArchs) {
            const std::string p = artifact_path(cfg, std::string("nn.") + arch_name(kind) + ".eval");
            eval_paths.push_back(p);
            basis += "|" + file_fingerprint(p, "run the sweep_nn stage first");
        }
        const std::string fp = hex64(fnv1a(basis));
        const std::string report_tp = artifact_path(cfg, "report.tp");
        const std::string report_txt = artifact_path(cfg, "report.txt");
        const std::string curve_base = artifact_path(cfg, "curve");
        const std::vector<std::string> outputs{report_tp, report_txt,
                                               curve_base + ".actual.csv",
                                               curve_base + ".predicted.csv"};
        if (fresh("report", fp, outputs)) {
            result.skipped.push_back("report");
        } else {
            const std::vector<MetRecord> records = ingest_csv(records_path, CsvSchema{});
            const LabeledDataset ds = load_dataset(dataset_path);
            const SvrModel svr = load_svr(svr_model_path);

            std::vector<EvalRow> rows;
            const auto svr_kv = parse_kv_body(read_file(svr_eval_path), "turbperf-eval v1");
            rows.push_back({"SVR (Gaussian kernel)", 0, kv_long(svr_kv, "passes"),
                            kv_double(svr_kv, "wall_time_seconds"),
                            kv_double(svr_kv, "test_mse")});
            for (int i = 0; i < 5; ++i) {
                const auto kv = parse_kv_body(read_file(eval_paths[i]), "turbperf-eval v1");
                rows.push_back({arch_label(kAllArchs[i]),
                                kv_long(kv, "epochs") + kv_long(kv, "pretrain_epochs"), 0,
                                kv_double(kv, "wall_time_seconds"), kv_double(kv, "test_mse")});
            }
            ReportMeta meta;
            meta.dataset_rows = ds.n();
            meta.split_seed = cfg.split_seed();
            meta.config_hash = cfg.hash();
            meta.timestamp = measured ? iso_timestamp_utc() : kEpochTimestamp;
            const ComparisonReport report = build_report(std::move(rows), std::move(meta));

            const CurveData curve = build_curve_data(cfg, records, ds, svr);
            save_report(report, report_tp);
            write_file_atomic(report_txt, render_report_table(report));
            export_curve_plot(curve.actual, curve.predicted, ds.stats, curve_base);
            commit("report", fp);
        }
    }

    return result;
}

std::string render_labeled_records_csv(const std::vector<MetRecord>& records,
                                       const TurbineSpec& spec) {
    spec.validate();
    if (records.empty()) fail(ErrKind::EmptyInput, "no records to label");
    std::string out =
        "month,day,hour,minute,wind_speed,air_temperature,air_pressure,"
        "wind_direction,density,power,region,fault\n";
    for (const MetRecord& r : records) {
        out += std::to_string(r.month) + "," + std::to_string(r.day) + "," +
               std::to_string(r.hour) + "," + std::to_string(r.minute) + "," +
               format_double(r.wind_speed) + "," + format_double(r.air_temperature) + "," +
               format_double(r.air_pressure) + "," + format_double(r.wind_direction) + "," +
               format_double(r.density) + "," + format_double(r.power) + "," +
               std::to_string(static_cast<int>(classify_region(r.wind_speed, spec))) + "," +
               std::to_string(is_fault(r.wind_speed, spec)) + "\n";
    }
    return out;
}

std::string predict_records_csv(const std::string& model_path,
                                const std::vector<MetRecord>& records,
                                const TurbineSpec& spec) {
    if (!file_exists(model_path)) fail(ErrKind::MissingFile, "model file not found: " + model_path);
    if (records.empty()) fail(ErrKind::EmptyInput, "no records to predict");
    const std::string text = read_file(model_path);

    if (text.rfind("turbperf-svr", 0) == 0) {
        const SvrModel model = parse_svr(text);
        std::string out = "row,wind_speed,observed_power,predicted_power\n";
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto x = model.stats.normalize_features(records[i].raw_features());
            const double mw = model.stats.denormalize_power(predict_svr(model, x));
            out += std::to_string(i) + "," + format_double(records[i].wind_speed) + "," +
                   format_double(records[i].power) + "," + format_double(mw) + "\n";
        }
        return out;
    }
    if (text.rfind("turbperf-nn", 0) == 0) {
        const NetModel model = parse_net(text);
        spec.validate();
        // Self-contained windowing over the record stream: one chronological
        // run, features scaled with the statistics stored in the model.
        LabeledDataset ds;
        const long n = static_cast<long>(records.size());
        ds.features.resize(n, kFeatureCount);
        ds.power_target.resize(n);
        ds.fault_label.resize(n);
        ds.split_tag.assign(n, SplitTag::Train);
        ds.chrono_index.resize(n);
        ds.stats = model.stats;
        for (long i = 0; i < n; ++i) {
            ds.features.row(i) = model.stats.normalize_features(records[i].raw_features());
            ds.power_target(i) = model.stats.normalize_power(records[i].power);
            ds.fault_label[i] = is_fault(records[i].wind_speed, spec);
            ds.chrono_index[i] = i;
        }
        const std::vector<Window> windows = make_windows(ds, model.window, model.kind);
        std::string out = "row,wind_speed,fault,prediction,decision\n";
        for (std::size_t j = 0; j < windows.size(); ++j) {
            const long row = static_cast<long>(j) + model.window - 1;
            const double p = forward(model, windows[j].steps);
            out += std::to_string(row) + "," + format_double(records[row].wind_speed) + "," +
                   std::to_string(ds.fault_label[row]) + "," + format_double(p) + "," +
                   std::to_string(fault_decision(p)) + "\n";
        }
        return out;
    }
    fail(ErrKind::ParseError, "unrecognized model file: " + model_path);
}

void export_run_curves(const RunConfig& cfg, const std::string& out_base) {
    const std::string records_path = artifact_path(cfg, "records.csv");
    const std::string dataset_path = artifact_path(cfg, "dataset.tp");
    const std::string svr_model_path = artifact_path(cfg, "svr.model");
    file_fingerprint(records_path, "run the ingest stage first");
    file_fingerprint(dataset_path, "run the label stage first");
    file_fingerprint(svr_model_path, "run the train_svr stage first");

    const std::vector<MetRecord> records = ingest_csv(records_path, CsvSchema{});
    const LabeledDataset ds = load_dataset(dataset_path);
    const SvrModel svr = load_svr(svr_model_path);
    const CurveData curve = build_curve_data(cfg, records, ds, svr);
    export_curve_plot(curve.actual, curve.predicted, ds.stats, out_base);
}

} // namespace turbperf
