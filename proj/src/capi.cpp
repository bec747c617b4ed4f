#include "turbperf.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "config.hpp"
#include "dataio.hpp"
#include "errors.hpp"
#include "neuralnet.hpp"
#include "pipeline.hpp"
#include "report.hpp"
#include "svr.hpp"
#include "textio.hpp"

struct tp_config {
    turbperf::RunConfig cfg;
};
struct tp_dataset {
    turbperf::LabeledDataset ds;
};
struct tp_svr {
    turbperf::SvrModel model;
};
struct tp_net {
    turbperf::NetModel model;
};

namespace {

using namespace turbperf;

thread_local std::string g_last_error;

tp_status status_of(ErrClass cls) {
    switch (cls) {
        case ErrClass::Config: return TP_ERR_CONFIG;
        case ErrClass::Data: return TP_ERR_DATA;
        case ErrClass::Train: return TP_ERR_TRAIN;
        case ErrClass::Io: return TP_ERR_IO;
    }
    return TP_ERR_IO;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

// Runs the body, translating exceptions into statuses + the thread-local
// message. A successful call clears the message.
template <typename Fn>
tp_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return TP_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.cls());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return TP_ERR_IO;
    } catch (...) {
        g_last_error = "unknown failure";
        return TP_ERR_IO;
    }
}

tp_status arg_error(const char* message) {
    g_last_error = message;
    return TP_ERR_CONFIG;
}

ArchKind resolve_arch(const char* arch) {
    if (arch == nullptr) fail(ErrKind::BadConfig, "arch must not be null");
    const auto kind = arch_from_name(arch);
    if (!kind) fail(ErrKind::BadConfig, std::string("unknown architecture \"") + arch + "\"");
    return *kind;
}

} // namespace

extern "C" {

const char* tp_version(void) { return "turbperf 1.0.0"; }

const char* tp_last_error(void) { return g_last_error.c_str(); }

void tp_string_free(char* s) { std::free(s); }

// ---- configuration ---------------------------------------------------------

tp_status tp_config_create(tp_config** out) {
    if (out == nullptr) return arg_error("out must not be null");
    return guarded([&] { *out = new tp_config{}; });
}

tp_status tp_config_load(const char* path, tp_config** out) {
    if (path == nullptr || out == nullptr) return arg_error("path/out must not be null");
    return guarded([&] { *out = new tp_config{RunConfig::from_file(path)}; });
}

void tp_config_free(tp_config* cfg) { delete cfg; }

tp_status tp_config_set(tp_config* cfg, const char* key, const char* value) {
    if (cfg == nullptr || key == nullptr || value == nullptr) {
        return arg_error("cfg/key/value must not be null");
    }
    return guarded([&] { cfg->cfg.set(key, value); });
}

tp_status tp_config_get(const tp_config* cfg, const char* key, char** out_value) {
    if (cfg == nullptr || key == nullptr || out_value == nullptr) {
        return arg_error("cfg/key/out_value must not be null");
    }
    return guarded([&] { *out_value = dup_string(cfg->cfg.get(key)); });
}

tp_status tp_config_apply_env(tp_config* cfg) {
    if (cfg == nullptr) return arg_error("cfg must not be null");
    return guarded([&] { cfg->cfg.apply_env(); });
}

tp_status tp_config_hash(const tp_config* cfg, char** out_hash) {
    if (cfg == nullptr || out_hash == nullptr) return arg_error("cfg/out_hash must not be null");
    return guarded([&] { *out_hash = dup_string(cfg->cfg.hash()); });
}

tp_status tp_config_validate(const tp_config* cfg) {
    if (cfg == nullptr) return arg_error("cfg must not be null");
    return guarded([&] { cfg->cfg.validate(); });
}

// ---- datasets ---------------------------------------------------------------

tp_status tp_dataset_build(const tp_config* cfg, tp_dataset** out) {
    if (cfg == nullptr || out == nullptr) return arg_error("cfg/out must not be null");
    return guarded([&] {
        cfg->cfg.validate();
        *out = new tp_dataset{make_dataset(cfg->cfg, make_records(cfg->cfg))};
    });
}

tp_status tp_dataset_from_records_csv(const tp_config* cfg, const char* csv_path,
                                      tp_dataset** out) {
    if (cfg == nullptr || csv_path == nullptr || out == nullptr) {
        return arg_error("cfg/csv_path/out must not be null");
    }
    return guarded([&] {
        if (!file_exists(csv_path)) {
            fail(ErrKind::MissingFile, std::string("records file not found: ") + csv_path);
        }
        *out = new tp_dataset{make_dataset(cfg->cfg, ingest_csv(csv_path, CsvSchema{}))};
    });
}

tp_status tp_dataset_load(const char* path, tp_dataset** out) {
    if (path == nullptr || out == nullptr) return arg_error("path/out must not be null");
    return guarded([&] {
        if (!file_exists(path)) {
            fail(ErrKind::MissingFile, std::string("dataset file not found: ") + path);
        }
        *out = new tp_dataset{load_dataset(path)};
    });
}

tp_status tp_dataset_save(const tp_dataset* ds, const char* path) {
    if (ds == nullptr || path == nullptr) return arg_error("ds/path must not be null");
    return guarded([&] { save_dataset(ds->ds, path); });
}

void tp_dataset_free(tp_dataset* ds) { delete ds; }

long tp_dataset_rows(const tp_dataset* ds) { return ds == nullptr ? 0 : ds->ds.n(); }

tp_status tp_dataset_tag_counts(const tp_dataset* ds, long counts[3]) {
    if (ds == nullptr || counts == nullptr) return arg_error("ds/counts must not be null");
    return guarded([&] {
        counts[0] = static_cast<long>(ds->ds.rows_with_tag(SplitTag::Train).size());
        counts[1] = static_cast<long>(ds->ds.rows_with_tag(SplitTag::Val).size());
        counts[2] = static_cast<long>(ds->ds.rows_with_tag(SplitTag::Test).size());
    });
}

// ---- text verbs -------------------------------------------------------------

tp_status tp_ingest_csv(const tp_config* cfg, const char* csv_path, char** out_csv,
                        long* out_skipped) {
    if (cfg == nullptr || csv_path == nullptr || out_csv == nullptr) {
        return arg_error("cfg/csv_path/out_csv must not be null");
    }
    return guarded([&] {
        if (!file_exists(csv_path)) {
            fail(ErrKind::MissingFile, std::string("dataset file not found: ") + csv_path);
        }
        long skipped = 0;
        const auto records =
            ingest_csv(csv_path, cfg->cfg.schema(),
                       cfg->cfg.get_bool("data.strict") ? IngestMode::Strict
                                                        : IngestMode::Lenient,
                       &skipped);
        *out_csv = dup_string(render_records_csv(records));
        if (out_skipped != nullptr) *out_skipped = skipped;
    });
}

tp_status tp_synth_csv(const tp_config* cfg, char** out_csv) {
    if (cfg == nullptr || out_csv == nullptr) return arg_error("cfg/out_csv must not be null");
    return guarded([&] {
        const auto records = synth_dataset(
            cfg->cfg.turbine(), cfg->cfg.get_long("synth.n"),
            cfg->cfg.get_double("synth.noise_sigma"),
            cfg->cfg.get_double("synth.fault_fraction"),
            static_cast<std::uint64_t>(cfg->cfg.get_long("synth.seed")),
            cfg->cfg.synth_params());
        *out_csv = dup_string(render_records_csv(records));
    });
}

tp_status tp_label_csv(const tp_config* cfg, const char* records_csv_path, char** out_csv) {
    if (cfg == nullptr || records_csv_path == nullptr || out_csv == nullptr) {
        return arg_error("cfg/records_csv_path/out_csv must not be null");
    }
    return guarded([&] {
        if (!file_exists(records_csv_path)) {
            fail(ErrKind::MissingFile,
                 std::string("records file not found: ") + records_csv_path);
        }
        const auto records = ingest_csv(records_csv_path, CsvSchema{});
        *out_csv = dup_string(render_labeled_records_csv(records, cfg->cfg.turbine()));
    });
}

tp_status tp_predict_csv(const tp_config* cfg, const char* model_path,
                         const char* records_csv_path, char** out_csv) {
    if (cfg == nullptr || model_path == nullptr || records_csv_path == nullptr ||
        out_csv == nullptr) {
        return arg_error("cfg/model_path/records_csv_path/out_csv must not be null");
    }
    return guarded([&] {
        if (!file_exists(records_csv_path)) {
            fail(ErrKind::MissingFile,
                 std::string("records file not found: ") + records_csv_path);
        }
        const auto records = ingest_csv(records_csv_path, CsvSchema{});
        *out_csv = dup_string(predict_records_csv(model_path, records, cfg->cfg.turbine()));
    });
}

// ---- support vector regressor ----------------------------------------------

tp_status tp_svr_train(const tp_config* cfg, const tp_dataset* ds, tp_svr** out,
                       char** out_eval) {
    if (cfg == nullptr || ds == nullptr || out == nullptr) {
        return arg_error("cfg/ds/out must not be null");
    }
    return guarded([&] {
        cfg->cfg.validate();
        SvrRun run = run_svr_training(cfg->cfg, ds->ds);
        if (out_eval != nullptr) {
            *out_eval = dup_string(render_svr_eval(run, cfg->cfg.measure_time()));
        }
        *out = new tp_svr{std::move(run.model)};
    });
}

tp_status tp_svr_load(const char* path, tp_svr** out) {
    if (path == nullptr || out == nullptr) return arg_error("path/out must not be null");
    return guarded([&] {
        if (!file_exists(path)) {
            fail(ErrKind::MissingFile, std::string("model file not found: ") + path);
        }
        *out = new tp_svr{load_svr(path)};
    });
}

tp_status tp_svr_save(const tp_svr* model, const char* path) {
    if (model == nullptr || path == nullptr) return arg_error("model/path must not be null");
    return guarded([&] { save_svr(model->model, path); });
}

void tp_svr_free(tp_svr* model) { delete model; }

tp_status tp_svr_predict(const tp_svr* model, const double features[9], double* out_power) {
    if (model == nullptr || features == nullptr || out_power == nullptr) {
        return arg_error("model/features/out_power must not be null");
    }
    return guarded([&] {
        Eigen::Vector<double, kFeatureCount> raw;
        for (int i = 0; i < kFeatureCount; ++i) raw(i) = features[i];
        *out_power = predict_svr(model->model, model->model.stats.normalize_features(raw));
    });
}

tp_status tp_svr_test_mse(const tp_svr* model, const tp_dataset* ds, double* out_mse) {
    if (model == nullptr || ds == nullptr || out_mse == nullptr) {
        return arg_error("model/ds/out_mse must not be null");
    }
    return guarded([&] {
        const std::vector<long> rows = ds->ds.rows_with_tag(SplitTag::Test);
        if (rows.empty()) fail(ErrKind::EmptySplit, "test split is empty");
        Eigen::MatrixXd x(static_cast<long>(rows.size()), ds->ds.features.cols());
        Eigen::VectorXd y(static_cast<long>(rows.size()));
        for (long i = 0; i < static_cast<long>(rows.size()); ++i) {
            x.row(i) = ds->ds.features.row(rows[i]);
            y(i) = ds->ds.power_target(rows[i]);
        }
        *out_mse = mse(predict_svr_batch(model->model, x), y);
    });
}

tp_status tp_cv_text(const tp_config* cfg, const tp_dataset* ds, long k, char** out_text) {
    if (cfg == nullptr || ds == nullptr || out_text == nullptr) {
        return arg_error("cfg/ds/out_text must not be null");
    }
    return guarded([&] {
        const CvReport report = run_cv(cfg->cfg, ds->ds, k);
        std::string text = "turbperf-cv v1\n";
        text += "k = " + std::to_string(report.fold_mses.size()) + "\n";
        for (std::size_t i = 0; i < report.fold_mses.size(); ++i) {
            text += "fold " + std::to_string(i + 1) +
                    " mse = " + format_double(report.fold_mses[i]) + "\n";
        }
        text += "mean_mse = " + format_double(report.mean_mse) + "\n";
        text += "std_mse = " + format_double(report.std_mse) + "\n";
        *out_text = dup_string(text);
    });
}

// ---- neural fault classifiers ----------------------------------------------

tp_status tp_net_train(const tp_config* cfg, const tp_dataset* ds, const char* arch,
                       tp_net** out, char** out_eval) {
    if (cfg == nullptr || ds == nullptr || out == nullptr) {
        return arg_error("cfg/ds/out must not be null");
    }
    return guarded([&] {
        const ArchKind kind = resolve_arch(arch);
        cfg->cfg.validate();
        NnRun run = run_nn_training(cfg->cfg, ds->ds, kind);
        if (out_eval != nullptr) {
            *out_eval = dup_string(render_nn_eval(kind, run, cfg->cfg.measure_time()));
        }
        *out = new tp_net{std::move(run.model)};
    });
}

tp_status tp_net_load(const char* path, tp_net** out) {
    if (path == nullptr || out == nullptr) return arg_error("path/out must not be null");
    return guarded([&] {
        if (!file_exists(path)) {
            fail(ErrKind::MissingFile, std::string("model file not found: ") + path);
        }
        *out = new tp_net{load_net(path)};
    });
}

tp_status tp_net_save(const tp_net* model, const char* path) {
    if (model == nullptr || path == nullptr) return arg_error("model/path must not be null");
    return guarded([&] { save_net(model->model, path); });
}

void tp_net_free(tp_net* model) { delete model; }

tp_status tp_net_predict(const tp_net* model, const double* window, long rows, long cols,
                         double* out_probability) {
    if (model == nullptr || window == nullptr || out_probability == nullptr) {
        return arg_error("model/window/out_probability must not be null");
    }
    return guarded([&] {
        if (rows < 1 || cols < 1) fail(ErrKind::ShapeMismatch, "window must be non-empty");
        Eigen::MatrixXd steps(rows, cols);
        for (long r = 0; r < rows; ++r) {
            for (long c = 0; c < cols; ++c) steps(r, c) = window[r * cols + c];
        }
        if (model->model.kind != ArchKind::NarTimeSeries) {
            if (cols != kFeatureCount) {
                fail(ErrKind::ShapeMismatch, "expected 9 feature columns");
            }
            for (long r = 0; r < rows; ++r) {
                steps.row(r) = model->model.stats.normalize_features(steps.row(r).transpose());
            }
        }
        *out_probability = forward(model->model, steps);
    });
}

tp_status tp_net_test_mse(const tp_net* model, const tp_dataset* ds, double* out_mse) {
    if (model == nullptr || ds == nullptr || out_mse == nullptr) {
        return arg_error("model/ds/out_mse must not be null");
    }
    return guarded([&] {
        std::vector<Window> test_ws;
        for (Window& w : make_windows(ds->ds, model->model.window, model->model.kind)) {
            if (w.tag == SplitTag::Test) test_ws.push_back(std::move(w));
        }
        if (test_ws.empty()) fail(ErrKind::EmptySplit, "no test windows");
        *out_mse = evaluate_mse(model->model, test_ws);
    });
}

// ---- pipeline ---------------------------------------------------------------

tp_status tp_run_pipeline(const tp_config* cfg, const char* stages_csv, int jobs,
                          char** out_summary) {
    if (cfg == nullptr) return arg_error("cfg must not be null");
    return guarded([&] {
        const StageSet stages = (stages_csv == nullptr || *stages_csv == '\0')
                                    ? StageSet::all()
                                    : StageSet::from_csv(stages_csv);
        const PipelineResult result = run_pipeline(cfg->cfg, stages, jobs);
        if (out_summary != nullptr) {
            const auto join = [](const std::vector<std::string>& names) {
                if (names.empty()) return std::string("(none)");
                std::string out;
                for (const std::string& n : names) {
                    if (!out.empty()) out += ", ";
                    out += n;
                }
                return out;
            };
            *out_summary = dup_string("ran: " + join(result.ran) +
                                      "\nskipped: " + join(result.skipped) + "\n");
        }
    });
}

tp_status tp_report_text(const tp_config* cfg, char** out_text) {
    if (cfg == nullptr || out_text == nullptr) return arg_error("cfg/out_text must not be null");
    return guarded([&] {
        const std::string path = artifact_path(cfg->cfg, "report.tp");
        if (!file_exists(path)) {
            fail(ErrKind::MissingFile, path + " not found; run the report stage first");
        }
        *out_text = dup_string(render_report_table(load_report(path)));
    });
}

tp_status tp_plot_data(const tp_config* cfg, const char* out_base) {
    if (cfg == nullptr || out_base == nullptr) return arg_error("cfg/out_base must not be null");
    return guarded([&] { export_run_curves(cfg->cfg, out_base); });
}

} // extern "C"
