// Command-line front end. Everything substantive goes through the public C
// API in turbperf.h; this file only parses arguments and moves text around.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "turbperf.h"

namespace {

[[noreturn]] void die(tp_status status) {
    std::cerr << "error: " << tp_last_error() << "\n";
    std::exit(static_cast<int>(status));
}

void check(tp_status status) {
    if (status != TP_OK) die(status);
}

// Takes ownership of an API-allocated string.
std::string take(char* s) {
    std::string out = (s != nullptr) ? s : "";
    tp_string_free(s);
    return out;
}

struct Config {
    tp_config* handle = nullptr;
    ~Config() { tp_config_free(handle); }
};

struct Dataset {
    tp_dataset* handle = nullptr;
    ~Dataset() { tp_dataset_free(handle); }
};

struct Svr {
    tp_svr* handle = nullptr;
    ~Svr() { tp_svr_free(handle); }
};

struct Net {
    tp_net* handle = nullptr;
    ~Net() { tp_net_free(handle); }
};

// defaults -> config file -> environment -> --set (later wins)
void build_config(Config& cfg, const std::string& file,
                  const std::vector<std::string>& sets) {
    check(file.empty() ? tp_config_create(&cfg.handle)
                       : tp_config_load(file.c_str(), &cfg.handle));
    check(tp_config_apply_env(cfg.handle));
    for (const std::string& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "error: --set expects key=value, got \"" << kv << "\"\n";
            std::exit(static_cast<int>(TP_ERR_CONFIG));
        }
        check(tp_config_set(cfg.handle, kv.substr(0, eq).c_str(),
                            kv.substr(eq + 1).c_str()));
    }
}

std::string config_value(const Config& cfg, const std::string& key) {
    char* value = nullptr;
    check(tp_config_get(cfg.handle, key.c_str(), &value));
    return take(value);
}

// "-" means stdout.
void write_output(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        std::cerr << "error: cannot write " << path << "\n";
        std::exit(static_cast<int>(TP_ERR_IO));
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wind-turbine performance analysis toolkit"};
    app.set_version_flag("--version", std::string(tp_version()));
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_file;
    std::vector<std::string> sets;
    app.add_option("-c,--config", config_file, "configuration file (key = value lines)");
    app.add_option("--set", sets, "override one key, e.g. --set svr.c=10")
        ->type_name("KEY=VALUE");

    // ---- data verbs ----
    std::string in_path, out_path = "-";
    auto* synth = app.add_subcommand("synth", "generate the synthetic record series")->fallthrough();
    synth->add_option("-o,--out", out_path, "output CSV path, - for stdout");

    auto* ingest = app.add_subcommand("ingest", "read a raw CSV into canonical records")->fallthrough();
    ingest->add_option("-i,--in", in_path, "source CSV")->required();
    ingest->add_option("-o,--out", out_path, "output CSV path, - for stdout");

    auto* label = app.add_subcommand("label", "append operating-region and fault columns")->fallthrough();
    label->add_option("-i,--in", in_path, "canonical records CSV")->required();
    label->add_option("-o,--out", out_path, "output CSV path, - for stdout");

    auto* split = app.add_subcommand("split", "build the labeled train/val/test dataset")->fallthrough();
    split->add_option("-i,--in", in_path, "canonical records CSV")->required();
    split->add_option("-o,--out", out_path, "dataset output path")->required();

    // ---- model verbs ----
    std::string data_path, model_path, arch;
    long cv_k = 0;
    auto* train_svr = app.add_subcommand("train-svr", "train the kernel power-curve regressor")->fallthrough();
    train_svr->add_option("-d,--data", data_path, "dataset file (default: <out.dir>/dataset.tp)");
    train_svr->add_option("-o,--out", model_path, "model output (default: <out.dir>/svr.model)");

    auto* train_nn = app.add_subcommand("train-nn", "train one neural fault classifier")->fallthrough();
    train_nn->add_option("-a,--arch", arch, "ff | rnn | cnn | sae | nar")->required();
    train_nn->add_option("-d,--data", data_path, "dataset file (default: <out.dir>/dataset.tp)");
    train_nn->add_option("-o,--out", model_path, "model output (default: <out.dir>/nn.<arch>.model)");

    auto* cv = app.add_subcommand("cv", "k-fold cross-validation of the regressor")->fallthrough();
    cv->add_option("-k", cv_k, "fold count (default: cv.k)");
    cv->add_option("-d,--data", data_path, "dataset file (default: built from config)");

    auto* predict = app.add_subcommand("predict", "per-record predictions from a saved model")->fallthrough();
    predict->add_option("-m,--model", model_path, "model file (regressor or net)")->required();
    predict->add_option("-i,--in", in_path, "canonical records CSV")->required();
    predict->add_option("-o,--out", out_path, "output CSV path, - for stdout");

    // ---- pipeline verbs ----
    int jobs = 1;
    std::string stages;
    auto* sweep = app.add_subcommand("sweep", "train all five architectures")->fallthrough();
    sweep->add_option("-j,--jobs", jobs, "parallel training jobs (default 1)");

    auto* report = app.add_subcommand("report", "build and print the comparison report")->fallthrough();

    std::string plot_base;
    auto* plot = app.add_subcommand("plot-data", "export power-curve plot data")->fallthrough();
    plot->add_option("-o,--out-base", plot_base,
                     "output basename (default: <out.dir>/curve)");

    auto* run = app.add_subcommand("run", "run pipeline stages in order")->fallthrough();
    run->add_option("--stages", stages, "comma-separated subset (default: all)");
    run->add_option("-j,--jobs", jobs, "parallel training jobs for the sweep stage");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(TP_ERR_CONFIG);
    }

    Config cfg;
    build_config(cfg, config_file, sets);

    if (synth->parsed()) {
        char* csv = nullptr;
        check(tp_synth_csv(cfg.handle, &csv));
        write_output(out_path, take(csv));
        return 0;
    }
    if (ingest->parsed()) {
        char* csv = nullptr;
        long skipped = 0;
        check(tp_ingest_csv(cfg.handle, in_path.c_str(), &csv, &skipped));
        write_output(out_path, take(csv));
        if (skipped > 0) std::cerr << "skipped " << skipped << " malformed row(s)\n";
        return 0;
    }
    if (label->parsed()) {
        char* csv = nullptr;
        check(tp_label_csv(cfg.handle, in_path.c_str(), &csv));
        write_output(out_path, take(csv));
        return 0;
    }
    if (split->parsed()) {
        Dataset ds;
        check(tp_dataset_from_records_csv(cfg.handle, in_path.c_str(), &ds.handle));
        check(tp_dataset_save(ds.handle, out_path.c_str()));
        long counts[3] = {0, 0, 0};
        check(tp_dataset_tag_counts(ds.handle, counts));
        std::cout << "rows: " << tp_dataset_rows(ds.handle) << " (train " << counts[0]
                  << " / val " << counts[1] << " / test " << counts[2] << ")\n"
                  << "wrote " << out_path << "\n";
        return 0;
    }
    if (train_svr->parsed()) {
        if (data_path.empty()) data_path = config_value(cfg, "out.dir") + "/dataset.tp";
        if (model_path.empty()) model_path = config_value(cfg, "out.dir") + "/svr.model";
        Dataset ds;
        check(tp_dataset_load(data_path.c_str(), &ds.handle));
        Svr model;
        char* eval_text = nullptr;
        check(tp_svr_train(cfg.handle, ds.handle, &model.handle, &eval_text));
        check(tp_svr_save(model.handle, model_path.c_str()));
        std::cout << take(eval_text) << "wrote " << model_path << "\n";
        return 0;
    }
    if (train_nn->parsed()) {
        if (data_path.empty()) data_path = config_value(cfg, "out.dir") + "/dataset.tp";
        Dataset ds;
        check(tp_dataset_load(data_path.c_str(), &ds.handle));
        Net model;
        char* eval_text = nullptr;
        check(tp_net_train(cfg.handle, ds.handle, arch.c_str(), &model.handle, &eval_text));
        if (model_path.empty()) {
            model_path = config_value(cfg, "out.dir") + "/nn." + arch + ".model";
        }
        check(tp_net_save(model.handle, model_path.c_str()));
        std::cout << take(eval_text) << "wrote " << model_path << "\n";
        return 0;
    }
    if (cv->parsed()) {
        if (cv_k == 0) cv_k = std::stol(config_value(cfg, "cv.k"));
        Dataset ds;
        if (data_path.empty()) {
            check(tp_dataset_build(cfg.handle, &ds.handle));
        } else {
            check(tp_dataset_load(data_path.c_str(), &ds.handle));
        }
        char* text = nullptr;
        check(tp_cv_text(cfg.handle, ds.handle, cv_k, &text));
        std::cout << take(text);
        return 0;
    }
    if (predict->parsed()) {
        char* csv = nullptr;
        check(tp_predict_csv(cfg.handle, model_path.c_str(), in_path.c_str(), &csv));
        write_output(out_path, take(csv));
        return 0;
    }
    if (sweep->parsed()) {
        char* summary = nullptr;
        check(tp_run_pipeline(cfg.handle, "sweep_nn", jobs, &summary));
        std::cout << take(summary);
        return 0;
    }
    if (report->parsed()) {
        check(tp_run_pipeline(cfg.handle, "report", 1, nullptr));
        char* text = nullptr;
        check(tp_report_text(cfg.handle, &text));
        std::cout << take(text);
        return 0;
    }
    if (plot->parsed()) {
        if (plot_base.empty()) plot_base = config_value(cfg, "out.dir") + "/curve";
        check(tp_plot_data(cfg.handle, plot_base.c_str()));
        std::cout << "wrote " << plot_base << ".actual.csv and " << plot_base
                  << ".predicted.csv\n";
        return 0;
    }
    if (run->parsed()) {
        char* summary = nullptr;
        check(tp_run_pipeline(cfg.handle, stages.empty() ? nullptr : stages.c_str(), jobs,
                              &summary));
        std::cout << take(summary);
        return 0;
    }
    return 0;
}
