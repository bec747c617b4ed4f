#pragma once

// Stage runner tying the toolkit together. Stages execute in a fixed order
// (ingest -> label -> train_svr -> sweep_nn -> report), each writing versioned
// artifacts into the configured output directory. A manifest of content
// fingerprints makes re-running a completed stage with unchanged inputs a
// no-op: artifact files are not touched at all.
//
// Artifacts
//   records.csv          canonical meteorological records (ingested or synthetic)
//   dataset.tp           labeled, split, normalized dataset
//   svr.model, svr.eval  kernel regressor and its evaluation summary
//   nn.<arch>.model/.eval one pair per architecture
//   report.tp, report.txt comparison report (structured + aligned table)
//   curve.actual.csv, curve.predicted.csv  power-curve plot data
//   manifest.tp          stage fingerprints

#include <string>
#include <vector>

#include "config.hpp"
#include "dataio.hpp"
#include "neuralnet.hpp"
#include "report.hpp"
#include "svr.hpp"

namespace turbperf {

struct StageSet {
    bool ingest = false;
    bool label = false;
    bool train_svr = false;
    bool sweep_nn = false;
    bool report = false;

    static StageSet all();
    // Comma-separated subset, e.g. "ingest,label"; hyphens accepted.
    static StageSet from_csv(const std::string& csv);
};

struct PipelineResult {
    std::vector<std::string> ran;
    std::vector<std::string> skipped; // fresh stages left untouched
};

std::string artifact_path(const RunConfig& cfg, const std::string& name);

// Records per config: ingest data.csv when set, else the deterministic
// synthetic series. No files are touched.
std::vector<MetRecord> make_records(const RunConfig& cfg);

// Label + split + normalize per config.
LabeledDataset make_dataset(const RunConfig& cfg, const std::vector<MetRecord>& records);

struct SvrRun {
    SvrModel model;
    SvrTrainSummary summary;
    double train_mse = 0.0; // over the rows actually trained on
    double test_mse = 0.0;  // over the full test split
    double wall_seconds = 0.0;
};

// Trains on the Train split (subsampled deterministically when svr.train_cap
// is positive) and evaluates on the Test split.
SvrRun run_svr_training(const RunConfig& cfg, const LabeledDataset& ds);

struct NnRun {
    NetModel model;
    TrainTrace trace;
    double test_mse = 0.0;
};

NnRun run_nn_training(const RunConfig& cfg, const LabeledDataset& ds, ArchKind kind);

// "turbperf-eval v1" key = value summaries (the .eval artifact bodies).
// measured = false zeroes wall times for byte-reproducible artifacts.
std::string render_svr_eval(const SvrRun& run, bool measured);
std::string render_nn_eval(ArchKind kind, const NnRun& run, bool measured);

// k-fold CV over all rows (the CV protocol replaces the train/val/test split),
// after the same svr.train_cap subsampling as training.
CvReport run_cv(const RunConfig& cfg, const LabeledDataset& ds, long k);

PipelineResult run_pipeline(const RunConfig& cfg, const StageSet& stages, int jobs = 1);

// Records with appended region / fault columns (the `label` subcommand view).
std::string render_labeled_records_csv(const std::vector<MetRecord>& records,
                                       const TurbineSpec& spec);

// Per-row predictions as CSV; the model file kind (kernel regressor vs
// network) is detected from its header line. Network predictions start at the
// first complete window.
std::string predict_records_csv(const std::string& model_path,
                                const std::vector<MetRecord>& records,
                                const TurbineSpec& spec);

// The report-stage curve export, available standalone: bins the test-split
// power curve and pairs it with kernel-regressor predictions.
void export_run_curves(const RunConfig& cfg, const std::string& out_base);

} // namespace turbperf
