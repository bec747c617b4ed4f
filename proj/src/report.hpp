#pragma once

// Metrics, the model-comparison report (one row per trained model: epochs,
// wall time, test MSE), and the power-curve plot-data export.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dataio.hpp"
#include "powercurve.hpp"

namespace turbperf {

double mse(const Eigen::Ref<const Eigen::VectorXd>& predictions,
           const Eigen::Ref<const Eigen::VectorXd>& targets);
double mse(const std::vector<double>& predictions, const std::vector<double>& targets);

struct EvalRow {
    std::string name;
    long epochs = 0; // 0 for the kernel regressor; its optimizer passes go below
    long passes = 0; // dual-optimizer passes; 0 for network rows
    double wall_time_seconds = 0.0;
    double mse = 0.0;

    bool operator==(const EvalRow&) const = default;
};

struct ReportMeta {
    long dataset_rows = 0;
    std::uint64_t split_seed = 0;
    std::string config_hash;
    std::string timestamp; // ISO-8601 UTC

    bool operator==(const ReportMeta&) const = default;
};

struct ComparisonReport {
    std::vector<EvalRow> rows; // caller order preserved
    ReportMeta meta;
    long best_index = 0;              // argmin of mse (first on ties)
    double improvement_percent = 0.0; // best vs. second-best mse, in percent
    std::string improvement_over;     // name of the second-best row; empty if < 2 rows

    bool operator==(const ComparisonReport&) const = default;
};

// Validates names (unique, no commas/newlines), flags the minimum-MSE row and
// annotates its relative improvement over the runner-up:
// 100 * (runner_mse - best_mse) / runner_mse.
ComparisonReport build_report(std::vector<EvalRow> rows, ReportMeta meta = {});

// Versioned structured text; parse_report(render_report(r)) == r.
std::string render_report(const ComparisonReport& report);
ComparisonReport parse_report(const std::string& text);
void save_report(const ComparisonReport& report, const std::string& path);
ComparisonReport load_report(const std::string& path);

// Aligned plain-text table with the best row marked.
std::string render_report_table(const ComparisonReport& report);

// Writes two plot-data files derived from out_base: "<out_base>.actual.csv"
// (binned measured curve: wind_speed,power,count) and
// "<out_base>.predicted.csv" (wind_speed,power). Predicted powers arrive on
// the normalized [0,1] scale and are denormalized to physical units with
// `stats`. Inputs are validated before any file is touched.
void export_curve_plot(const BinnedCurve& actual,
                       const std::vector<std::pair<double, double>>& predicted,
                       const NormalizationStats& stats, const std::string& out_base);

struct CurvePoint {
    double wind_speed = 0.0;
    double power = 0.0;
    double count = 0.0; // 0 when the file has no count column
};

// Reads back one plot-data file (header line, then numeric columns).
std::vector<CurvePoint> parse_curve_csv(const std::string& text);

// Current time as ISO-8601 UTC, e.g. "2026-08-23T12:00:00Z".
std::string iso_timestamp_utc();

} // namespace turbperf
