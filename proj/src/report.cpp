#include "report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "textio.hpp"

namespace turbperf {

double mse(const Eigen::Ref<const Eigen::VectorXd>& predictions,
           const Eigen::Ref<const Eigen::VectorXd>& targets) {
    if (predictions.size() != targets.size()) {
        fail(ErrKind::LengthMismatch, "prediction and target lengths differ");
    }
    if (predictions.size() == 0) fail(ErrKind::EmptyInput, "mse of empty vectors");
    return (predictions - targets).squaredNorm() / static_cast<double>(predictions.size());
}

double mse(const std::vector<double>& predictions, const std::vector<double>& targets) {
    const Eigen::Map<const Eigen::VectorXd> p(predictions.data(),
                                              static_cast<long>(predictions.size()));
    const Eigen::Map<const Eigen::VectorXd> t(targets.data(),
                                              static_cast<long>(targets.size()));
    return mse(Eigen::VectorXd(p), Eigen::VectorXd(t));
}

ComparisonReport build_report(std::vector<EvalRow> rows, ReportMeta meta) {
    if (rows.empty()) fail(ErrKind::EmptyInput, "report needs at least one row");
    std::set<std::string> seen;
    for (const EvalRow& row : rows) {
        if (row.name.empty() || row.name.find(',') != std::string::npos ||
            row.name.find('\n') != std::string::npos) {
            fail(ErrKind::BadConfig, "row name must be non-empty without commas");
        }
        if (!seen.insert(row.name).second) {
            fail(ErrKind::DuplicateName, "duplicate row name \"" + row.name + "\"");
        }
        if (!std::isfinite(row.mse) || row.mse < 0.0) {
            fail(ErrKind::BadConfig, "row \"" + row.name + "\" has an invalid mse");
        }
    }

    ComparisonReport report;
    report.rows = std::move(rows);
    report.meta = std::move(meta);

    long best = 0;
    for (long i = 1; i < static_cast<long>(report.rows.size()); ++i) {
        if (report.rows[i].mse < report.rows[best].mse) best = i;
    }
    report.best_index = best;

    long runner = -1;
    for (long i = 0; i < static_cast<long>(report.rows.size()); ++i) {
        if (i == best) continue;
        if (runner < 0 || report.rows[i].mse < report.rows[runner].mse) runner = i;
    }
    if (runner >= 0) {
        report.improvement_over = report.rows[runner].name;
        const double r = report.rows[runner].mse;
        report.improvement_percent =
            r > 0.0 ? 100.0 * (r - report.rows[best].mse) / r : 0.0;
    }
    return report;
}

std::string render_report(const ComparisonReport& report) {
    std::string out;
    out += "turbperf-report v1\n";
    out += "dataset_rows = " + std::to_string(report.meta.dataset_rows) + "\n";
    out += "split_seed = " + std::to_string(report.meta.split_seed) + "\n";
    out += "config_hash = " + report.meta.config_hash + "\n";
    out += "timestamp = " + report.meta.timestamp + "\n";
    out += "best_index = " + std::to_string(report.best_index) + "\n";
    out += "improvement_percent = " + format_double(report.improvement_percent) + "\n";
    out += "improvement_over = " + report.improvement_over + "\n";
    out += "n_rows = " + std::to_string(report.rows.size()) + "\n";
    for (const EvalRow& row : report.rows) {
        out += "row = " + row.name + ", epochs = " + std::to_string(row.epochs) +
               ", passes = " + std::to_string(row.passes) +
               ", time = " + format_double(row.wall_time_seconds) +
               ", mse = " + format_double(row.mse) + "\n";
    }
    return out;
}

namespace {

std::string take_kv(const std::string& line, const std::string& key) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)) != key) {
        fail(ErrKind::ParseError, "expected \"" + key + "\" line, got: " + line);
    }
    return trim(line.substr(eq + 1));
}

std::string next_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrKind::ParseError, std::string("missing ") + what);
    return line;
}

} // namespace

ComparisonReport parse_report(const std::string& text) {
    std::istringstream in(text);
    if (trim(next_line(in, "header")) != "turbperf-report v1") {
        fail(ErrKind::ParseError, "not a turbperf report file");
    }
    ComparisonReport report;
    report.meta.dataset_rows =
        parse_int(take_kv(next_line(in, "dataset_rows"), "dataset_rows")).value_or(-1);
    const auto seed = parse_int(take_kv(next_line(in, "split_seed"), "split_seed"));
    if (!seed || report.meta.dataset_rows < 0) fail(ErrKind::ParseError, "bad report header");
    report.meta.split_seed = static_cast<std::uint64_t>(*seed);
    report.meta.config_hash = take_kv(next_line(in, "config_hash"), "config_hash");
    report.meta.timestamp = take_kv(next_line(in, "timestamp"), "timestamp");
    report.best_index =
        parse_int(take_kv(next_line(in, "best_index"), "best_index")).value_or(-1);
    report.improvement_percent =
        parse_double(take_kv(next_line(in, "improvement_percent"), "improvement_percent"))
            .value_or(0.0);
    report.improvement_over = take_kv(next_line(in, "improvement_over"), "improvement_over");
    const long n_rows = parse_int(take_kv(next_line(in, "n_rows"), "n_rows")).value_or(-1);
    if (n_rows < 1) fail(ErrKind::ParseError, "bad row count");

    for (long i = 0; i < n_rows; ++i) {
        const std::string line = next_line(in, "report row");
        const auto parts = split(line, ',');
        if (parts.size() != 5) fail(ErrKind::ParseError, "bad report row: " + line);
        EvalRow row;
        row.name = take_kv(parts[0], "row");
        row.epochs = parse_int(take_kv(parts[1], "epochs")).value_or(-1);
        row.passes = parse_int(take_kv(parts[2], "passes")).value_or(-1);
        const auto time = parse_double(take_kv(parts[3], "time"));
        const auto err = parse_double(take_kv(parts[4], "mse"));
        if (row.epochs < 0 || row.passes < 0 || !time || !err) {
            fail(ErrKind::ParseError, "bad report row: " + line);
        }
        row.wall_time_seconds = *time;
        row.mse = *err;
        report.rows.push_back(std::move(row));
    }
    if (report.best_index < 0 || report.best_index >= n_rows) {
        fail(ErrKind::ParseError, "best_index out of range");
    }
    return report;
}

void save_report(const ComparisonReport& report, const std::string& path) {
    write_file_atomic(path, render_report(report));
}

ComparisonReport load_report(const std::string& path) {
    return parse_report(read_file(path));
}

std::string render_report_table(const ComparisonReport& report) {
    char buf[64];
    std::vector<std::array<std::string, 5>> cells;
    cells.push_back({"model", "epochs", "passes", "time (s)", "mse"});
    for (const EvalRow& row : report.rows) {
        std::array<std::string, 5> line;
        line[0] = row.name;
        line[1] = std::to_string(row.epochs);
        line[2] = std::to_string(row.passes);
        std::snprintf(buf, sizeof(buf), "%.2f", row.wall_time_seconds);
        line[3] = buf;
        std::snprintf(buf, sizeof(buf), "%.6f", row.mse);
        line[4] = buf;
        cells.push_back(std::move(line));
    }

    std::array<std::size_t, 5> width{};
    for (const auto& line : cells) {
        for (int c = 0; c < 5; ++c) width[c] = std::max(width[c], line[c].size());
    }

    std::string out;
    out += "rows: " + std::to_string(report.meta.dataset_rows) +
           "  split seed: " + std::to_string(report.meta.split_seed) +
           "  config: " + report.meta.config_hash +
           "  generated: " + report.meta.timestamp + "\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& line = cells[i];
        out += line[0] + std::string(width[0] - line[0].size(), ' ');
        for (int c = 1; c < 5; ++c) {
            out += "  " + std::string(width[c] - line[c].size(), ' ') + line[c];
        }
        if (i == static_cast<std::size_t>(report.best_index) + 1) out += "  <- best";
        out += "\n";
    }
    if (!report.improvement_over.empty()) {
        std::snprintf(buf, sizeof(buf), "%.2f", report.improvement_percent);
        out += "best improves on " + report.improvement_over + " by " + buf + "%\n";
    }
    return out;
}

void export_curve_plot(const BinnedCurve& actual,
                       const std::vector<std::pair<double, double>>& predicted,
                       const NormalizationStats& stats, const std::string& out_base) {
    if (actual.bins.empty()) fail(ErrKind::EmptyInput, "binned curve has no bins");
    if (predicted.empty()) fail(ErrKind::EmptyInput, "no predicted points to export");

    std::string actual_text = "wind_speed,power,count\n";
    for (const CurveBin& bin : actual.bins) {
        actual_text += format_double(bin.center) + "," + format_double(bin.mean_power) + "," +
                       std::to_string(bin.count) + "\n";
    }
    std::string predicted_text = "wind_speed,power\n";
    for (const auto& [speed, power01] : predicted) {
        predicted_text +=
            format_double(speed) + "," + format_double(stats.denormalize_power(power01)) + "\n";
    }
    write_file_atomic(out_base + ".actual.csv", actual_text);
    write_file_atomic(out_base + ".predicted.csv", predicted_text);
}

std::vector<CurvePoint> parse_curve_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail(ErrKind::ParseError, "empty plot-data file");
    std::vector<CurvePoint> out;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto parts = split(line, ',');
        if (parts.size() != 2 && parts.size() != 3) {
            fail(ErrKind::ParseError, "bad plot-data row at line " + std::to_string(lineno));
        }
        CurvePoint p;
        const auto speed = parse_double(parts[0]);
        const auto power = parse_double(parts[1]);
        if (!speed || !power) {
            fail(ErrKind::ParseError, "bad number at line " + std::to_string(lineno));
        }
        p.wind_speed = *speed;
        p.power = *power;
        if (parts.size() == 3) {
            const auto count = parse_double(parts[2]);
            if (!count) fail(ErrKind::ParseError, "bad count at line " + std::to_string(lineno));
            p.count = *count;
        }
        out.push_back(p);
    }
    return out;
}

std::string iso_timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace turbperf
