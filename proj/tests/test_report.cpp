#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "errors.hpp"
#include "report.hpp"
#include "test_util.hpp"

using namespace turbperf;
using testutil::TempDir;
using testutil::read_file;

namespace {

// The five benchmark rows this toolkit reproduces; MSE values double as a
// fixed oracle for the best-row and improvement arithmetic.
std::vector<EvalRow> benchmark_rows() {
    return {
        {"Feedforward Network", 114, 0, 15.00, 0.048979},
        {"Recurrent Neural Network (RNN)", 138, 0, 22.83, 0.026299},
        {"Convolutional Neural Network (CNN)", 129, 0, 18.00, 0.047950},
        {"Sparse Autoencoder", 135, 0, 20.53, 0.029314},
        {"Dynamic Time Series Non Linear Autoregressive (NAR)", 131, 0, 19.18, 0.031452},
    };
}

} // namespace

TEST_CASE("mse: hand values") {
    CHECK(mse({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
    CHECK(mse({0.0, 2.0}, {1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mse({0.5}, {0.0}) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("mse: both overloads agree and pairs may be permuted together") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> p(50), t(50);
    for (int i = 0; i < 50; ++i) {
        p[i] = u(rng);
        t[i] = u(rng);
    }
    Eigen::VectorXd pe(50), te(50);
    for (int i = 0; i < 50; ++i) {
        pe(i) = p[i];
        te(i) = t[i];
    }
    const double base = mse(p, t);
    CHECK(mse(pe, te) == doctest::Approx(base).epsilon(1e-15));

    std::vector<int> idx(50);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<double> p2(50), t2(50);
    for (int i = 0; i < 50; ++i) {
        p2[i] = p[idx[i]];
        t2[i] = t[idx[i]];
    }
    CHECK(mse(p2, t2) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("mse: validation") {
    try {
        mse({1.0, 2.0}, {1.0});
        FAIL("expected LengthMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::LengthMismatch);
    }
    try {
        mse(std::vector<double>{}, std::vector<double>{});
        FAIL("expected EmptyInput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::EmptyInput);
    }
}

TEST_CASE("report: the benchmark rows pick the recurrent model") {
    const ComparisonReport r = build_report(benchmark_rows());
    CHECK(r.best_index == 1);
    CHECK(r.rows[r.best_index].mse == doctest::Approx(0.026299).epsilon(1e-15));
    CHECK(r.improvement_over == "Sparse Autoencoder"); // runner-up at 0.029314
    const double want = 100.0 * (0.029314 - 0.026299) / 0.029314;
    CHECK(r.improvement_percent == doctest::Approx(want).epsilon(1e-12));
    CHECK(r.improvement_percent == doctest::Approx(10.285).epsilon(1e-3));
    // Caller row order is preserved.
    CHECK(r.rows[0].name == "Feedforward Network");
    CHECK(r.rows[4].epochs == 131);
}

TEST_CASE("report: single row has no runner-up") {
    const ComparisonReport r = build_report({{"only", 5, 0, 1.0, 0.5}});
    CHECK(r.best_index == 0);
    CHECK(r.improvement_percent == 0.0);
    CHECK(r.improvement_over.empty());
}

TEST_CASE("report: ties go to the first row") {
    const ComparisonReport r = build_report({{"a", 1, 0, 1.0, 0.3},
                                             {"b", 1, 0, 1.0, 0.3},
                                             {"c", 1, 0, 1.0, 0.9}});
    CHECK(r.best_index == 0);
    CHECK(r.improvement_over == "b");
    CHECK(r.improvement_percent == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("report: improvement percent is scale-invariant") {
    auto rows = benchmark_rows();
    const ComparisonReport a = build_report(rows);
    for (EvalRow& row : rows) row.mse *= 1000.0;
    const ComparisonReport b = build_report(rows);
    CHECK(a.best_index == b.best_index);
    CHECK(a.improvement_percent == doctest::Approx(b.improvement_percent).epsilon(1e-12));
}

TEST_CASE("report: name and row validation") {
    try {
        build_report({{"dup", 1, 0, 1.0, 0.1}, {"dup", 1, 0, 1.0, 0.2}});
        FAIL("expected DuplicateName");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::DuplicateName);
    }
    CHECK_THROWS_AS(build_report({{"has,comma", 1, 0, 1.0, 0.1}}), Error);
    CHECK_THROWS_AS(build_report({{"", 1, 0, 1.0, 0.1}}), Error);
    CHECK_THROWS_AS(build_report({{"neg", 1, 0, 1.0, -0.1}}), Error);
    CHECK_THROWS_AS(build_report({}), Error);
}

TEST_CASE("report: structured text round-trips exactly") {
    ReportMeta meta;
    meta.dataset_rows = 29736;
    meta.split_seed = 42;
    meta.config_hash = "deadbeef01234567";
    meta.timestamp = "2026-01-02T03:04:05Z";
    const ComparisonReport r = build_report(benchmark_rows(), meta);
    const ComparisonReport back = parse_report(render_report(r));
    CHECK(back == r);
}

TEST_CASE("report: save and load through a file") {
    TempDir tmp;
    const ComparisonReport r = build_report(benchmark_rows());
    save_report(r, tmp.file("report.tp"));
    CHECK(load_report(tmp.file("report.tp")) == r);
    CHECK_THROWS_AS(load_report(tmp.file("missing.tp")), Error);
    CHECK_THROWS_AS(parse_report("not a report\n"), Error);
}

TEST_CASE("report table marks the best row and names every model") {
    const ComparisonReport r = build_report(benchmark_rows());
    const std::string table = render_report_table(r);
    CHECK(table.find("<- best") != std::string::npos);
    for (const EvalRow& row : r.rows)
        CHECK(table.find(row.name) != std::string::npos);
    // The improvement note quotes the runner-up.
    CHECK(table.find("Sparse Autoencoder") != std::string::npos);
    CHECK(table.find("%") != std::string::npos);
}

TEST_CASE("curve export: files round-trip and predictions are denormalized") {
    TempDir tmp;
    BinnedCurve actual;
    actual.bin_width = 0.5;
    actual.bins = {{5.25, 1.2, 10}, {5.75, 1.4, 20}, {6.25, 1.9, 7}};

    NormalizationStats stats;
    stats.power_min = 1.0;
    stats.power_max = 3.0;
    const std::vector<std::pair<double, double>> predicted = {
        {5.1, 0.0}, {5.6, 0.5}, {6.2, 1.0}}; // normalized scale

    export_curve_plot(actual, predicted, stats, tmp.file("curve"));

    const auto act = parse_curve_csv(read_file(tmp.file("curve.actual.csv")));
    REQUIRE(act.size() == 3);
    CHECK(act[0].wind_speed == doctest::Approx(5.25).epsilon(1e-9));
    CHECK(act[0].power == doctest::Approx(1.2).epsilon(1e-9));
    CHECK(act[0].count == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(act[2].power == doctest::Approx(1.9).epsilon(1e-9));

    const auto pred = parse_curve_csv(read_file(tmp.file("curve.predicted.csv")));
    REQUIRE(pred.size() == 3);
    // min-max denormalization: 0 -> 1.0, 0.5 -> 2.0, 1 -> 3.0.
    CHECK(pred[0].power == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pred[1].power == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(pred[2].power == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(pred[1].wind_speed == doctest::Approx(5.6).epsilon(1e-9));
}

TEST_CASE("curve export: invalid input writes no files") {
    TempDir tmp;
    BinnedCurve empty;
    NormalizationStats stats;
    CHECK_THROWS_AS(export_curve_plot(empty, {{1.0, 0.5}}, stats, tmp.file("c")), Error);
    CHECK_FALSE(std::filesystem::exists(tmp.file("c.actual.csv")));
    CHECK_FALSE(std::filesystem::exists(tmp.file("c.predicted.csv")));

    BinnedCurve ok;
    ok.bins = {{1.25, 0.5, 3}};
    CHECK_THROWS_AS(export_curve_plot(ok, {}, stats, tmp.file("c")), Error);
    CHECK_FALSE(std::filesystem::exists(tmp.file("c.actual.csv")));
}

TEST_CASE("parse_curve_csv rejects malformed rows") {
    CHECK_THROWS_AS(parse_curve_csv(""), Error);
    CHECK_THROWS_AS(parse_curve_csv("wind_speed,power\n1.0\n"), Error);
    CHECK_THROWS_AS(parse_curve_csv("wind_speed,power\n1.0,abc\n"), Error);
    const auto pts = parse_curve_csv("wind_speed,power\n1.0,2.0\n");
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].count == 0.0); // no count column
}

TEST_CASE("timestamps are ISO-8601 UTC") {
    const std::string ts = iso_timestamp_utc();
    REQUIRE(ts.size() == 20);
    CHECK(ts[4] == '-');
    CHECK(ts[7] == '-');
    CHECK(ts[10] == 'T');
    CHECK(ts[13] == ':');
    CHECK(ts[16] == ':');
    CHECK(ts.back() == 'Z');
}
