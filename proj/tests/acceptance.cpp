// Acceptance gates for the toolkit: one line per criterion, nonzero exit if
// any gate fails. Each check is written against independent oracles rather
// than the implementation's own intermediate results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "config.hpp"
#include "dataio.hpp"
#include "errors.hpp"
#include "neuralnet.hpp"
#include "pipeline.hpp"
#include "powercurve.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "svr.hpp"

#ifndef TURBPERF_REPO_DIR
#define TURBPERF_REPO_DIR "."
#endif

using namespace turbperf;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void gate(int idx, bool ok, const std::string& detail) {
    std::printf("criterion %d: %s — %s\n", idx, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

void info(const std::string& line) {
    std::printf("    %s\n", line.c_str());
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

fs::path scratch_dir(const std::string& tag) {
    std::random_device rd;
    fs::path p = fs::temp_directory_path() /
                 ("turbperf-accept-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --------------------------------------------------------------------------
// 1. Region labels against a brute-force two-comparison oracle.

void criterion_region_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.5, 12.0);
    long mismatches = 0;
    long points = 0;
    for (int s = 0; s < 100; ++s) {
        TurbineSpec spec;
        spec.cut_in = u(rng);
        spec.rated_speed = spec.cut_in + u(rng);
        spec.cut_out = spec.rated_speed + u(rng);
        spec.rated_power = u(rng);
        for (int k = 0; k <= 4000; ++k) {
            const double v = 0.01 * static_cast<double>(k);
            const int oracle = (v < spec.cut_in || v > spec.cut_out) ? 1 : 0;
            mismatches += (is_fault(v, spec) != oracle) ? 1 : 0;
            ++points;
        }
    }
    const double dt = seconds_since(t0);
    gate(1, mismatches == 0 && dt < 1.0,
         fmt(points) + " grid points x 100 specs, " + fmt(mismatches) +
             " mismatches, " + fmt(dt) + " s (< 1 s)");
}

// --------------------------------------------------------------------------
// 2. Central-difference gradient checks for all five architectures.

struct GradStats {
    double worst_rel = 0.0;
    long checked = 0;
};

Window random_window(const NetModel& model, std::uint64_t seed, double label) {
    Rng rng(seed);
    Window w;
    w.steps.resize(model.input_rows(), model.input_cols());
    for (long r = 0; r < w.steps.rows(); ++r)
        for (long c = 0; c < w.steps.cols(); ++c) w.steps(r, c) = rng.gaussian() * 0.5;
    w.label = label;
    return w;
}

void grad_check(NetModel& model, const std::vector<Window>& batch, NetPhase phase,
                GradStats& stats) {
    const auto [loss, grads] = loss_and_gradients(model, batch, phase);
    (void)loss;
    const double h = 1e-5;
    auto probe = [&](double& p, double analytic) {
        const double saved = p;
        p = saved + h;
        const double lp = loss_and_gradients(model, batch, phase).first;
        p = saved - h;
        const double lm = loss_and_gradients(model, batch, phase).first;
        p = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double scale = std::max(1e-6, std::abs(numeric) + std::abs(analytic));
        stats.worst_rel = std::max(stats.worst_rel, std::abs(numeric - analytic) / scale);
        ++stats.checked;
    };
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        Layer& ly = model.layers[li];
        for (long r = 0; r < ly.w.rows(); ++r)
            for (long c = 0; c < ly.w.cols(); ++c) probe(ly.w(r, c), grads.layers[li].w(r, c));
        for (long r = 0; r < ly.r.rows(); ++r)
            for (long c = 0; c < ly.r.cols(); ++c) probe(ly.r(r, c), grads.layers[li].r(r, c));
        for (long i = 0; i < ly.b.size(); ++i) probe(ly.b(i), grads.layers[li].b(i));
    }
}

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    GradStats stats;

    {
        NetModel m = build_arch(ArchKind::Feedforward, 4, ArchOverrides{.hidden = 5, .hidden2 = 3});
        std::vector<Window> ws = {random_window(m, 1, 0.0), random_window(m, 2, 1.0),
                                  random_window(m, 3, 1.0)};
        grad_check(m, ws, NetPhase::Classify, stats);
    }
    {
        NetModel m = build_arch(ArchKind::Recurrent, 3, ArchOverrides{.window = 5, .hidden = 4});
        std::vector<Window> ws = {random_window(m, 4, 1.0), random_window(m, 5, 0.0),
                                  random_window(m, 6, 1.0)};
        grad_check(m, ws, NetPhase::Classify, stats);
    }
    {
        NetModel m = build_arch(ArchKind::Convolutional, 3,
                                ArchOverrides{.window = 5, .filters = 4, .kernel_width = 2});
        std::vector<Window> ws = {random_window(m, 7, 0.0), random_window(m, 8, 1.0),
                                  random_window(m, 9, 0.0)};
        grad_check(m, ws, NetPhase::Classify, stats);
    }
    {
        NetModel m = build_arch(ArchKind::SparseAutoencoder, 4, ArchOverrides{.hidden = 3});
        std::vector<Window> ws = {random_window(m, 10, 0.0), random_window(m, 11, 1.0),
                                  random_window(m, 12, 1.0)};
        grad_check(m, ws, NetPhase::Classify, stats);
        grad_check(m, ws, NetPhase::Reconstruct, stats); // KL sparsity term included
    }
    {
        NetModel m = build_arch(ArchKind::NarTimeSeries, kFeatureCount,
                                ArchOverrides{.window = 6, .hidden = 4});
        std::vector<Window> ws = {random_window(m, 13, 1.0), random_window(m, 14, 0.0),
                                  random_window(m, 15, 1.0)};
        grad_check(m, ws, NetPhase::Classify, stats);
    }

    const double dt = seconds_since(t0);
    gate(2, stats.worst_rel < 1e-4 && dt < 30.0,
         "5 architectures, " + fmt(stats.checked) + " coordinates, worst relative error " +
             fmt(stats.worst_rel) + " (< 1e-4), " + fmt(dt) + " s (< 30 s)");
}

// --------------------------------------------------------------------------
// 3. Regressor capacity: noiseless interpolation and noisy generalization.

struct SvrArtifacts {
    // Converged models plus their training data, consumed by the KKT gate.
    struct Entry {
        SvrModel model;
        SvrTrainSummary summary;
        Eigen::MatrixXd x;
        Eigen::VectorXd y;
    };
    std::vector<Entry> entries;
};

void criterion_svr_capacity(SvrArtifacts& artifacts) {
    const auto t0 = std::chrono::steady_clock::now();
    const TurbineSpec spec;

    // (a) 50 noiseless samples of the parametric curve, z-scored speeds.
    Eigen::MatrixXd xa = Eigen::MatrixXd::Zero(50, kFeatureCount);
    Eigen::VectorXd ya(50);
    {
        Eigen::VectorXd v(50);
        for (int i = 0; i < 50; ++i) {
            v(i) = 30.0 * static_cast<double>(i) / 49.0;
            ya(i) = ideal_power(v(i), spec) / spec.rated_power; // normalized
        }
        const double mean = v.mean();
        const double stddev = std::sqrt((v.array() - mean).square().mean());
        xa.col(0) = (v.array() - mean) / stddev;
    }
    // The kernel scale sits near the z-scored grid spacing (~0.07) so that
    // neighboring kernels decouple and the cut-out jump is representable
    // within the C = 10 box.
    SvrHyper ha;
    ha.box_c = 10.0;
    ha.epsilon = 0.01;
    ha.kernel_scale = 0.1;
    SvrTrainSummary sa;
    const SvrModel ma = train_svr(xa, ya, NormalizationStats{}, ha, 1, &sa);
    const double train_mse = mse(predict_svr_batch(ma, xa), ya);
    artifacts.entries.push_back({ma, sa, xa, ya});

    // (b) 5,000 synthetic met records; the target is the normalized power
    // curve plus Gaussian noise of exactly sigma = 0.05 on that scale, so the
    // irreducible test error is sigma^2 = 0.0025.
    const auto recs = synth_dataset(spec, 5000, 0.0, 0.0, 7);
    const LabeledDataset ds =
        build_labeled_dataset(recs, spec, SplitFractions{}, SplitMode::Random, 42);
    Eigen::VectorXd noisy = ds.power_target;
    {
        Rng noise(99);
        for (long i = 0; i < noisy.size(); ++i) noisy(i) += noise.gaussian(0.0, 0.05);
    }
    const auto train_rows = ds.rows_with_tag(SplitTag::Train);
    const auto test_rows = ds.rows_with_tag(SplitTag::Test);
    Eigen::MatrixXd xb(static_cast<long>(train_rows.size()), kFeatureCount);
    Eigen::VectorXd yb(static_cast<long>(train_rows.size()));
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
        xb.row(static_cast<long>(i)) = ds.features.row(train_rows[i]);
        yb(static_cast<long>(i)) = noisy(train_rows[i]);
    }
    SvrHyper hb;
    hb.epsilon = auto_epsilon(yb);
    SvrTrainSummary sb;
    const SvrModel mb = train_svr(xb, yb, ds.stats, hb, 2, &sb);
    Eigen::MatrixXd xt(static_cast<long>(test_rows.size()), kFeatureCount);
    Eigen::VectorXd yt(static_cast<long>(test_rows.size()));
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
        xt.row(static_cast<long>(i)) = ds.features.row(test_rows[i]);
        yt(static_cast<long>(i)) = noisy(test_rows[i]);
    }
    const double held_out = mse(predict_svr_batch(mb, xt), yt);
    artifacts.entries.push_back({mb, sb, xb, yb});

    const double dt = seconds_since(t0);
    const bool ok = sa.converged && train_mse < 1e-3 && sb.converged &&
                    held_out >= 0.0020 && held_out <= 0.0050 && dt < 60.0;
    gate(3, ok,
         "noiseless train MSE " + fmt(train_mse) + " (< 1e-3); noisy held-out MSE " +
             fmt(held_out) + " (in [0.0020, 0.0050]); " + fmt(dt) + " s (< 60 s)");
}

// --------------------------------------------------------------------------
// 4. KKT / feasibility conditions on every converged training above.

void criterion_kkt(const SvrArtifacts& artifacts) {
    bool ok = true;
    std::string detail;
    long interior_checked = 0;
    for (const auto& e : artifacts.entries) {
        if (!e.summary.converged) {
            ok = false;
            detail = "a training did not converge";
            break;
        }
        const double c = e.model.hyper.box_c;
        const double eps = e.model.hyper.epsilon;
        const double tol = e.model.hyper.tolerance;
        if (e.model.coef.size() > 0 && e.model.coef.cwiseAbs().maxCoeff() > c + 1e-9) {
            ok = false;
            detail = "a dual coefficient exceeds the box bound";
            break;
        }
        for (long j = 0; j < e.model.coef.size(); ++j) {
            if (std::abs(e.model.coef(j)) > c - 1e-6) continue; // at the bound
            const long row = e.summary.sv_rows[j];
            const Eigen::VectorXd xi = e.x.row(row);
            const double residual = e.y(row) - predict_svr(e.model, xi);
            const double want = e.model.coef(j) > 0.0 ? eps : -eps;
            if (std::abs(residual - want) > 10.0 * tol) {
                ok = false;
                detail = "an interior support vector leaves the epsilon tube (|" +
                         fmt(residual) + " - " + fmt(want) + "| > 10 tol)";
                break;
            }
            ++interior_checked;
        }
        if (!ok) break;
    }
    if (ok) {
        detail = fmt(artifacts.entries.size()) + " converged trainings, box bound held, " +
                 fmt(interior_checked) + " interior support vectors on the tube";
    }
    gate(4, ok, detail);
}

// --------------------------------------------------------------------------
// 5. Early stopping: exact stop epoch and best-model restoration.

void criterion_early_stopping() {
    bool ok = true;
    std::string detail;

    // Constructed sequence: 10 improvements then a plateau; patience 6 must
    // stop exactly at epoch 16 with best epoch 10.
    {
        EarlyStopper stop(6);
        long halted_at = 0;
        for (int e = 1; e <= 40 && halted_at == 0; ++e) {
            const double loss = e <= 10 ? 1.0 - 0.05 * e : 0.5;
            if (stop.observe(loss)) halted_at = e;
        }
        if (halted_at != 16 || stop.best_epoch() != 10) {
            ok = false;
            detail = "plateau sequence stopped at " + fmt(halted_at) + " (best " +
                     fmt(stop.best_epoch()) + "), expected 16 (best 10)";
        }
    }
    // Second sequence: a late improvement resets the streak.
    if (ok) {
        EarlyStopper stop(3);
        const double seq[] = {5.0, 4.0, 4.0, 4.0, 3.0, 3.5, 3.5, 3.5};
        long halted_at = 0;
        for (int i = 0; i < 8 && halted_at == 0; ++i)
            if (stop.observe(seq[i])) halted_at = i + 1;
        if (halted_at != 8 || stop.best_epoch() != 5) {
            ok = false;
            detail = "reset sequence stopped at " + fmt(halted_at) + ", expected 8";
        }
    }

    // A real training returns the parameters of the best validation epoch.
    double gap = 0.0;
    if (ok) {
        Rng rng(31);
        LabeledDataset ds;
        const long n = 160;
        ds.features.resize(n, kFeatureCount);
        ds.power_target.resize(n);
        ds.fault_label.resize(n);
        ds.split_tag.resize(n);
        ds.chrono_index.resize(n);
        for (long i = 0; i < n; ++i) {
            for (int c = 0; c < kFeatureCount; ++c) ds.features(i, c) = rng.gaussian();
            ds.power_target(i) = rng.uniform01();
            ds.fault_label[i] = ds.features(i, 0) > 0.0 ? 1 : 0;
            ds.split_tag[i] = i < 112 ? SplitTag::Train : (i < 136 ? SplitTag::Val : SplitTag::Test);
            ds.chrono_index[i] = i;
        }
        TrainConfig cfg;
        cfg.max_epochs = 30;
        cfg.patience = 5;
        const auto [model, trace] = train(build_arch(ArchKind::Feedforward, kFeatureCount), ds, cfg);
        double best = trace.val_loss_per_epoch[0];
        for (double v : trace.val_loss_per_epoch) best = std::min(best, v);
        std::vector<Window> val_ws;
        for (const Window& w : make_windows(ds, model.window, model.kind))
            if (w.tag == SplitTag::Val) val_ws.push_back(w);
        gap = std::abs(evaluate_mse(model, val_ws) - best);
        if (gap > 1e-9) {
            ok = false;
            detail = "returned model misses the best validation loss by " + fmt(gap);
        }
    }

    if (ok) {
        detail = "constructed sequences stop at best_epoch + patience; trained model "
                 "reproduces best validation loss (|gap| = " + fmt(gap) + ")";
    }
    gate(5, ok, detail);
}

// --------------------------------------------------------------------------
// 6. Benchmark-scale surrogate run with the shipped config.

void criterion_surrogate() {
    const fs::path out = scratch_dir("surrogate");
    bool ok = true;
    std::string detail;
    try {
        RunConfig cfg = RunConfig::from_file(std::string(TURBPERF_REPO_DIR) +
                                             "/configs/surrogate.conf");
        cfg.set("out.dir", out.string());
        run_pipeline(cfg, StageSet::all(), 1);
        const ComparisonReport report = load_report(artifact_path(cfg, "report.tp"));

        const EvalRow& svr_row = report.rows.at(0);
        if (svr_row.mse > 0.15) {
            ok = false;
            detail = "regressor held-out MSE " + fmt(svr_row.mse) + " exceeds 0.15";
        }
        double worst_net = 0.0;
        double worst_wall = svr_row.wall_time_seconds;
        for (std::size_t i = 1; i < report.rows.size() && ok; ++i) {
            worst_net = std::max(worst_net, report.rows[i].mse);
            worst_wall = std::max(worst_wall, report.rows[i].wall_time_seconds);
            if (report.rows[i].mse > 0.10) {
                ok = false;
                detail = report.rows[i].name + " test MSE " + fmt(report.rows[i].mse) +
                         " exceeds 0.10";
            }
        }
        if (ok && worst_wall > 120.0) {
            ok = false;
            detail = "slowest training took " + fmt(worst_wall) + " s (> 120 s)";
        }
        if (ok) {
            detail = "29,736-row surrogate: regressor MSE " + fmt(svr_row.mse) +
                     " (<= 0.15), worst net MSE " + fmt(worst_net) +
                     " (<= 0.10), slowest training " + fmt(worst_wall) + " s (<= 120 s)";
            // Reported for reference, not gated: the benchmark ordering.
            info("best row (informational): " + report.rows.at(report.best_index).name);
        }
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("exception: ") + e.what();
    }
    fs::remove_all(out);
    gate(6, ok, detail);
}

// --------------------------------------------------------------------------
// 7. Byte-identical artifacts across identical runs.

void criterion_determinism() {
    const fs::path a = scratch_dir("det-a");
    const fs::path b = scratch_dir("det-b");
    bool ok = true;
    std::string detail;
    try {
        const std::string conf = std::string(TURBPERF_REPO_DIR) + "/configs/quick.conf";
        RunConfig ca = RunConfig::from_file(conf);
        ca.set("out.dir", a.string());
        RunConfig cb = RunConfig::from_file(conf);
        cb.set("out.dir", b.string());
        run_pipeline(ca, StageSet::all(), 2);
        run_pipeline(cb, StageSet::all(), 2);

        std::vector<std::string> names = {"records.csv", "dataset.tp", "svr.model",
                                          "svr.eval",    "report.tp",  "report.txt",
                                          "curve.actual.csv", "curve.predicted.csv"};
        for (ArchKind kind : kAllArchs) {
            names.push_back(std::string("nn.") + arch_name(kind) + ".model");
            names.push_back(std::string("nn.") + arch_name(kind) + ".eval");
        }
        long compared = 0;
        for (const std::string& name : names) {
            if (read_file(a / name) != read_file(b / name)) {
                ok = false;
                detail = name + " differs between identical runs";
                break;
            }
            ++compared;
        }
        if (ok) detail = fmt(compared) + " artifacts byte-identical across two runs";
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("exception: ") + e.what();
    }
    fs::remove_all(a);
    fs::remove_all(b);
    gate(7, ok, detail);
}

// --------------------------------------------------------------------------
// 8. Leave-one-out CV equals a brute-force loop of independent trainings.

void criterion_loo() {
    const long n = 10;
    Rng gen(77);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, kFeatureCount);
    Eigen::VectorXd y(n);
    for (long i = 0; i < n; ++i) {
        const double t = 3.0 * static_cast<double>(i) / static_cast<double>(n - 1);
        x(i, 0) = t;
        y(i) = std::sin(2.0 * t) + gen.gaussian(0.0, 0.1);
    }
    SvrHyper hyper;
    hyper.kernel_scale = 1.0;
    const std::uint64_t seed = 5;

    const CvReport got = kfold_cv(x, y, NormalizationStats{}, n, hyper, seed);

    std::vector<long> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    rng.shuffle(perm);

    double worst = 0.0;
    for (long fold = 0; fold < n; ++fold) {
        const long held = perm[fold];
        Eigen::MatrixXd xtr(n - 1, kFeatureCount);
        Eigen::VectorXd ytr(n - 1);
        long a = 0;
        for (long i = 0; i < n; ++i) {
            if (i == held) continue;
            xtr.row(a) = x.row(i);
            ytr(a) = y(i);
            ++a;
        }
        const SvrModel m = train_svr(xtr, ytr, NormalizationStats{}, hyper, seed + fold);
        const Eigen::VectorXd xh = x.row(held);
        const double err = y(held) - predict_svr(m, xh);
        worst = std::max(worst, std::abs(got.fold_mses[fold] - err * err));
    }
    gate(8, worst <= 1e-9,
         "10 folds vs 10 independent trainings, max |difference| = " + fmt(worst) +
             " (<= 1e-9)");
}

} // namespace

int main() {
    std::printf("acceptance gates\n");
    criterion_region_oracle();
    criterion_gradients();
    SvrArtifacts artifacts;
    criterion_svr_capacity(artifacts);
    criterion_kkt(artifacts);
    criterion_early_stopping();
    criterion_surrogate();
    criterion_determinism();
    criterion_loo();
    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
