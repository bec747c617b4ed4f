#include "svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "errors.hpp"
#include "rng.hpp"
#include "textio.hpp"

namespace turbperf {

void SvrHyper::validate() const {
    if (!(box_c > 0.0)) fail(ErrKind::BadConfig, "svr C must be > 0");
    if (!(epsilon >= 0.0)) fail(ErrKind::BadConfig, "svr epsilon must be >= 0");
    if (!(kernel_scale > 0.0)) fail(ErrKind::BadConfig, "svr kernel_scale must be > 0");
    if (!(tolerance > 0.0)) fail(ErrKind::BadConfig, "svr tolerance must be > 0");
    if (max_passes < 1) fail(ErrKind::BadConfig, "svr max_passes must be >= 1");
    if (gram_cache_limit < 0) fail(ErrKind::BadConfig, "svr gram_cache_limit must be >= 0");
}

double auto_epsilon(const Eigen::Ref<const Eigen::VectorXd>& y_train) {
    if (y_train.size() == 0) fail(ErrKind::EmptyInput, "auto_epsilon on empty target");
    const double mean = y_train.mean();
    const double var = (y_train.array() - mean).square().mean();
    return 0.1 * std::sqrt(var);
}

double gaussian_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y, double scale) {
    if (x.size() != y.size()) fail(ErrKind::LengthMismatch, "kernel inputs differ in length");
    if (!(scale > 0.0)) fail(ErrKind::BadConfig, "kernel scale must be > 0");
    const double d2 = (x - y).squaredNorm();
    return std::exp(-d2 / (scale * scale));
}

namespace {

// Kernel rows for the training matrix: dense Gram below the cache limit,
// otherwise rows recomputed on demand through a small slot cache.
class KernelSource {
public:
    KernelSource(const Eigen::Ref<const Eigen::MatrixXd>& x, double scale, long dense_limit)
        : x_(x), inv_sq_scale_(1.0 / (scale * scale)), n_(x.rows()) {
        sqnorm_ = x_.rowwise().squaredNorm();
        dense_ = n_ <= dense_limit;
        if (dense_) {
            gram_.noalias() = x_ * x_.transpose();
            for (long i = 0; i < n_; ++i) {
                for (long j = 0; j < n_; ++j) {
                    gram_(i, j) = std::exp(
                        (2.0 * gram_(i, j) - sqnorm_(i) - sqnorm_(j)) * inv_sq_scale_);
                }
            }
        } else {
            const long budget = (128L << 20) / (8L * std::max(1L, n_));
            slots_ = static_cast<long>(std::clamp(budget, 2L, 1024L));
            cache_.resize(slots_);
            owner_.assign(slots_, -1);
        }
    }

    // View of kernel row i. Valid only until the next row() call: the slot
    // cache may reuse the storage. Callers keeping two rows alive copy them.
    Eigen::Ref<const Eigen::VectorXd> row(long i) {
        if (dense_) return gram_.col(i); // symmetric, and columns are contiguous
        auto it = lookup_.find(i);
        if (it != lookup_.end()) return cache_[it->second];
        const long slot = next_slot_;
        next_slot_ = (next_slot_ + 1) % slots_;
        if (owner_[slot] >= 0) lookup_.erase(owner_[slot]);
        owner_[slot] = i;
        lookup_[i] = slot;
        Eigen::VectorXd& out = cache_[slot];
        out.noalias() = x_ * x_.row(i).transpose();
        out = ((2.0 * out.array() - sqnorm_.array() - sqnorm_(i)) * inv_sq_scale_).exp();
        return out;
    }

private:
    Eigen::MatrixXd x_;
    double inv_sq_scale_;
    long n_;
    Eigen::VectorXd sqnorm_;
    bool dense_ = false;
    Eigen::MatrixXd gram_;
    long slots_ = 0;
    long next_slot_ = 0;
    std::vector<Eigen::VectorXd> cache_;
    std::vector<long> owner_;
    std::unordered_map<long, long> lookup_;
};

struct BoundScan {
    double b_lo = -std::numeric_limits<double>::infinity();
    double b_hi = std::numeric_limits<double>::infinity();
    long i_lo = -1;
    long i_hi = -1;
};

// Feasible-interval bounds on the bias implied by each coefficient's state.
BoundScan scan_bounds(const Eigen::VectorXd& beta, const Eigen::VectorXd& f,
                      const Eigen::VectorXd& y, double c, double eps) {
    BoundScan s;
    const long n = beta.size();
    for (long i = 0; i < n; ++i) {
        const double r = y(i) - f(i);
        if (beta(i) < c) { // can increase
            const double lo = r - (beta(i) >= 0.0 ? eps : -eps);
            if (lo > s.b_lo) {
                s.b_lo = lo;
                s.i_lo = i;
            }
        }
        if (beta(i) > -c) { // can decrease
            const double hi = r - (beta(i) > 0.0 ? eps : -eps);
            if (hi < s.b_hi) {
                s.b_hi = hi;
                s.i_hi = i;
            }
        }
    }
    return s;
}

// Exact line minimizer for the pair direction (+e_i, -e_j). The 1-D objective
// is convex piecewise-quadratic with kinks where either coefficient crosses
// zero; its derivative is monotone, so we walk the pieces for the first
// nonnegative point.
double pair_step(double beta_i, double beta_j, double g, double eta, double eps,
                 double delta_max) {
    double kinks[2];
    int n_kinks = 0;
    if (beta_i < 0.0 && -beta_i < delta_max) kinks[n_kinks++] = -beta_i;
    if (beta_j > 0.0 && beta_j < delta_max) kinks[n_kinks++] = beta_j;
    if (n_kinks == 2 && kinks[0] > kinks[1]) std::swap(kinks[0], kinks[1]);

    double start = 0.0;
    for (int p = 0; p <= n_kinks; ++p) {
        const double end = p < n_kinks ? kinks[p] : delta_max;
        const double sign_i = beta_i + start >= 0.0 ? 1.0 : -1.0;
        const double sign_j = beta_j - start > 0.0 ? 1.0 : -1.0;
        const double d_start = g + eta * start + eps * (sign_i - sign_j);
        if (d_start >= 0.0) return start;
        if (eta > 0.0) {
            const double root = -(g + eps * (sign_i - sign_j)) / eta;
            if (root < end) return std::min(root, delta_max);
        }
        start = end;
    }
    return delta_max;
}

void snap(double& b, double c) {
    const double tiny = 1e-12 * std::max(1.0, c);
    if (std::abs(b) < tiny) {
        b = 0.0;
    } else if (std::abs(b - c) < tiny) {
        b = c;
    } else if (std::abs(b + c) < tiny) {
        b = -c;
    }
}

} // namespace

SvrModel train_svr(const Eigen::Ref<const Eigen::MatrixXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y,
                   const NormalizationStats& stats, SvrHyper hyper,
                   std::uint64_t seed, SvrTrainSummary* summary) {
    hyper.validate();
    const long n = x.rows();
    if (n < 2) fail(ErrKind::InsufficientData, "svr training needs at least 2 rows");
    if (y.size() != n) fail(ErrKind::LengthMismatch, "targets do not match feature rows");

    const double c = hyper.box_c;
    const double eps = hyper.epsilon;
    const double tol = hyper.tolerance;

    KernelSource kernel(x, hyper.kernel_scale, hyper.gram_cache_limit);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n); // f = K beta
    Rng rng(seed);

    SvrTrainSummary local;
    SvrTrainSummary& sum = summary ? *summary : local;
    sum = SvrTrainSummary{};

    const long max_steps = hyper.max_passes * n;
    long steps = 0;
    BoundScan bounds;
    while (true) {
        bounds = scan_bounds(beta, f, y, c, eps);
        if (bounds.b_lo - bounds.b_hi < tol) {
            sum.converged = true;
            break;
        }
        if (steps >= max_steps) break;

        const long i = bounds.i_lo;
        // Seeded random partner among indices forming a violating pair with i;
        // reservoir sampling keeps the scan single-pass.
        long j = -1;
        long seen = 0;
        for (long m = 0; m < n; ++m) {
            if (m == i || !(beta(m) > -c)) continue;
            const double hi = y(m) - f(m) - (beta(m) > 0.0 ? eps : -eps);
            if (bounds.b_lo - hi < tol) continue;
            ++seen;
            if (rng.below(static_cast<std::uint64_t>(seen)) == 0) j = m;
        }
        if (j < 0) j = bounds.i_hi;
        if (j < 0 || j == i) break;

        const Eigen::VectorXd ki = kernel.row(i); // copies: both rows stay alive
        const Eigen::VectorXd kj = kernel.row(j);
        const double eta = ki(i) + kj(j) - 2.0 * ki(j);
        const double g = (f(i) - y(i)) - (f(j) - y(j));
        const double delta_max = std::min(c - beta(i), beta(j) + c);
        const double delta = pair_step(beta(i), beta(j), g, std::max(eta, 0.0), eps, delta_max);
        if (!(delta > 0.0)) break;

        beta(i) += delta;
        beta(j) -= delta;
        snap(beta(i), c);
        snap(beta(j), c);
        f += delta * (ki - kj);
        ++steps;
    }

    sum.updates = steps;
    sum.passes = (steps + n - 1) / n;
    sum.final_violation = bounds.b_lo - bounds.b_hi;

    SvrModel model;
    model.hyper = hyper;
    model.stats = stats;
    model.bias = 0.5 * (bounds.b_lo + bounds.b_hi);

    for (long i = 0; i < n; ++i) {
        if (std::abs(beta(i)) > 1e-12) sum.sv_rows.push_back(i);
    }
    const long m = static_cast<long>(sum.sv_rows.size());
    model.support_vectors.resize(m, x.cols());
    model.coef.resize(m);
    for (long k = 0; k < m; ++k) {
        model.support_vectors.row(k) = x.row(sum.sv_rows[k]);
        model.coef(k) = beta(sum.sv_rows[k]);
    }

    sum.dual_objective = 0.5 * beta.dot(f) - y.dot(beta) + eps * beta.lpNorm<1>();
    return model;
}

SvrModel train_svr(const LabeledDataset& ds, SvrHyper hyper, std::uint64_t seed,
                   SvrTrainSummary* summary) {
    const std::vector<long> rows = ds.rows_with_tag(SplitTag::Train);
    const long n = static_cast<long>(rows.size());
    if (n < 2) fail(ErrKind::InsufficientData, "train split has fewer than 2 rows");
    Eigen::MatrixXd x(n, ds.features.cols());
    Eigen::VectorXd y(n);
    for (long k = 0; k < n; ++k) {
        x.row(k) = ds.features.row(rows[k]);
        y(k) = ds.power_target(rows[k]);
    }
    return train_svr(x, y, ds.stats, hyper, seed, summary);
}

double predict_svr(const SvrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    double acc = model.bias;
    for (long k = 0; k < model.coef.size(); ++k) {
        acc += model.coef(k) *
               gaussian_kernel(model.support_vectors.row(k).transpose(), x,
                               model.hyper.kernel_scale);
    }
    return acc;
}

Eigen::VectorXd predict_svr_batch(const SvrModel& model,
                            const Eigen::Ref<const Eigen::MatrixXd>& x) {
    const long n = x.rows();
    Eigen::VectorXd out(n);
    if (model.coef.size() == 0) {
        out.setConstant(model.bias);
        return out;
    }
    const Eigen::VectorXd sv_sq = model.support_vectors.rowwise().squaredNorm();
    const double inv_sq_scale =
        1.0 / (model.hyper.kernel_scale * model.hyper.kernel_scale);
    for (long i = 0; i < n; ++i) {
        Eigen::VectorXd dots = model.support_vectors * x.row(i).transpose();
        const double xsq = x.row(i).squaredNorm();
        const Eigen::ArrayXd k =
            ((2.0 * dots.array() - sv_sq.array() - xsq) * inv_sq_scale).exp();
        out(i) = model.bias + (k * model.coef.array()).sum();
    }
    return out;
}

CvReport kfold_cv(const Eigen::Ref<const Eigen::MatrixXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& y,
                  const NormalizationStats& stats, long k, SvrHyper hyper,
                  std::uint64_t seed) {
    const long n = x.rows();
    if (k < 2) fail(ErrKind::BadConfig, "k must be >= 2");
    if (n < k) fail(ErrKind::TooFewSamples, "need at least k rows for k-fold CV");

    std::vector<long> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    rng.shuffle(perm);

    // Fold f takes perm chunk [f*base + min(f, rem), ...); first `rem` folds
    // hold one extra row.
    const long base = n / k;
    const long rem = n % k;

    CvReport report;
    report.fold_mses.reserve(k);
    long begin = 0;
    for (long fold = 0; fold < k; ++fold) {
        const long size = base + (fold < rem ? 1 : 0);
        std::vector<char> held(n, 0);
        for (long t = begin; t < begin + size; ++t) held[perm[t]] = 1;
        begin += size;

        Eigen::MatrixXd xtr(n - size, x.cols());
        Eigen::VectorXd ytr(n - size);
        Eigen::MatrixXd xte(size, x.cols());
        Eigen::VectorXd yte(size);
        long a = 0;
        long b = 0;
        for (long i = 0; i < n; ++i) { // ascending original order
            if (held[i]) {
                xte.row(b) = x.row(i);
                yte(b) = y(i);
                ++b;
            } else {
                xtr.row(a) = x.row(i);
                ytr(a) = y(i);
                ++a;
            }
        }

        const SvrModel model = train_svr(xtr, ytr, stats, hyper, seed + fold);
        const Eigen::VectorXd pred = predict_svr_batch(model, xte);
        report.fold_mses.push_back((pred - yte).squaredNorm() / static_cast<double>(size));
    }

    const double mean =
        std::accumulate(report.fold_mses.begin(), report.fold_mses.end(), 0.0) /
        static_cast<double>(k);
    double var = 0.0;
    for (double m : report.fold_mses) var += (m - mean) * (m - mean);
    report.mean_mse = mean;
    report.std_mse = std::sqrt(var / static_cast<double>(k));
    return report;
}

CvReport kfold_cv(const LabeledDataset& ds, long k, SvrHyper hyper, std::uint64_t seed) {
    return kfold_cv(ds.features, ds.power_target, ds.stats, k, hyper, seed);
}

// ---------------------------------------------------------------------------
// persistence

namespace {

std::string join_row(const Eigen::Ref<const Eigen::VectorXd>& v) {
    std::string out;
    for (long i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v(i));
    }
    return out;
}

} // namespace

std::string render_svr(const SvrModel& model) {
    std::string out;
    out += "turbperf-svr v1\n";
    out += "c = " + format_double(model.hyper.box_c) + "\n";
    out += "epsilon = " + format_double(model.hyper.epsilon) + "\n";
    out += "kernel_scale = " + format_double(model.hyper.kernel_scale) + "\n";
    out += "tolerance = " + format_double(model.hyper.tolerance) + "\n";
    out += "max_passes = " + std::to_string(model.hyper.max_passes) + "\n";
    out += "gram_cache_limit = " + std::to_string(model.hyper.gram_cache_limit) + "\n";
    out += "stat.mean = " + join_row(model.stats.mean) + "\n";
    out += "stat.stddev = " + join_row(model.stats.stddev) + "\n";
    out += "stat.power_min = " + format_double(model.stats.power_min) + "\n";
    out += "stat.power_max = " + format_double(model.stats.power_max) + "\n";
    out += "bias = " + format_double(model.bias) + "\n";
    out += "n_sv = " + std::to_string(model.coef.size()) + "\n";
    for (long k = 0; k < model.coef.size(); ++k) {
        out += format_double(model.coef(k));
        for (long f = 0; f < model.support_vectors.cols(); ++f) {
            out += ",";
            out += format_double(model.support_vectors(k, f));
        }
        out += "\n";
    }
    return out;
}

SvrModel parse_svr(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "turbperf-svr v1") {
        fail(ErrKind::ParseError, "not a turbperf SVR model file");
    }

    SvrModel model;
    long n_sv = -1;
    while (n_sv < 0 && std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrKind::ParseError, "bad model header line: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "c") {
            model.hyper.box_c = parse_double(value).value_or(-1.0);
        } else if (key == "epsilon") {
            model.hyper.epsilon = parse_double(value).value_or(-1.0);
        } else if (key == "kernel_scale") {
            model.hyper.kernel_scale = parse_double(value).value_or(-1.0);
        } else if (key == "tolerance") {
            model.hyper.tolerance = parse_double(value).value_or(-1.0);
        } else if (key == "max_passes") {
            model.hyper.max_passes = parse_int(value).value_or(-1);
        } else if (key == "gram_cache_limit") {
            model.hyper.gram_cache_limit = parse_int(value).value_or(-1);
        } else if (key == "stat.mean") {
            const auto parts = split(value, ',');
            if (parts.size() != kFeatureCount) fail(ErrKind::ParseError, "bad stat.mean");
            for (int f = 0; f < kFeatureCount; ++f) {
                model.stats.mean(f) = parse_double(parts[f]).value_or(0.0);
            }
        } else if (key == "stat.stddev") {
            const auto parts = split(value, ',');
            if (parts.size() != kFeatureCount) fail(ErrKind::ParseError, "bad stat.stddev");
            for (int f = 0; f < kFeatureCount; ++f) {
                model.stats.stddev(f) = parse_double(parts[f]).value_or(1.0);
            }
        } else if (key == "stat.power_min") {
            model.stats.power_min = parse_double(value).value_or(0.0);
        } else if (key == "stat.power_max") {
            model.stats.power_max = parse_double(value).value_or(1.0);
        } else if (key == "bias") {
            model.bias = parse_double(value).value_or(0.0);
        } else if (key == "n_sv") {
            n_sv = parse_int(value).value_or(-1);
        } else {
            fail(ErrKind::ParseError, "unknown model key \"" + key + "\"");
        }
    }
    if (n_sv < 0) fail(ErrKind::ParseError, "model file is missing n_sv");
    model.hyper.validate();

    model.coef.resize(n_sv);
    model.support_vectors.resize(n_sv, kFeatureCount);
    for (long k = 0; k < n_sv; ++k) {
        if (!std::getline(in, line)) fail(ErrKind::ParseError, "truncated support vector block");
        const auto parts = split(trim(line), ',');
        if (static_cast<long>(parts.size()) != kFeatureCount + 1) {
            fail(ErrKind::ParseError, "bad support vector row " + std::to_string(k));
        }
        const auto coef = parse_double(parts[0]);
        if (!coef) fail(ErrKind::ParseError, "bad coefficient in row " + std::to_string(k));
        model.coef(k) = *coef;
        for (int f = 0; f < kFeatureCount; ++f) {
            const auto v = parse_double(parts[f + 1]);
            if (!v) fail(ErrKind::ParseError, "bad support vector value in row " + std::to_string(k));
            model.support_vectors(k, f) = *v;
        }
    }
    return model;
}

void save_svr(const SvrModel& model, const std::string& path) {
    write_file_atomic(path, render_svr(model));
}

SvrModel load_svr(const std::string& path) {
    return parse_svr(read_file(path));
}

} // namespace turbperf
