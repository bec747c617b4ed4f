#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dataio.hpp"

namespace turbperf {

// Gaussian-kernel epsilon-insensitive SVR trained by sequential pairwise
// coordinate descent on the combined dual: minimize over beta = alpha - alpha*
//   W(beta) = 1/2 beta' K beta - y' beta + epsilon * |beta|_1
// subject to sum(beta) = 0 and |beta_i| <= C.

struct SvrHyper {
    double box_c = 1.0;
    double epsilon = 0.1;       // resolved value; see auto_epsilon()
    double kernel_scale = 3.0;  // "medium" preset: sqrt(feature count)
    double tolerance = 1e-3;
    long max_passes = 10000;    // one pass = up to n pair updates
    long gram_cache_limit = 8192; // dense Gram kept when n <= limit

    void validate() const;
};

// Common default for the epsilon tube: 0.1 * stddev of the training target.
double auto_epsilon(const Eigen::Ref<const Eigen::VectorXd>& y_train);

struct SvrModel {
    Eigen::MatrixXd support_vectors; // M x 9
    Eigen::VectorXd coef;            // M, alpha - alpha*, |coef| <= C
    double bias = 0.0;
    SvrHyper hyper;
    NormalizationStats stats;
};

struct SvrTrainSummary {
    bool converged = false;
    long passes = 0;
    long updates = 0;
    double final_violation = 0.0; // KKT gap at stop (b_lo - b_hi)
    double dual_objective = 0.0;
    std::vector<long> sv_rows; // training-row index of each support vector
};

// exp(-|x - y|^2 / scale^2); in (0, 1].
double gaussian_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y, double scale);

// Trains on rows of x (n x 9) against targets y. The seed drives the random
// second index of each working pair. Non-convergence within max_passes is
// reported through the summary, not thrown. Throws InsufficientData.
SvrModel train_svr(const Eigen::Ref<const Eigen::MatrixXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y,
                   const NormalizationStats& stats, SvrHyper hyper,
                   std::uint64_t seed, SvrTrainSummary* summary = nullptr);

// Convenience: trains on the Train rows of a labeled dataset.
SvrModel train_svr(const LabeledDataset& ds, SvrHyper hyper, std::uint64_t seed,
                   SvrTrainSummary* summary = nullptr);

double predict_svr(const SvrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd predict_svr_batch(const SvrModel& model,
                                  const Eigen::Ref<const Eigen::MatrixXd>& x);

struct CvReport {
    std::vector<double> fold_mses;
    double mean_mse = 0.0;
    double std_mse = 0.0; // population stddev over folds
};

// Seeded permutation into k folds with sizes differing by at most one; fold i
// is held out once and the remaining rows train with seed + i, so the report
// can be reproduced by an external loop. Throws TooFewSamples.
CvReport kfold_cv(const Eigen::Ref<const Eigen::MatrixXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& y,
                  const NormalizationStats& stats, long k, SvrHyper hyper,
                  std::uint64_t seed);
CvReport kfold_cv(const LabeledDataset& ds, long k, SvrHyper hyper, std::uint64_t seed);

// Versioned plain-text persistence; loading reproduces predictions exactly.
std::string render_svr(const SvrModel& model);
SvrModel parse_svr(const std::string& text);
void save_svr(const SvrModel& model, const std::string& path);
SvrModel load_svr(const std::string& path);

} // namespace turbperf
