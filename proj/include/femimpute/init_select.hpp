// Initialization (mean-fill + k-means) and order selection by BIC.
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "femimpute/masked_data.hpp"
#include "femimpute/model.hpp"

namespace femimpute {

// Column-mean completion; throws EmptyColumn when a column has no
// observed cells.  Idempotent on complete data.
Eigen::MatrixXd mean_fill(const MaskedDataset& data);

struct InitPlan {
  int k = 1;
  std::uint64_t seed = 0;
  int restarts = 5;
  int max_iters = 50;
};

// K-means (Lloyd, seeded starts from k distinct rows, best restart by
// within-cluster sum of squares) turned into a mixture init: cluster
// fractions floored at 1/(10N) and renormalized, cluster means, and
// within-cluster covariances ridged to SPD.  The elliptical variant
// additionally trace-normalizes the scatters to m.
MixtureModel kmeans_init(const Eigen::MatrixXd& data, const InitPlan& plan);
GaussianMixtureModel kmeans_init_gaussian(const Eigen::MatrixXd& data, const InitPlan& plan);

// Free parameters of a k-component mixture in dimension m.
int mixture_param_count(int k, int m);

// Bayesian information criterion, -2 * loglik + n_params * ln(n).
double bic(double loglik, int n_params, Eigen::Index n);

enum class FitMethod { fem, gmm };

struct SelectionResult {
  int chosen_k = 0;
  std::vector<int> candidates;
  std::vector<double> bics;  // NaN for candidates whose fit failed
};

// Fits every k in [k_min, k_max] with a seed-derived initialization and
// returns the BIC minimizer (ties toward the smaller k).  Failed
// candidates are skipped; SelectionFailed if all of them fail.
SelectionResult select_k(const MaskedDataset& data, int k_min, int k_max, FitMethod method,
                         std::uint64_t seed, const FitConfig& cfg = {});

}  // namespace femimpute
