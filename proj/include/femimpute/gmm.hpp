// Gaussian-mixture EM baseline with missing data.  Rows contribute their
// observed marginal Gaussian likelihood; missing blocks are handled
// through the exact conditional sufficient statistics, so the observed
// log-likelihood is monotone over iterations.  Covariance updates carry a
// small always-on ridge (1e-6 * trace/m) for stability.
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "femimpute/masked_data.hpp"
#include "femimpute/model.hpp"

namespace femimpute {

struct GmmEStep {
  Responsibilities resp;
  double loglik = 0.0;  // observed-data Gaussian log-likelihood
  int ridge_events = 0;
  // Conditional moments per row and component for rows with missing
  // cells: mean of the missing block and its conditional covariance
  // (Schur complement); empty entries for complete rows.
  std::vector<std::vector<Eigen::VectorXd>> cond_mean;
  std::vector<std::vector<Eigen::MatrixXd>> cond_cov;
};

GmmEStep gmm_e_step_missing(const MaskedDataset& data, const GaussianMixtureModel& model,
                            const FitConfig& cfg = {});

struct GmmImputeResult {
  GaussianMixtureModel model;
  FitReport report;
  Eigen::MatrixXd imputed;
};

GmmImputeResult gmm_fit_impute(const MaskedDataset& data, const GaussianMixtureModel& init,
                               const FitConfig& cfg = {});
// Initializes with k-means on mean-filled data (seeded).
GmmImputeResult gmm_fit_impute(const MaskedDataset& data, int k, std::uint64_t seed,
                               const FitConfig& cfg = {});

}  // namespace femimpute
