// EM fitter for mixtures of elliptical distributions, complete-data and
// missing-data paths, plus the conditional-distribution machinery the
// missing path builds on.
//
// Eliminating the per-sample scale of an elliptical density reduces every
// component likelihood to the same generator-free form
//     f(x) ~ det(Sigma)^(-1/2) * Q(x)^(-m/2),
// with Q the Mahalanobis distance, so the fitter never needs the density
// generator itself; rows with missing cells contribute the same form over
// their observed coordinates with exponent d_obs/2.  Scatter matrices are
// identified up to scale only and are kept at trace m throughout.
#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "femimpute/linalg.hpp"
#include "femimpute/masked_data.hpp"
#include "femimpute/model.hpp"

namespace femimpute {

// Maximizer t* of t^(m/2) g(t) over t in [1e-6, 1e6], found on a log grid
// refined by golden-section search to relative tolerance 1e-8.  Throws
// NoInteriorMaximum when the supremum sits on the boundary.
double profile_argsup(const std::function<double(double)>& g, int m);

struct EStepResult {
  Responsibilities resp;
  double loglik = 0.0;  // unnormalized pseudo log-likelihood
  int ridge_events = 0;
};

// Responsibilities and pseudo log-likelihood on fully observed data.
EStepResult e_step_complete(const Eigen::MatrixXd& data, const MixtureModel& model,
                            const FitConfig& cfg = {});

// One fixed-point pass of the complete-data parameter update (weights,
// means, trace-normalized scatters), iterated to cfg.inner_tol.
MixtureModel m_step_complete(const Eigen::MatrixXd& data, const Responsibilities& resp,
                             const MixtureModel& model, const FitConfig& cfg = {});

// Responsibilities and pseudo log-likelihood from observed coordinates
// only; rows with missing cells use their observed marginal form.
EStepResult responsibilities_observed(const MaskedDataset& data, const MixtureModel& model,
                                      const FitConfig& cfg = {});

// Conditional law of the missing block given the observed one under an
// elliptical component: multivariate Student t with nu = d_obs degrees of
// freedom.
struct StudentParams {
  double nu = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd scale;
};

StudentParams conditional_student_params(const Eigen::VectorXd& row, const IndexPartition& p,
                                         const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                         double ridge = 0.0);

// Conditional mean and covariance of one row under one component,
// embedded back into full m-dimensional coordinates.  Requires d_obs >= 3
// when the row has missing cells (the conditional covariance does not
// exist below that).
ConditionalMoments conditional_moments(const Eigen::VectorXd& row, const IndexPartition& p,
                                       const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                       double ridge = 0.0);

// Missing-data parameter update: conditional moments are computed under
// `model` (the same parameters that produced `resp`), then the fixed
// point is iterated to cfg.inner_tol.
MixtureModel m_step_missing(const MaskedDataset& data, const Responsibilities& resp,
                            const MixtureModel& model, const FitConfig& cfg = {});

struct FitResult {
  MixtureModel model;
  FitReport report;
};

FitResult fit_complete(const Eigen::MatrixXd& data, const MixtureModel& init,
                       const FitConfig& cfg = {});
// Initializes with k-means on the data (seeded).
FitResult fit_complete(const Eigen::MatrixXd& data, int k, std::uint64_t seed,
                       const FitConfig& cfg = {});

struct ImputeResult {
  MixtureModel model;
  FitReport report;
  Eigen::MatrixXd imputed;  // observed cells untouched, missing cells filled
};

ImputeResult fit_impute(const MaskedDataset& data, const MixtureModel& init,
                        const FitConfig& cfg = {});
// Initializes with k-means on mean-filled data (seeded).
ImputeResult fit_impute(const MaskedDataset& data, int k, std::uint64_t seed,
                        const FitConfig& cfg = {});

}  // namespace femimpute
