// Naive serial reference implementations of the fitter's kernels, kept
// for testing the production (blocked, OpenMP) kernels against an
// independent code path: plain row loops, LU-based inverses and log
// determinants instead of Cholesky solves.
#pragma once

#include <Eigen/Dense>

#include "femimpute/masked_data.hpp"
#include "femimpute/model.hpp"

namespace femimpute {
namespace reference {

// Observed-data responsibilities and pseudo log-likelihood.
Eigen::MatrixXd responsibilities_observed(const MaskedDataset& data, const MixtureModel& model,
                                          double distance_floor, double* loglik = nullptr);

// Conditional mean and covariance of one row's missing block under one
// component (covariance factor Q_obs / (d_obs - 2)).
void conditional_moments(const Eigen::VectorXd& row, const IndexPartition& part,
                         const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                         Eigen::VectorXd* mean, Eigen::MatrixXd* cov);

// One fixed-point pass of the missing-data parameter update (weights,
// means, trace-normalized scatters), conditional moments taken under
// `model`.
MixtureModel fixed_point_pass(const MaskedDataset& data, const Eigen::MatrixXd& resp,
                              const MixtureModel& model, double distance_floor);

}  // namespace reference
}  // namespace femimpute
