// Model containers, fit configuration, and fit reports shared by the
// elliptical-mixture fitter and the Gaussian baseline.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "femimpute/parallel.hpp"

namespace femimpute {

// Mixture of elliptical components.  The overall scale of each scatter
// matrix is a nuisance (it is profiled out of the likelihood), so any
// positive scaling represents the same model; fitted outputs are kept at
// the canonical trace m.  Weights sum to one and stay strictly positive.
struct MixtureModel {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> scatters;

  int k() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  void validate() const;  // throws on any broken invariant
};

// Gaussian mixture; covariances carry their own scale.
struct GaussianMixtureModel {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;

  int k() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  void validate() const;
};

// N x K posterior membership matrix; rows sum to one.
struct Responsibilities {
  Eigen::MatrixXd p;
  void validate() const;
};

struct FitConfig {
  double outer_tol = 1e-5;
  int max_outer_iters = 200;
  double inner_tol = 1e-6;
  int max_inner_iters = 20;
  double ridge = 0.0;             // diagonal ridge before factorizations
  double distance_floor = 1e-12;  // clamp for Mahalanobis distances
  Exec exec = Exec::parallel;
};

struct FitReport {
  int iterations = 0;
  bool converged = false;
  // Log-likelihood of the pre-update model, one entry per outer iteration
  // (for the elliptical fitter this is the unnormalized pseudo
  // log-likelihood; for the Gaussian baseline the observed-data
  // log-likelihood).
  std::vector<double> loglik_trace;
  double final_loglik = 0.0;  // same quantity under the returned model
  std::vector<int> labels;    // argmax responsibilities, ties to the smallest index
  Responsibilities resp;
  int ridge_events = 0;
};

// Conditional moments of one row under one component: the row with
// missing cells replaced by their conditional mean, and the conditional
// covariance embedded at the missing indices (zero elsewhere, and zero
// everywhere for a fully observed row).
struct ConditionalMoments {
  Eigen::VectorXd x_tilde;
  Eigen::MatrixXd sigma_tilde;
};

// Argmax labels with ties resolved toward the smaller index.
std::vector<int> argmax_labels(const Eigen::MatrixXd& p);

// JSON model files.  Elliptical models store their matrices under
// "scatters" with family "fem"; Gaussian ones under "covariances" with
// family "gmm".  Matrices are row-major flat arrays.
void save_model_json(const std::string& path, const MixtureModel& model);
void save_model_json(const std::string& path, const GaussianMixtureModel& model);
MixtureModel load_fem_model(const std::string& path);
GaussianMixtureModel load_gmm_model(const std::string& path);
// Family tag of a model file ("fem" or "gmm").
std::string model_file_family(const std::string& path);

}  // namespace femimpute
