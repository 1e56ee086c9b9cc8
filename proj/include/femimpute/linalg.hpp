// Small dense helpers shared by the fitters: block extraction for a row's
// observed/missing split, Mahalanobis form, and SPD solves with the log
// determinant off the same factorization.
#pragma once

#include <Eigen/Dense>

#include "femimpute/masked_data.hpp"

namespace femimpute {

// Blocks of a covariance under an observed/missing partition:
//   oo = sigma[obs, obs], om = sigma[obs, mis],
//   mo = sigma[mis, obs], mm = sigma[mis, mis].
struct ScatterView {
  Eigen::MatrixXd oo, om, mo, mm;
};

ScatterView extract_blocks(const Eigen::MatrixXd& sigma, const IndexPartition& p);

// (x - mu)^T sigma_inv (x - mu), clamped at zero.
double mahalanobis(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                   const Eigen::MatrixXd& sigma_inv);

struct SpdSolveResult {
  Eigen::MatrixXd solution;
  double logdet;
};

// Cholesky solve of sigma * X = rhs; throws NotPositiveDefinite.
SpdSolveResult spd_solve_and_logdet(const Eigen::MatrixXd& sigma,
                                    const Eigen::MatrixXd& rhs);

// Cholesky factor with a single ridge retry (ridge = 1e-8 * trace/m added
// to the diagonal).  Tracks whether the retry fired so fit reports can
// count ridge events.  Throws NotPositiveDefinite when the retry fails.
class SpdFactor {
 public:
  SpdFactor(const Eigen::MatrixXd& sigma, double base_ridge);

  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }
  double logdet() const { return logdet_; }
  bool ridged() const { return ridged_; }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }
  Eigen::MatrixXd inverse() const;
  // Quadratic form d^T sigma^{-1} d, clamped at zero.
  double quad(const Eigen::VectorXd& d) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double logdet_ = 0.0;
  bool ridged_ = false;
};

}  // namespace femimpute
