#include "femimpute/linalg.hpp"

#include <cmath>
#include <string>

#include "femimpute/errors.hpp"

namespace femimpute {

namespace {

void check_square(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols())
    throw DimensionMismatch("matrix is " + std::to_string(sigma.rows()) + "x" +
                            std::to_string(sigma.cols()) + ", expected square");
}

bool try_llt(const Eigen::MatrixXd& sigma, Eigen::LLT<Eigen::MatrixXd>& llt,
             double& logdet) {
  if (!sigma.allFinite()) return false;
  llt.compute(sigma);
  if (llt.info() != Eigen::Success) return false;
  const auto& L = llt.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const double d = L(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    acc += std::log(d);
  }
  logdet = 2.0 * acc;
  return true;
}

}  // namespace

ScatterView extract_blocks(const Eigen::MatrixXd& sigma, const IndexPartition& p) {
  check_square(sigma);
  const auto take = [&](const std::vector<Eigen::Index>& rows,
                        const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd out(rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c)
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            sigma(rows[r], cols[c]);
    return out;
  };
  for (const auto& idx : {&p.observed, &p.missing})
    for (Eigen::Index j : *idx)
      if (j < 0 || j >= sigma.cols())
        throw DimensionMismatch("partition index " + std::to_string(j) +
                                " outside matrix of size " + std::to_string(sigma.cols()));
  return ScatterView{take(p.observed, p.observed), take(p.observed, p.missing),
                     take(p.missing, p.observed), take(p.missing, p.missing)};
}

double mahalanobis(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                   const Eigen::MatrixXd& sigma_inv) {
  if (x.size() != mu.size() || sigma_inv.rows() != x.size() ||
      sigma_inv.cols() != x.size())
    throw DimensionMismatch("mahalanobis: x has " + std::to_string(x.size()) +
                            " entries, mu " + std::to_string(mu.size()) +
                            ", sigma_inv is " + std::to_string(sigma_inv.rows()) + "x" +
                            std::to_string(sigma_inv.cols()));
  const Eigen::VectorXd d = x - mu;
  const double q = d.dot(sigma_inv * d);
  return q > 0.0 ? q : 0.0;
}

SpdSolveResult spd_solve_and_logdet(const Eigen::MatrixXd& sigma,
                                    const Eigen::MatrixXd& rhs) {
  check_square(sigma);
  if (rhs.rows() != sigma.rows())
    throw DimensionMismatch("rhs has " + std::to_string(rhs.rows()) +
                            " rows, expected " + std::to_string(sigma.rows()));
  Eigen::LLT<Eigen::MatrixXd> llt;
  double logdet = 0.0;
  if (!try_llt(sigma, llt, logdet))
    throw NotPositiveDefinite("matrix of size " + std::to_string(sigma.rows()) +
                              " is not positive definite");
  return SpdSolveResult{llt.solve(rhs), logdet};
}

SpdFactor::SpdFactor(const Eigen::MatrixXd& sigma, double base_ridge) {
  check_square(sigma);
  Eigen::MatrixXd work = sigma;
  if (base_ridge > 0.0)
    work.diagonal().array() += base_ridge;
  if (try_llt(work, llt_, logdet_)) return;

  // One retry with a trace-scaled ridge; a second failure means the
  // component has genuinely collapsed.
  const double tr = sigma.diagonal().sum();
  const double retry = 1e-8 * tr / static_cast<double>(sigma.rows());
  if (std::isfinite(retry) && retry > 0.0) {
    work.diagonal().array() += retry;
    if (try_llt(work, llt_, logdet_)) {
      ridged_ = true;
      return;
    }
  }
  throw NotPositiveDefinite("matrix of size " + std::to_string(sigma.rows()) +
                            " is not positive definite after ridge retry");
}

Eigen::MatrixXd SpdFactor::inverse() const {
  const Eigen::Index n = llt_.matrixLLT().rows();
  return llt_.solve(Eigen::MatrixXd::Identity(n, n));
}

double SpdFactor::quad(const Eigen::VectorXd& d) const {
  const Eigen::VectorXd z = llt_.matrixL().solve(d);
  const double q = z.squaredNorm();
  return q > 0.0 ? q : 0.0;
}

}  // namespace femimpute
