#include "femimpute/reference.hpp"

#include <cmath>

#include "femimpute/errors.hpp"

namespace femimpute {
namespace reference {

namespace {

// LU-based inverse and log determinant; independent of the production
// Cholesky path.
void lu_inverse_logdet(const Eigen::MatrixXd& a, Eigen::MatrixXd* inv, double* logdet) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw NotPositiveDefinite("reference: singular matrix");
  *inv = lu.inverse();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    acc += std::log(std::abs(lu.matrixLU()(i, i)));
  *logdet = acc;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& sigma, const std::vector<Eigen::Index>& r,
                          const std::vector<Eigen::Index>& c) {
  Eigen::MatrixXd out(r.size(), c.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < c.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sigma(r[i], c[j]);
  return out;
}

double quad_form(const Eigen::VectorXd& d, const Eigen::MatrixXd& inv) {
  double q = 0.0;
  for (Eigen::Index a = 0; a < d.size(); ++a)
    for (Eigen::Index b = 0; b < d.size(); ++b) q += d(a) * inv(a, b) * d(b);
  return q > 0.0 ? q : 0.0;
}

}  // namespace

Eigen::MatrixXd responsibilities_observed(const MaskedDataset& data, const MixtureModel& model,
                                          double distance_floor, double* loglik) {
  const Eigen::Index n = data.n();
  const int K = model.k();
  Eigen::MatrixXd p(n, K);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& part = data.partition(i);
    Eigen::VectorXd logu(K);
    for (int k = 0; k < K; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const Eigen::MatrixXd soo = submatrix(model.scatters[ku], part.observed, part.observed);
      Eigen::MatrixXd inv;
      double logdet;
      lu_inverse_logdet(soo, &inv, &logdet);
      Eigen::VectorXd diff(part.d_obs());
      for (Eigen::Index a = 0; a < part.d_obs(); ++a)
        diff(a) = data.values()(i, part.observed[static_cast<std::size_t>(a)]) -
                  model.means[ku](part.observed[static_cast<std::size_t>(a)]);
      const double q = std::max(quad_form(diff, inv), distance_floor);
      logu(k) = std::log(model.weights(k)) - 0.5 * logdet -
                0.5 * static_cast<double>(part.d_obs()) * std::log(q);
    }
    const double mx = logu.maxCoeff();
    double s = 0.0;
    for (int k = 0; k < K; ++k) {
      p(i, k) = std::exp(logu(k) - mx);
      s += p(i, k);
    }
    for (int k = 0; k < K; ++k) p(i, k) /= s;
    ll += mx + std::log(s);
  }
  if (loglik) *loglik = ll;
  return p;
}

void conditional_moments(const Eigen::VectorXd& row, const IndexPartition& part,
                         const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                         Eigen::VectorXd* mean, Eigen::MatrixXd* cov) {
  const Eigen::MatrixXd soo = submatrix(sigma, part.observed, part.observed);
  const Eigen::MatrixXd som = submatrix(sigma, part.observed, part.missing);
  const Eigen::MatrixXd smo = submatrix(sigma, part.missing, part.observed);
  const Eigen::MatrixXd smm = submatrix(sigma, part.missing, part.missing);
  Eigen::MatrixXd inv;
  double logdet;
  lu_inverse_logdet(soo, &inv, &logdet);
  Eigen::VectorXd diff(part.d_obs());
  for (Eigen::Index a = 0; a < part.d_obs(); ++a)
    diff(a) = row(part.observed[static_cast<std::size_t>(a)]) -
              mu(part.observed[static_cast<std::size_t>(a)]);
  Eigen::VectorXd mn = smo * inv * diff;
  for (Eigen::Index a = 0; a < part.d_mis(); ++a)
    mn(a) += mu(part.missing[static_cast<std::size_t>(a)]);
  const double q = quad_form(diff, inv);
  const double c = q / (static_cast<double>(part.d_obs()) - 2.0);
  Eigen::MatrixXd schur = smm - smo * inv * som;
  *mean = mn;
  *cov = c * 0.5 * (schur + schur.transpose());
}

MixtureModel fixed_point_pass(const MaskedDataset& data, const Eigen::MatrixXd& resp,
                              const MixtureModel& model, double distance_floor) {
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  const int K = model.k();
  const double md = static_cast<double>(m);

  MixtureModel next;
  next.weights = resp.colwise().sum() / static_cast<double>(n);
  next.weights /= next.weights.sum();

  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    Eigen::MatrixXd inv;
    double logdet;
    lu_inverse_logdet(model.scatters[ku], &inv, &logdet);

    Eigen::VectorXd mu_num = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd sig = Eigen::MatrixXd::Zero(m, m);
    double sw = 0.0, sp = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& part = data.partition(i);
      const double pik = resp(i, k);
      sp += pik;
      Eigen::VectorXd xt = data.values().row(i).transpose();
      Eigen::MatrixXd cov;
      if (part.d_mis() > 0) {
        Eigen::VectorXd mean;
        conditional_moments(xt, part, model.means[ku], model.scatters[ku], &mean, &cov);
        for (Eigen::Index a = 0; a < part.d_mis(); ++a)
          xt(part.missing[static_cast<std::size_t>(a)]) = mean(a);
      }
      const Eigen::VectorXd d = xt - model.means[ku];
      const double w = 1.0 / std::max(quad_form(d, inv), distance_floor);
      mu_num += w * pik * xt;
      sw += w * pik;
      sig += pik * w * (d * d.transpose());
      if (part.d_mis() > 0) {
        double tr = 0.0;
        for (Eigen::Index a = 0; a < part.d_mis(); ++a)
          for (Eigen::Index b = 0; b < part.d_mis(); ++b)
            tr += inv(part.missing[static_cast<std::size_t>(a)],
                      part.missing[static_cast<std::size_t>(b)]) * cov(b, a);
        if (tr > 0.0 && std::isfinite(tr)) {
          for (Eigen::Index a = 0; a < part.d_mis(); ++a)
            for (Eigen::Index b = 0; b < part.d_mis(); ++b)
              sig(part.missing[static_cast<std::size_t>(a)],
                  part.missing[static_cast<std::size_t>(b)]) += pik / tr * cov(a, b);
        }
      }
    }
    next.means.push_back(mu_num / sw);
    Eigen::MatrixXd scatter = (md / sp) * sig;
    scatter = 0.5 * (scatter + scatter.transpose());
    scatter *= md / scatter.trace();
    next.scatters.push_back(scatter);
  }
  return next;
}

}  // namespace reference
}  // namespace femimpute
