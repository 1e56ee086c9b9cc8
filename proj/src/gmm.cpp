#include "femimpute/gmm.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "femimpute/errors.hpp"
#include "femimpute/init_select.hpp"
#include "femimpute/linalg.hpp"
#include "femimpute/parallel.hpp"

namespace femimpute {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double rel_change(double diff_norm, double base_norm) {
  return diff_norm / (base_norm + 1e-15);
}

double model_change(const GaussianMixtureModel& a, const GaussianMixtureModel& b) {
  double r = rel_change((b.weights - a.weights).norm(), a.weights.norm());
  for (int k = 0; k < a.k(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    r = std::max(r, rel_change((b.means[ku] - a.means[ku]).norm(), a.means[ku].norm()));
    r = std::max(r, rel_change((b.covariances[ku] - a.covariances[ku]).norm(),
                               a.covariances[ku].norm()));
  }
  return r;
}

void check_model_data(const GaussianMixtureModel& model, Eigen::Index n, Eigen::Index m) {
  if (model.dim() != m)
    throw DimensionMismatch("model dimension " + std::to_string(model.dim()) +
                            " does not match data dimension " + std::to_string(m));
  if (n <= model.k())
    throw DimensionMismatch("need more rows than components: N=" + std::to_string(n) +
                            ", K=" + std::to_string(model.k()));
}

void check_min_observed(const MaskedDataset& data) {
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto& part = data.partition(i);
    if (part.d_mis() > 0 && part.d_obs() < 3)
      throw InsufficientObserved("rows with missing cells must keep at least 3 observed "
                                 "cells; row " + std::to_string(i) + " has " +
                                 std::to_string(part.d_obs()));
  }
}

GmmEStep estep(const MaskedDataset& data, const GaussianMixtureModel& model,
               const FitConfig& cfg) {
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  const int K = model.k();

  Eigen::VectorXd logw = model.weights.array().log().matrix();
  std::vector<SpdFactor> full;
  full.reserve(static_cast<std::size_t>(K));
  int prep_ridge = 0;
  for (int k = 0; k < K; ++k) {
    full.emplace_back(model.covariances[static_cast<std::size_t>(k)], cfg.ridge);
    if (full.back().ridged()) ++prep_ridge;
  }

  GmmEStep out;
  out.resp.p.resize(n, K);
  out.cond_mean.resize(static_cast<std::size_t>(n));
  out.cond_cov.resize(static_cast<std::size_t>(n));

  const std::size_t nb = block_count(static_cast<std::size_t>(n));
  std::vector<double> block_ll(nb, 0.0);
  std::vector<int> block_ridge(nb, 0);

  for_each_block(static_cast<std::size_t>(n), cfg.exec,
                 [&](std::size_t b, std::size_t lo, std::size_t hi) {
    Eigen::VectorXd logu(K);
    Eigen::VectorXd row(m);
    for (std::size_t ii = lo; ii < hi; ++ii) {
      const auto i = static_cast<Eigen::Index>(ii);
      const auto& part = data.partition(i);
      row = data.values().row(i).transpose();
      if (part.d_mis() > 0) {
        out.cond_mean[ii].resize(static_cast<std::size_t>(K));
        out.cond_cov[ii].resize(static_cast<std::size_t>(K));
      }
      for (int k = 0; k < K; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (part.d_mis() == 0) {
          const Eigen::VectorXd diff = row - model.means[ku];
          const double q = full[ku].quad(diff);
          logu(k) = logw(k) - 0.5 * (static_cast<double>(m) * kLog2Pi +
                                     full[ku].logdet() + q);
        } else {
          const ScatterView blocks = extract_blocks(model.covariances[ku], part);
          const SpdFactor f(blocks.oo, cfg.ridge);
          if (f.ridged()) ++block_ridge[b];
          Eigen::VectorXd diff(part.d_obs());
          for (Eigen::Index a = 0; a < part.d_obs(); ++a)
            diff(a) = row(part.observed[static_cast<std::size_t>(a)]) -
                      model.means[ku](part.observed[static_cast<std::size_t>(a)]);
          const double q = f.quad(diff);
          const double d_o = static_cast<double>(part.d_obs());
          logu(k) = logw(k) - 0.5 * (d_o * kLog2Pi + f.logdet() + q);

          Eigen::VectorXd mean = blocks.mo * f.solve(diff);
          for (Eigen::Index a = 0; a < part.d_mis(); ++a)
            mean(a) += model.means[ku](part.missing[static_cast<std::size_t>(a)]);
          Eigen::MatrixXd schur = blocks.mm - blocks.mo * f.solve(blocks.om);
          out.cond_mean[ii][ku] = std::move(mean);
          out.cond_cov[ii][ku] = 0.5 * (schur + schur.transpose());
        }
      }
      const double mx = logu.maxCoeff();
      double s = 0.0;
      for (int k = 0; k < K; ++k) {
        const double e = std::exp(logu(k) - mx);
        out.resp.p(i, k) = e;
        s += e;
      }
      for (int k = 0; k < K; ++k) out.resp.p(i, k) /= s;
      block_ll[b] += mx + std::log(s);
    }
  });

  for (std::size_t b = 0; b < nb; ++b) {
    out.loglik += block_ll[b];
    out.ridge_events += block_ridge[b];
  }
  out.ridge_events += prep_ridge;
  return out;
}

// Exact M-step from conditional sufficient statistics, then the
// always-on ridge 1e-6 * trace/m on each covariance.
GaussianMixtureModel mstep(const MaskedDataset& data, const GmmEStep& e,
                           const FitConfig& cfg) {
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  const int K = static_cast<int>(e.resp.p.cols());
  const Eigen::MatrixXd& p = e.resp.p;

  const Eigen::VectorXd colsum = p.colwise().sum();
  for (int k = 0; k < K; ++k)
    if (!(colsum(k) > 0.0) || !std::isfinite(colsum(k)))
      throw NotPositiveDefinite("component " + std::to_string(k) +
                                " lost all responsibility mass");

  GaussianMixtureModel next;
  next.weights = colsum / static_cast<double>(n);
  next.weights /= next.weights.sum();
  next.means.resize(static_cast<std::size_t>(K));
  next.covariances.resize(static_cast<std::size_t>(K));

  const std::size_t nb = block_count(static_cast<std::size_t>(n));

  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);

    // Pass 1: responsibility-weighted mean of completed rows.
    std::vector<Eigen::VectorXd> mu_parts(nb);
    for_each_block(static_cast<std::size_t>(n), cfg.exec,
                   [&](std::size_t b, std::size_t lo, std::size_t hi) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
      Eigen::VectorXd xt(m);
      for (std::size_t ii = lo; ii < hi; ++ii) {
        const auto i = static_cast<Eigen::Index>(ii);
        const auto& part = data.partition(i);
        xt = data.values().row(i).transpose();
        if (part.d_mis() > 0) {
          const auto& mean_k = e.cond_mean[ii][ku];
          for (Eigen::Index a = 0; a < part.d_mis(); ++a)
            xt(part.missing[static_cast<std::size_t>(a)]) = mean_k(a);
        }
        acc.noalias() += p(i, k) * xt;
      }
      mu_parts[b] = std::move(acc);
    });
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
    for (std::size_t b = 0; b < nb; ++b) mu += mu_parts[b];
    mu /= colsum(k);
    if (!mu.allFinite())
      throw NotPositiveDefinite("component " + std::to_string(k) +
                                " produced a non-finite mean");

    // Pass 2: centered scatter plus embedded conditional covariances.
    std::vector<Eigen::MatrixXd> cov_parts(nb);
    for_each_block(static_cast<std::size_t>(n), cfg.exec,
                   [&](std::size_t b, std::size_t lo, std::size_t hi) {
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
      Eigen::VectorXd xt(m), d(m);
      for (std::size_t ii = lo; ii < hi; ++ii) {
        const auto i = static_cast<Eigen::Index>(ii);
        const auto& part = data.partition(i);
        xt = data.values().row(i).transpose();
        if (part.d_mis() > 0) {
          const auto& mean_k = e.cond_mean[ii][ku];
          for (Eigen::Index a = 0; a < part.d_mis(); ++a)
            xt(part.missing[static_cast<std::size_t>(a)]) = mean_k(a);
        }
        d = xt - mu;
        acc.noalias() += p(i, k) * (d * d.transpose());
        if (part.d_mis() > 0) {
          const auto& cov = e.cond_cov[ii][ku];
          for (Eigen::Index a = 0; a < part.d_mis(); ++a)
            for (Eigen::Index c = 0; c < part.d_mis(); ++c)
              acc(part.missing[static_cast<std::size_t>(a)],
                  part.missing[static_cast<std::size_t>(c)]) += p(i, k) * cov(a, c);
        }
      }
      cov_parts[b] = std::move(acc);
    });
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t b = 0; b < nb; ++b) cov += cov_parts[b];
    cov /= colsum(k);
    cov = 0.5 * (cov + cov.transpose());
    if (!cov.allFinite())
      throw NotPositiveDefinite("component " + std::to_string(k) +
                                " produced a non-finite covariance");
    cov.diagonal().array() += 1e-6 * cov.trace() / static_cast<double>(m);

    next.means[ku] = std::move(mu);
    next.covariances[ku] = std::move(cov);
  }
  return next;
}

}  // namespace

GmmEStep gmm_e_step_missing(const MaskedDataset& data, const GaussianMixtureModel& model,
                            const FitConfig& cfg) {
  model.validate();
  check_model_data(model, data.n(), data.m());
  return estep(data, model, cfg);
}

GmmImputeResult gmm_fit_impute(const MaskedDataset& data, const GaussianMixtureModel& init,
                               const FitConfig& cfg) {
  init.validate();
  check_model_data(init, data.n(), data.m());
  check_min_observed(data);

  GaussianMixtureModel model = init;
  FitReport rep;
  GmmEStep e;

  for (int t = 1; t <= cfg.max_outer_iters; ++t) {
    try {
      e = estep(data, model, cfg);
      rep.loglik_trace.push_back(e.loglik);
      rep.ridge_events += e.ridge_events;
      GaussianMixtureModel stepped = mstep(data, e, cfg);
      stepped.validate();
      const double rel = model_change(model, stepped);
      model = std::move(stepped);
      rep.iterations = t;
      if (rel < cfg.outer_tol) {
        rep.converged = true;
        break;
      }
    } catch (const NotPositiveDefinite& ex) {
      throw FitDiverged("fit diverged at outer iteration " + std::to_string(t) + ": " +
                        ex.what());
    }
  }

  rep.resp = e.resp;
  rep.labels = argmax_labels(e.resp.p);
  rep.final_loglik = estep(data, model, cfg).loglik;

  Eigen::MatrixXd imputed = data.values();
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto& part = data.partition(i);
    if (part.d_mis() == 0) continue;
    const auto ii = static_cast<std::size_t>(i);
    for (Eigen::Index a = 0; a < part.d_mis(); ++a) {
      double v = 0.0;
      for (int k = 0; k < model.k(); ++k)
        v += e.resp.p(i, k) * e.cond_mean[ii][static_cast<std::size_t>(k)](a);
      imputed(i, part.missing[static_cast<std::size_t>(a)]) = v;
    }
  }
  return GmmImputeResult{std::move(model), std::move(rep), std::move(imputed)};
}

GmmImputeResult gmm_fit_impute(const MaskedDataset& data, int k, std::uint64_t seed,
                               const FitConfig& cfg) {
  const Eigen::MatrixXd filled = mean_fill(data);
  const GaussianMixtureModel init = kmeans_init_gaussian(filled, InitPlan{k, seed});
  return gmm_fit_impute(data, init, cfg);
}

}  // namespace femimpute
