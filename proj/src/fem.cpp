#include "femimpute/fem.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "femimpute/errors.hpp"
#include "femimpute/init_select.hpp"
#include "femimpute/parallel.hpp"

namespace femimpute {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double rel_change(double diff_norm, double base_norm) {
  return diff_norm / (base_norm + 1e-15);
}

double model_change(const MixtureModel& a, const MixtureModel& b) {
  double r = rel_change((b.weights - a.weights).norm(), a.weights.norm());
  for (int k = 0; k < a.k(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    r = std::max(r, rel_change((b.means[ku] - a.means[ku]).norm(), a.means[ku].norm()));
    r = std::max(r, rel_change((b.scatters[ku] - a.scatters[ku]).norm(),
                               a.scatters[ku].norm()));
  }
  return r;
}

void check_model_data(const MixtureModel& model, Eigen::Index n, Eigen::Index m) {
  if (model.dim() != m)
    throw DimensionMismatch("model dimension " + std::to_string(model.dim()) +
                            " does not match data dimension " + std::to_string(m));
  if (n <= model.k())
    throw DimensionMismatch("need more rows than components: N=" + std::to_string(n) +
                            ", K=" + std::to_string(model.k()));
}

void check_resp_shape(const Responsibilities& resp, Eigen::Index n, int k) {
  if (resp.p.rows() != n || resp.p.cols() != k)
    throw DimensionMismatch("responsibilities are " + std::to_string(resp.p.rows()) + "x" +
                            std::to_string(resp.p.cols()) + ", expected " +
                            std::to_string(n) + "x" + std::to_string(k));
}

// Rows with missing cells need d_obs >= 3 for the conditional covariance.
void check_min_observed(const MaskedDataset& data) {
  std::string offending;
  int count = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto& part = data.partition(i);
    if (part.d_mis() > 0 && part.d_obs() < 3) {
      if (count < 10) {
        if (count) offending += ", ";
        offending += std::to_string(i);
      }
      ++count;
    }
  }
  if (count > 0)
    throw InsufficientObserved("rows with missing cells must keep at least 3 observed "
                               "cells; offending rows: " + offending +
                               (count > 10 ? ", ..." : "") + " (" + std::to_string(count) +
                               " total)");
}

// Conditional quantities of one row under one component, from the
// observed block's Cholesky factor.
struct CondCore {
  double q = 0.0;  // observed Mahalanobis distance, unclamped
  double logdet_oo = 0.0;
  bool ridged = false;
  Eigen::VectorXd mean;   // conditional mean of the missing block
  Eigen::MatrixXd schur;  // Sigma_mm - Sigma_mo Sigma_oo^{-1} Sigma_om
};

CondCore cond_core(const Eigen::VectorXd& row, const IndexPartition& part,
                   const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                   double ridge, bool want_moments) {
  CondCore out;
  const ScatterView blocks = extract_blocks(sigma, part);
  const SpdFactor f(blocks.oo, ridge);
  out.ridged = f.ridged();
  out.logdet_oo = f.logdet();

  Eigen::VectorXd diff(part.d_obs());
  for (Eigen::Index a = 0; a < part.d_obs(); ++a)
    diff(a) = row(part.observed[static_cast<std::size_t>(a)]) -
              mu(part.observed[static_cast<std::size_t>(a)]);
  out.q = f.quad(diff);

  if (want_moments && part.d_mis() > 0) {
    out.mean = blocks.mo * f.solve(diff);
    for (Eigen::Index a = 0; a < part.d_mis(); ++a)
      out.mean(a) += mu(part.missing[static_cast<std::size_t>(a)]);
    Eigen::MatrixXd schur = blocks.mm - blocks.mo * f.solve(blocks.om);
    out.schur = 0.5 * (schur + schur.transpose());
  }
  return out;
}

// Per-row conditional moments under every component, for rows with
// missing cells.
struct RowMoments {
  std::vector<Eigen::VectorXd> mean;  // K entries of length d_mis
  std::vector<Eigen::MatrixXd> cov;   // K entries of d_mis x d_mis
};

struct EStepData {
  Eigen::MatrixXd p;  // N x K
  double loglik = 0.0;
  int ridge_events = 0;
  std::vector<RowMoments> moments;  // indexed by row, filled only on request
};

// Frozen per-component factors of the full scatters, shared by all
// fully observed rows.
struct PreparedModel {
  Eigen::VectorXd logw;
  std::vector<SpdFactor> full;
  int ridge_events = 0;
};

PreparedModel prepare(const MixtureModel& model, const FitConfig& cfg) {
  PreparedModel out;
  out.logw = model.weights.array().log().matrix();
  out.full.reserve(static_cast<std::size_t>(model.k()));
  for (int k = 0; k < model.k(); ++k) {
    out.full.emplace_back(model.scatters[static_cast<std::size_t>(k)], cfg.ridge);
    if (out.full.back().ridged()) ++out.ridge_events;
  }
  return out;
}

// Shared E-step.  Responsibilities come from the generator-free
// observed-data form
//   log u_ik = log pi_k - 0.5 logdet(Sigma_k^oo) - (d_obs/2) log Q_ik^o,
// normalized per row in log space; fully observed rows reuse the full
// factors (d_obs = m).  When want_moments is set, rows with missing
// cells also get conditional means and covariances under each component,
// the covariance carrying the elliptical factor Q^o / (d_obs - 2).
EStepData estep_internal(const MaskedDataset& data, const MixtureModel& model,
                         const FitConfig& cfg, bool want_moments) {
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  const int K = model.k();
  const PreparedModel prep = prepare(model, cfg);

  EStepData out;
  out.p.resize(n, K);
  if (want_moments) out.moments.resize(static_cast<std::size_t>(n));

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
      RowMoments* rm = nullptr;
      if (want_moments && part.d_mis() > 0) {
        rm = &out.moments[ii];
        rm->mean.resize(static_cast<std::size_t>(K));
        rm->cov.resize(static_cast<std::size_t>(K));
      }
      for (int k = 0; k < K; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (part.d_mis() == 0) {
          const Eigen::VectorXd diff = row - model.means[ku];
          const double q = std::max(prep.full[ku].quad(diff), cfg.distance_floor);
          logu(k) = prep.logw(k) - 0.5 * prep.full[ku].logdet() -
                    0.5 * static_cast<double>(m) * std::log(q);
        } else {
          const CondCore cc = cond_core(row, part, model.means[ku], model.scatters[ku],
                                        cfg.ridge, want_moments);
          if (cc.ridged) ++block_ridge[b];
          const double d_o = static_cast<double>(part.d_obs());
          const double q = std::max(cc.q, cfg.distance_floor);
          logu(k) = prep.logw(k) - 0.5 * cc.logdet_oo - 0.5 * d_o * std::log(q);
          if (rm) {
            rm->mean[ku] = cc.mean;
            rm->cov[ku] = (cc.q / (d_o - 2.0)) * cc.schur;
          }
        }
      }
      const double mx = logu.maxCoeff();
      double s = 0.0;
      for (int k = 0; k < K; ++k) {
        const double e = std::exp(logu(k) - mx);
        out.p(i, k) = e;
        s += e;
      }
      for (int k = 0; k < K; ++k) out.p(i, k) /= s;
      block_ll[b] += mx + std::log(s);
    }
  });

  for (std::size_t b = 0; b < nb; ++b) {
    out.loglik += block_ll[b];
    out.ridge_events += block_ridge[b];
  }
  out.ridge_events += prep.ridge_events;
  return out;
}

// Shared M-step.  Per component, iterate the fixed point
//   w_i   = 1 / max(Q(x~_i; mu', Sigma'), floor)
//   mu''  = sum_i w_i p_ik x~_i / sum_i w_i p_ik
//   Sig'' = (m / sum_i p_ik) * sum_i p_ik [ Cov~_i / tr(Sigma'^{-1} Cov~_i)
//                                           + w_i (x~_i - mu')(x~_i - mu')^T ]
// with x~ the row completed by its conditional mean and Cov~ its embedded
// conditional covariance (both zero-contribution for complete rows), then
// renormalize trace(Sigma'') = m.  Both outer products and the weights use
// the pre-update mu'.
MixtureModel mstep_internal(const MaskedDataset& data, const Eigen::MatrixXd& p,
                            const std::vector<RowMoments>& moments,
                            const MixtureModel& prev, const FitConfig& cfg,
                            int& ridge_events) {
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  const int K = static_cast<int>(p.cols());
  const double md = static_cast<double>(m);

  MixtureModel next;
  next.weights.resize(K);
  next.means.resize(static_cast<std::size_t>(K));
  next.scatters.resize(static_cast<std::size_t>(K));

  const Eigen::VectorXd colsum = p.colwise().sum();
  for (int k = 0; k < K; ++k) {
    if (!(colsum(k) > 0.0) || !std::isfinite(colsum(k)))
      throw NotPositiveDefinite("component " + std::to_string(k) +
                                " lost all responsibility mass");
  }
  next.weights = colsum / static_cast<double>(n);
  next.weights /= next.weights.sum();

  struct Partial {
    Eigen::VectorXd mu_num;
    Eigen::MatrixXd sig;
    double sw = 0.0;
  };
  const std::size_t nb = block_count(static_cast<std::size_t>(n));
  std::vector<Partial> partials(nb);

  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    Eigen::VectorXd mu = prev.means[ku];
    Eigen::MatrixXd sig = prev.scatters[ku];

    for (int it = 0; it < cfg.max_inner_iters; ++it) {
      const SpdFactor f(sig, cfg.ridge);
      if (f.ridged()) ++ridge_events;
      const Eigen::MatrixXd inv = f.inverse();

      for_each_block(static_cast<std::size_t>(n), cfg.exec,
                     [&](std::size_t b, std::size_t lo, std::size_t hi) {
        Partial& pp = partials[b];
        pp.mu_num = Eigen::VectorXd::Zero(m);
        pp.sig = Eigen::MatrixXd::Zero(m, m);
        pp.sw = 0.0;
        Eigen::VectorXd xt(m), d(m);
        for (std::size_t ii = lo; ii < hi; ++ii) {
          const auto i = static_cast<Eigen::Index>(ii);
          const double pik = p(i, k);
          const auto& part = data.partition(i);
          xt = data.values().row(i).transpose();
          if (part.d_mis() > 0) {
            const auto& mean_k = moments[ii].mean[ku];
            for (Eigen::Index a = 0; a < part.d_mis(); ++a)
              xt(part.missing[static_cast<std::size_t>(a)]) = mean_k(a);
          }
          d = xt - mu;
          double q = d.dot(inv * d);
          if (!(q > 0.0)) q = 0.0;
          const double w = 1.0 / std::max(q, cfg.distance_floor);
          pp.mu_num.noalias() += (w * pik) * xt;
          pp.sw += w * pik;
          pp.sig.noalias() += (pik * w) * (d * d.transpose());
          if (part.d_mis() > 0) {
            const auto& cov = moments[ii].cov[ku];
            double tr = 0.0;
            for (Eigen::Index a = 0; a < part.d_mis(); ++a)
              for (Eigen::Index c = 0; c < part.d_mis(); ++c)
                tr += inv(part.missing[static_cast<std::size_t>(a)],
                          part.missing[static_cast<std::size_t>(c)]) * cov(c, a);
            if (tr > 0.0 && std::isfinite(tr)) {
              const double scale = pik / tr;
              for (Eigen::Index a = 0; a < part.d_mis(); ++a)
                for (Eigen::Index c = 0; c < part.d_mis(); ++c)
                  pp.sig(part.missing[static_cast<std::size_t>(a)],
                         part.missing[static_cast<std::size_t>(c)]) += scale * cov(a, c);
            }
          }
        }
      });

      Eigen::VectorXd mu_num = Eigen::VectorXd::Zero(m);
      Eigen::MatrixXd sig_acc = Eigen::MatrixXd::Zero(m, m);
      double sw = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        mu_num += partials[b].mu_num;
        sig_acc += partials[b].sig;
        sw += partials[b].sw;
      }
      if (!(sw > 0.0) || !std::isfinite(sw) || !mu_num.allFinite())
        throw NotPositiveDefinite("component " + std::to_string(k) +
                                  " collapsed in the fixed-point update");

      Eigen::VectorXd mu_new = mu_num / sw;
      Eigen::MatrixXd sig_new = (md / colsum(k)) * sig_acc;
      sig_new = 0.5 * (sig_new + sig_new.transpose());
      const double tr = sig_new.trace();
      if (!(tr > 0.0) || !sig_new.allFinite())
        throw NotPositiveDefinite("component " + std::to_string(k) +
                                  " produced a degenerate scatter");
      sig_new *= md / tr;

      const double rel = std::max(rel_change((mu_new - mu).norm(), mu.norm()),
                                  rel_change((sig_new - sig).norm(), sig.norm()));
      mu = std::move(mu_new);
      sig = std::move(sig_new);
      if (rel < cfg.inner_tol) break;
    }
    next.means[ku] = std::move(mu);
    next.scatters[ku] = std::move(sig);
  }
  return next;
}

struct LoopOut {
  MixtureModel model;
  FitReport report;
  EStepData last_e;
};

LoopOut fit_loop(const MaskedDataset& data, const MixtureModel& init, const FitConfig& cfg) {
  init.validate();
  check_model_data(init, data.n(), data.m());
  check_min_observed(data);

  MixtureModel model = init;
  FitReport rep;
  EStepData e;
  const bool want_moments = data.any_missing();

  for (int t = 1; t <= cfg.max_outer_iters; ++t) {
    try {
      e = estep_internal(data, model, cfg, want_moments);
      rep.loglik_trace.push_back(e.loglik);
      rep.ridge_events += e.ridge_events;
      int mstep_ridge = 0;
      MixtureModel stepped = mstep_internal(data, e.p, e.moments, model, cfg, mstep_ridge);
      rep.ridge_events += mstep_ridge;
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

  // Labels, responsibilities, and imputation all come from the last
  // E-step; the returned model's own likelihood is evaluated once more.
  rep.resp.p = e.p;
  rep.labels = argmax_labels(e.p);
  rep.final_loglik = estep_internal(data, model, cfg, false).loglik;
  return LoopOut{std::move(model), std::move(rep), std::move(e)};
}

}  // namespace

double profile_argsup(const std::function<double(double)>& g, int m) {
  if (m <= 0) throw DimensionMismatch("profile_argsup needs m >= 1");
  const double lo = std::log(1e-6);
  const double hi = std::log(1e6);
  const auto phi = [&](double u) {
    const double gv = g(std::exp(u));
    if (!(gv > 0.0) || !std::isfinite(gv)) return kNegInf;
    return 0.5 * static_cast<double>(m) * u + std::log(gv);
  };

  // Coarse scan to bracket the maximum, then golden-section refinement.
  constexpr int kGrid = 512;
  int best = 0;
  double best_val = kNegInf;
  for (int j = 0; j <= kGrid; ++j) {
    const double u = lo + (hi - lo) * static_cast<double>(j) / kGrid;
    const double v = phi(u);
    if (v > best_val) {
      best_val = v;
      best = j;
    }
  }
  if (best == 0 || best == kGrid || best_val == kNegInf)
    throw NoInteriorMaximum("profiled objective peaks at the search boundary");

  double a = lo + (hi - lo) * static_cast<double>(best - 1) / kGrid;
  double b = lo + (hi - lo) * static_cast<double>(best + 1) / kGrid;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = phi(c), fd = phi(d);
  while (b - a > 1e-8) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = phi(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = phi(d);
    }
  }
  return std::exp(0.5 * (a + b));
}

EStepResult e_step_complete(const Eigen::MatrixXd& data, const MixtureModel& model,
                            const FitConfig& cfg) {
  model.validate();
  const MaskedDataset wrapped = MaskedDataset::from_complete(data);
  check_model_data(model, wrapped.n(), wrapped.m());
  EStepData e = estep_internal(wrapped, model, cfg, false);
  return EStepResult{Responsibilities{std::move(e.p)}, e.loglik, e.ridge_events};
}

MixtureModel m_step_complete(const Eigen::MatrixXd& data, const Responsibilities& resp,
                             const MixtureModel& model, const FitConfig& cfg) {
  model.validate();
  resp.validate();
  const MaskedDataset wrapped = MaskedDataset::from_complete(data);
  check_model_data(model, wrapped.n(), wrapped.m());
  check_resp_shape(resp, wrapped.n(), model.k());
  int ridge_events = 0;
  return mstep_internal(wrapped, resp.p, {}, model, cfg, ridge_events);
}

EStepResult responsibilities_observed(const MaskedDataset& data, const MixtureModel& model,
                                      const FitConfig& cfg) {
  model.validate();
  check_model_data(model, data.n(), data.m());
  EStepData e = estep_internal(data, model, cfg, false);
  return EStepResult{Responsibilities{std::move(e.p)}, e.loglik, e.ridge_events};
}

StudentParams conditional_student_params(const Eigen::VectorXd& row, const IndexPartition& p,
                                         const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                         double ridge) {
  if (mu.size() != row.size() || sigma.rows() != row.size() || sigma.cols() != row.size())
    throw DimensionMismatch("row, mean, and scatter dimensions disagree");
  if (p.d_mis() < 1)
    throw DimensionMismatch("conditional law needs at least one missing coordinate");
  if (p.d_obs() < 1)
    throw InsufficientObserved("conditional law needs at least one observed coordinate");
  const CondCore cc = cond_core(row, p, mu, sigma, ridge, true);
  const double d_o = static_cast<double>(p.d_obs());
  StudentParams out;
  out.nu = d_o;
  out.mean = cc.mean;
  out.scale = (cc.q / d_o) * cc.schur;
  return out;
}

ConditionalMoments conditional_moments(const Eigen::VectorXd& row, const IndexPartition& p,
                                       const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                       double ridge) {
  if (mu.size() != row.size() || sigma.rows() != row.size() || sigma.cols() != row.size())
    throw DimensionMismatch("row, mean, and scatter dimensions disagree");
  ConditionalMoments out;
  out.x_tilde = row;
  out.sigma_tilde = Eigen::MatrixXd::Zero(row.size(), row.size());
  if (p.d_mis() == 0) return out;
  if (p.d_obs() < 3)
    throw InsufficientObserved("conditional moments need at least 3 observed coordinates, "
                               "got " + std::to_string(p.d_obs()));
  const CondCore cc = cond_core(row, p, mu, sigma, ridge, true);
  const double d_o = static_cast<double>(p.d_obs());
  const Eigen::MatrixXd cov = (cc.q / (d_o - 2.0)) * cc.schur;
  for (Eigen::Index a = 0; a < p.d_mis(); ++a) {
    out.x_tilde(p.missing[static_cast<std::size_t>(a)]) = cc.mean(a);
    for (Eigen::Index c = 0; c < p.d_mis(); ++c)
      out.sigma_tilde(p.missing[static_cast<std::size_t>(a)],
                      p.missing[static_cast<std::size_t>(c)]) = cov(a, c);
  }
  return out;
}

MixtureModel m_step_missing(const MaskedDataset& data, const Responsibilities& resp,
                            const MixtureModel& model, const FitConfig& cfg) {
  model.validate();
  resp.validate();
  check_model_data(model, data.n(), data.m());
  check_resp_shape(resp, data.n(), model.k());
  check_min_observed(data);
  const EStepData e = estep_internal(data, model, cfg, true);
  int ridge_events = 0;
  return mstep_internal(data, resp.p, e.moments, model, cfg, ridge_events);
}

FitResult fit_complete(const Eigen::MatrixXd& data, const MixtureModel& init,
                       const FitConfig& cfg) {
  LoopOut out = fit_loop(MaskedDataset::from_complete(data), init, cfg);
  return FitResult{std::move(out.model), std::move(out.report)};
}

FitResult fit_complete(const Eigen::MatrixXd& data, int k, std::uint64_t seed,
                       const FitConfig& cfg) {
  const MixtureModel init = kmeans_init(data, InitPlan{k, seed});
  return fit_complete(data, init, cfg);
}

ImputeResult fit_impute(const MaskedDataset& data, const MixtureModel& init,
                        const FitConfig& cfg) {
  LoopOut out = fit_loop(data, init, cfg);
  Eigen::MatrixXd imputed = data.values();
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const auto& part = data.partition(i);
    if (part.d_mis() == 0) continue;
    const auto ii = static_cast<std::size_t>(i);
    for (Eigen::Index a = 0; a < part.d_mis(); ++a) {
      double v = 0.0;
      for (int k = 0; k < out.model.k(); ++k)
        v += out.last_e.p(i, k) * out.last_e.moments[ii].mean[static_cast<std::size_t>(k)](a);
      imputed(i, part.missing[static_cast<std::size_t>(a)]) = v;
    }
  }
  return ImputeResult{std::move(out.model), std::move(out.report), std::move(imputed)};
}

ImputeResult fit_impute(const MaskedDataset& data, int k, std::uint64_t seed,
                        const FitConfig& cfg) {
  const Eigen::MatrixXd filled = mean_fill(data);
  const MixtureModel init = kmeans_init(filled, InitPlan{k, seed});
  return fit_impute(data, init, cfg);
}

}  // namespace femimpute
