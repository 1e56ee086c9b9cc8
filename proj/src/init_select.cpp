#include "femimpute/init_select.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "femimpute/errors.hpp"
#include "femimpute/fem.hpp"
#include "femimpute/gmm.hpp"
#include "femimpute/linalg.hpp"
#include "femimpute/rng.hpp"

namespace femimpute {

namespace {

struct KmeansRun {
  std::vector<int> assign;
  Eigen::MatrixXd centers;  // k x m
  std::vector<Eigen::Index> counts;
  double wcss = std::numeric_limits<double>::infinity();
  bool valid = false;
};

KmeansRun lloyd(const Eigen::MatrixXd& data, int k, Rng& rng, int max_iters) {
  const Eigen::Index n = data.rows();
  const Eigen::Index m = data.cols();
  KmeansRun run;
  run.centers.resize(k, m);

  // Seed from k distinct rows, preferring rows with distinct values so
  // duplicated points do not immediately empty a cluster.
  std::vector<Eigen::Index> chosen;
  int attempts = 0;
  while (static_cast<int>(chosen.size()) < k && attempts < 64 * k) {
    const auto idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    ++attempts;
    bool dup = false;
    for (Eigen::Index c : chosen)
      if (c == idx || (data.row(c) - data.row(idx)).cwiseAbs().maxCoeff() == 0.0) {
        dup = true;
        break;
      }
    if (!dup) chosen.push_back(idx);
  }
  // Fall back to index-distinct rows when too few distinct values exist.
  for (Eigen::Index idx = 0; static_cast<int>(chosen.size()) < k && idx < n; ++idx) {
    bool dup = false;
    for (Eigen::Index c : chosen)
      if (c == idx) { dup = true; break; }
    if (!dup) chosen.push_back(idx);
  }
  for (int c = 0; c < k; ++c) run.centers.row(c) = data.row(chosen[static_cast<std::size_t>(c)]);

  run.assign.assign(static_cast<std::size_t>(n), -1);
  run.counts.assign(static_cast<std::size_t>(k), 0);

  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    std::fill(run.counts.begin(), run.counts.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (data.row(i) - run.centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (data.row(i) - run.centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (run.assign[static_cast<std::size_t>(i)] != best) {
        run.assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
      ++run.counts[static_cast<std::size_t>(best)];
    }
    for (int c = 0; c < k; ++c)
      if (run.counts[static_cast<std::size_t>(c)] == 0) return run;  // degenerate restart
    run.centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      run.centers.row(run.assign[static_cast<std::size_t>(i)]) += data.row(i);
    for (int c = 0; c < k; ++c)
      run.centers.row(c) /= static_cast<double>(run.counts[static_cast<std::size_t>(c)]);
    if (!changed) break;
  }

  run.wcss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    run.wcss += (data.row(i) - run.centers.row(run.assign[static_cast<std::size_t>(i)]))
                    .squaredNorm();
  run.valid = true;
  return run;
}

bool spd_ok(const Eigen::MatrixXd& s) {
  if (!s.allFinite()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) return false;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    if (!(llt.matrixLLT()(i, i) > 0.0)) return false;
  return true;
}

// Adds an escalating diagonal ridge until the matrix factors.
Eigen::MatrixXd ridge_to_spd(Eigen::MatrixXd s, double scale) {
  if (spd_ok(s)) return s;
  double ridge = 1e-10 * scale;
  for (int tries = 0; tries < 60; ++tries) {
    Eigen::MatrixXd candidate = s;
    candidate.diagonal().array() += ridge;
    if (spd_ok(candidate)) return candidate;
    ridge *= 10.0;
  }
  throw DegenerateClustering("cluster covariance cannot be made positive definite");
}

struct ClusterStats {
  Eigen::VectorXd weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;  // raw within-cluster covariance
  double global_var = 0.0;
};

ClusterStats cluster_stats(const Eigen::MatrixXd& data, const InitPlan& plan) {
  const Eigen::Index n = data.rows();
  const Eigen::Index m = data.cols();
  if (plan.k < 1) throw UsageError("k must be at least 1");
  if (n <= plan.k)
    throw DegenerateClustering("need more rows than clusters: N=" + std::to_string(n) +
                               ", K=" + std::to_string(plan.k));
  if (!data.allFinite()) throw DimensionMismatch("k-means input holds non-finite values");

  KmeansRun best;
  for (int r = 0; r < plan.restarts; ++r) {
    Rng rng(derive_seed(plan.seed, static_cast<std::uint64_t>(r)));
    KmeansRun run = lloyd(data, plan.k, rng, plan.max_iters);
    if (run.valid && run.wcss < best.wcss) best = std::move(run);
  }
  if (!best.valid)
    throw DegenerateClustering("k-means left an empty cluster in every restart");

  ClusterStats out;
  out.weights.resize(plan.k);
  const double floor = 1.0 / (10.0 * static_cast<double>(n));
  for (int c = 0; c < plan.k; ++c)
    out.weights(c) = std::max(
        static_cast<double>(best.counts[static_cast<std::size_t>(c)]) / static_cast<double>(n),
        floor);
  out.weights /= out.weights.sum();

  for (int c = 0; c < plan.k; ++c) {
    out.means.push_back(best.centers.row(c).transpose());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (best.assign[static_cast<std::size_t>(i)] != c) continue;
      const Eigen::VectorXd d = data.row(i).transpose() - out.means.back();
      cov.noalias() += d * d.transpose();
    }
    cov /= static_cast<double>(best.counts[static_cast<std::size_t>(c)]);
    out.covs.push_back(0.5 * (cov + cov.transpose()));
  }

  double var_sum = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double mean = data.col(j).mean();
    var_sum += (data.col(j).array() - mean).square().sum() / static_cast<double>(n);
  }
  out.global_var = var_sum / static_cast<double>(m);
  return out;
}

}  // namespace

Eigen::MatrixXd mean_fill(const MaskedDataset& data) {
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  Eigen::MatrixXd out = data.values();
  for (Eigen::Index j = 0; j < m; ++j) {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (data.observed()(i, j)) {
        sum += out(i, j);
        ++count;
      }
    }
    if (count == 0)
      throw EmptyColumn("column " + std::to_string(j) + " has no observed cells");
    const double mean = sum / static_cast<double>(count);
    for (Eigen::Index i = 0; i < n; ++i)
      if (!data.observed()(i, j)) out(i, j) = mean;
  }
  return out;
}

MixtureModel kmeans_init(const Eigen::MatrixXd& data, const InitPlan& plan) {
  ClusterStats stats = cluster_stats(data, plan);
  const auto m = static_cast<double>(data.cols());
  MixtureModel model;
  model.weights = std::move(stats.weights);
  model.means = std::move(stats.means);
  for (auto& cov : stats.covs) {
    const double tr = cov.trace();
    Eigen::MatrixXd scatter;
    if (tr > 0.0) {
      scatter = ridge_to_spd(std::move(cov), tr / m);
      scatter *= m / scatter.trace();
    } else {
      scatter = Eigen::MatrixXd::Identity(data.cols(), data.cols());
    }
    model.scatters.push_back(std::move(scatter));
  }
  model.validate();
  return model;
}

GaussianMixtureModel kmeans_init_gaussian(const Eigen::MatrixXd& data, const InitPlan& plan) {
  ClusterStats stats = cluster_stats(data, plan);
  GaussianMixtureModel model;
  model.weights = std::move(stats.weights);
  model.means = std::move(stats.means);
  const double fallback = std::max(stats.global_var, 1e-12);
  for (auto& cov : stats.covs) {
    const double tr = cov.trace();
    if (tr > 0.0)
      model.covariances.push_back(ridge_to_spd(std::move(cov), tr / static_cast<double>(data.cols())));
    else
      model.covariances.push_back(fallback *
                                  Eigen::MatrixXd::Identity(data.cols(), data.cols()));
  }
  model.validate();
  return model;
}

int mixture_param_count(int k, int m) {
  return (k - 1) + k * m + k * (m * (m + 1)) / 2;
}

double bic(double loglik, int n_params, Eigen::Index n) {
  return -2.0 * loglik + static_cast<double>(n_params) * std::log(static_cast<double>(n));
}

SelectionResult select_k(const MaskedDataset& data, int k_min, int k_max, FitMethod method,
                         std::uint64_t seed, const FitConfig& cfg) {
  if (k_min < 1 || k_max < k_min)
    throw UsageError("invalid candidate range [" + std::to_string(k_min) + ", " +
                     std::to_string(k_max) + "]");
  SelectionResult out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int k = k_min; k <= k_max; ++k) {
    out.candidates.push_back(k);
    const std::uint64_t seed_k = derive_seed(seed, static_cast<std::uint64_t>(k));
    double value = nan;
    try {
      double loglik;
      if (method == FitMethod::fem)
        loglik = fit_impute(data, k, seed_k, cfg).report.final_loglik;
      else
        loglik = gmm_fit_impute(data, k, seed_k, cfg).report.final_loglik;
      value = bic(loglik, mixture_param_count(k, static_cast<int>(data.m())), data.n());
    } catch (const Error&) {
      // candidate skipped; recorded as NaN
    }
    out.bics.push_back(value);
  }
  double best = std::numeric_limits<double>::infinity();
  out.chosen_k = 0;
  for (std::size_t i = 0; i < out.bics.size(); ++i) {
    if (std::isfinite(out.bics[i]) && out.bics[i] < best) {
      best = out.bics[i];
      out.chosen_k = out.candidates[i];
    }
  }
  if (out.chosen_k == 0)
    throw SelectionFailed("every candidate order in [" + std::to_string(k_min) + ", " +
                          std::to_string(k_max) + "] failed to fit");
  return out;
}

}  // namespace femimpute
