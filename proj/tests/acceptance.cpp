// End-to-end acceptance checks: closed-form conditional laws against
// quadrature and Monte-Carlo oracles, algebraic invariances of the
// fitter, benchmark orderings between the elliptical and Gaussian
// imputers, and byte-level CLI determinism.  Prints one [PASS]/[FAIL]
// line per criterion; the exit code is the number of failures.
//
// Usage: acceptance <path-to-cli-binary>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "femimpute/evalbench.hpp"
#include "femimpute/fem.hpp"
#include "femimpute/gmm.hpp"
#include "femimpute/init_select.hpp"
#include "femimpute/masked_data.hpp"
#include "femimpute/model.hpp"
#include "femimpute/rng.hpp"
#include "femimpute/synthgen.hpp"
#include "support/oracle.hpp"

using namespace femimpute;
namespace fs = std::filesystem;

namespace {

int g_failed = 0;
std::string g_cli;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

void run_criterion(int index, const char* name, double limit_s,
                   const std::function<bool(std::string&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (ok && limit_s > 0.0 && secs > limit_s) {
    ok = false;
    if (!detail.empty()) detail += ", ";
    detail += "time limit " + fmt(limit_s) + "s exceeded";
  }
  char line[512];
  std::snprintf(line, sizeof(line), "[%s] criterion %d: %s (%.1fs%s%s)", ok ? "PASS" : "FAIL",
                index, name, secs, detail.empty() ? "" : ", ", detail.c_str());
  std::puts(line);
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

MixtureModel random_model(int k, int m, Rng& rng) {
  MixtureModel model;
  model.weights.resize(k);
  for (int c = 0; c < k; ++c) model.weights(c) = 0.5 + rng.uniform01();
  model.weights /= model.weights.sum();
  for (int c = 0; c < k; ++c) {
    Eigen::VectorXd mu(m);
    for (int j = 0; j < m; ++j) mu(j) = 3.0 * rng.normal();
    model.means.push_back(mu);
    model.scatters.push_back(oracle::trace_normalized(oracle::random_spd(m, rng)));
  }
  return model;
}

// Rows of iid noise around 0 (or around +-shift alternating by parity
// when shift > 0), masked at `rate` with every masked row repaired to
// keep at least three observed cells.
MaskedDataset random_masked(Eigen::Index n, int m, double rate, Rng& rng, double shift = 0.0) {
  Eigen::MatrixXd v(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = shift > 0.0 ? ((i % 2) ? shift : -shift) : 0.0;
    for (int j = 0; j < m; ++j) v(i, j) = mu + rng.normal();
  }
  BoolArray obs = BoolArray::Constant(n, m, true);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j)
      if (rng.uniform01() < rate) obs(i, j) = false;
    int d_obs = 0;
    for (int j = 0; j < m; ++j) d_obs += obs(i, j) ? 1 : 0;
    for (int j = 0; d_obs < 3 && j < m; ++j)
      if (!obs(i, j)) {
        obs(i, j) = true;
        ++d_obs;
      }
  }
  return MaskedDataset(v, obs);
}

// 1: the conditional density of one missing coordinate, obtained by
// normalizing the joint det(S)^(-1/2) Q^(-m/2) slice with adaptive
// quadrature, must equal the closed-form Student law at 50 grid points.
bool c01(std::string& detail) {
  Rng rng(4101);
  double worst = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    const Eigen::MatrixXd sigma = oracle::trace_normalized(oracle::random_spd(3, rng));
    Eigen::VectorXd mu(3);
    for (int j = 0; j < 3; ++j) mu(j) = rng.uniform(-2.0, 2.0);
    Eigen::VectorXd row(3);
    row(0) = mu(0) + rng.uniform(-1.5, 1.5);
    row(1) = mu(1) + rng.uniform(-1.5, 1.5);
    row(2) = std::numeric_limits<double>::quiet_NaN();
    IndexPartition part;
    part.observed = {0, 1};
    part.missing = {2};

    const StudentParams st = conditional_student_params(row, part, mu, sigma);
    if (std::abs(st.nu - 2.0) > 1e-15) {
      detail = "conditional dof is " + fmt(st.nu) + ", want 2";
      return false;
    }
    const double loc = st.mean(0);
    const double sc = std::sqrt(st.scale(0, 0));

    const oracle::Mat inv = oracle::ge_inverse(oracle::from_eigen(sigma));
    const auto joint = [&](double t) {
      const oracle::Vec d = {row(0) - mu(0), row(1) - mu(1), t - mu(2)};
      return std::pow(oracle::quad_form(d, inv), -1.5);
    };
    // Map the real line to (-pi/2, pi/2) so the heavy tails integrate
    // exactly; the transformed integrand decays like cos(theta).
    const auto wrapped = [&](double theta) {
      const double c = std::cos(theta);
      if (std::abs(c) < 1e-14) return 0.0;
      return joint(loc + sc * std::tan(theta)) * sc / (c * c);
    };
    const double pi = 4.0 * std::atan(1.0);
    const double z = oracle::integrate(wrapped, -0.5 * pi, 0.5 * pi, 1e-13);

    for (int gp = 0; gp < 50; ++gp) {
      const double t = loc + sc * (-6.0 + 12.0 * gp / 49.0);
      const double quad_density = joint(t) / z;
      const double ref =
          std::exp(oracle::student_logpdf({t}, st.nu, {loc}, {{st.scale(0, 0)}}));
      worst = std::max(worst, std::abs(quad_density - ref) / ref);
    }
  }
  detail = "max rel err " + fmt(worst);
  return worst < 1e-6;
}

// 2: the conditional covariance must match the empirical covariance of
// a million draws from the identified Student law within three
// Monte-Carlo standard errors, over 20 random cases with d_obs >= 4.
bool c02(std::string& detail) {
  Rng rng(4202);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    // d_obs >= 5 keeps fourth moments finite so the standard error of
    // the covariance estimator exists.
    const int d_obs = 5 + static_cast<int>(rng.below(6));
    const int d_mis = 2;
    const int m = d_obs + d_mis;
    const Eigen::MatrixXd sigma = oracle::trace_normalized(oracle::random_spd(m, rng));
    Eigen::VectorXd mu(m);
    for (int j = 0; j < m; ++j) mu(j) = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd row(m);
    IndexPartition part;
    for (int j = 0; j < d_obs; ++j) {
      part.observed.push_back(j);
      row(j) = mu(j) + rng.uniform(-1.0, 1.0);
    }
    for (int j = d_obs; j < m; ++j) {
      part.missing.push_back(j);
      row(j) = std::numeric_limits<double>::quiet_NaN();
    }

    const StudentParams st = conditional_student_params(row, part, mu, sigma);
    const ConditionalMoments cm = conditional_moments(row, part, mu, sigma);
    Eigen::MatrixXd target(d_mis, d_mis);
    for (int a = 0; a < d_mis; ++a)
      for (int b = 0; b < d_mis; ++b)
        target(a, b) = cm.sigma_tilde(part.missing[a], part.missing[b]);

    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(st.scale).matrixL();
    const int nu = static_cast<int>(std::lround(st.nu));
    const long draws = 1000000;
    Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(d_mis, d_mis);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(d_mis, d_mis);
    Eigen::VectorXd z(d_mis), dev(d_mis);
    for (long it = 0; it < draws; ++it) {
      for (int a = 0; a < d_mis; ++a) z(a) = rng.normal();
      const double f = std::sqrt(nu / rng.chi_squared(nu));
      dev = L * z * f;
      for (int a = 0; a < d_mis; ++a)
        for (int b = 0; b < d_mis; ++b) {
          const double w = dev(a) * dev(b);
          s1(a, b) += w;
          s2(a, b) += w * w;
        }
    }
    for (int a = 0; a < d_mis; ++a)
      for (int b = 0; b < d_mis; ++b) {
        const double mean_w = s1(a, b) / static_cast<double>(draws);
        const double var_w = s2(a, b) / static_cast<double>(draws) - mean_w * mean_w;
        const double se = std::sqrt(var_w / static_cast<double>(draws));
        worst = std::max(worst, std::abs(mean_w - target(a, b)) / se);
      }
  }
  detail = "worst |dev|/SE " + fmt(worst);
  return worst < 3.0;
}

// 3: eliminating the per-sample scale analytically.  The profile
// maximizer of the Gaussian generator sits at m, and substituting the
// per-sample maximizer leaves the profiled density factor constant
// across random samples.
bool c03(std::string& detail) {
  const auto gaussian = [](double t) { return std::exp(-0.5 * t); };
  double worst_argsup = 0.0;
  for (int m : {2, 5, 10, 50}) {
    const double t = profile_argsup(gaussian, m);
    worst_argsup = std::max(worst_argsup, std::abs(t - m) / m);
  }

  // 100 random samples of a 10-dimensional elliptical model; each
  // sample's Mahalanobis distance rescales the generator, the profiled
  // factor d^(m/2) u*^(m/2) g(d u*) must not depend on the sample.
  const int m = 10;
  Rng rng(4303);
  const Eigen::MatrixXd sigma = oracle::trace_normalized(oracle::random_spd(m, rng));
  Eigen::VectorXd mu(m);
  for (int j = 0; j < m; ++j) mu(j) = rng.uniform(-2.0, 2.0);
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  const Eigen::MatrixXd L = llt.matrixL();
  const double expected = 0.5 * m * std::log(static_cast<double>(m)) - 0.5 * m;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd z(m);
    for (int j = 0; j < m; ++j) z(j) = rng.normal();
    const Eigen::VectorXd x = mu + L * z;
    const Eigen::VectorXd diff = x - mu;
    const double d = diff.dot(llt.solve(diff));
    const double u = profile_argsup([&](double t) { return std::exp(-0.5 * d * t); }, m);
    const double log_s = 0.5 * m * (std::log(d) + std::log(u)) - 0.5 * d * u;
    lo = std::min(lo, log_s);
    hi = std::max(hi, log_s);
  }
  const double spread = std::abs(std::expm1(hi - lo));
  const double off = std::max(std::abs(std::expm1(hi - expected)),
                              std::abs(std::expm1(lo - expected)));
  detail = "argsup rel err " + fmt(worst_argsup) + ", factor spread " + fmt(spread);
  return worst_argsup < 1e-6 && spread < 1e-6 && off < 1e-6;
}

// 4: scatter matrices are scale nuisances; multiplying all of them by c
// must leave responsibilities and imputed values unchanged.
bool c04(std::string& detail) {
  Rng rng(4404);
  const MaskedDataset data = random_masked(200, 6, 0.3, rng);
  const MixtureModel model = random_model(3, 6, rng);
  const FitConfig cfg;

  const auto impute_under = [&](const MixtureModel& mm, const Eigen::MatrixXd& p) {
    Eigen::MatrixXd out = data.values();
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      const IndexPartition& part = data.partition(i);
      if (part.d_mis() == 0) continue;
      const Eigen::VectorXd row = data.values().row(i).transpose();
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(part.d_mis());
      for (int k = 0; k < mm.k(); ++k) {
        const ConditionalMoments cm = conditional_moments(row, part, mm.means[k], mm.scatters[k]);
        for (Eigen::Index a = 0; a < part.d_mis(); ++a)
          acc(a) += p(i, k) * cm.x_tilde(part.missing[static_cast<std::size_t>(a)]);
      }
      for (Eigen::Index a = 0; a < part.d_mis(); ++a)
        out(i, part.missing[static_cast<std::size_t>(a)]) = acc(a);
    }
    return out;
  };

  const EStepResult base = responsibilities_observed(data, model, cfg);
  const Eigen::MatrixXd base_imp = impute_under(model, base.resp.p);
  double worst_p = 0.0, worst_x = 0.0;
  for (const double c : {0.1, 10.0}) {
    MixtureModel scaled = model;
    for (auto& s : scaled.scatters) s *= c;
    const EStepResult e = responsibilities_observed(data, scaled, cfg);
    worst_p = std::max(worst_p, (e.resp.p - base.resp.p).cwiseAbs().maxCoeff());
    worst_x = std::max(worst_x, (impute_under(scaled, e.resp.p) - base_imp).cwiseAbs().maxCoeff());
  }
  detail = "resp diff " + fmt(worst_p) + ", imputed diff " + fmt(worst_x);
  return worst_p <= 1e-12 && worst_x <= 1e-10;
}

// 5: on fully observed data the missing-data update path must retrace
// the complete-data path parameter-for-parameter.
bool c05(std::string& detail) {
  Rng rng(4505);
  Eigen::MatrixXd values(500, 5);
  for (Eigen::Index i = 0; i < 500; ++i)
    for (int j = 0; j < 5; ++j) values(i, j) = ((i % 2) ? 3.0 : -3.0) + rng.normal();
  const MaskedDataset masked = MaskedDataset::from_complete(values);
  const FitConfig cfg;
  MixtureModel a = kmeans_init(values, InitPlan{2, 99});
  MixtureModel b = a;
  double worst = 0.0;
  for (int it = 0; it < 50; ++it) {
    const EStepResult ea = e_step_complete(values, a, cfg);
    a = m_step_complete(values, ea.resp, a, cfg);
    const EStepResult eb = responsibilities_observed(masked, b, cfg);
    b = m_step_missing(masked, eb.resp, b, cfg);
    worst = std::max(worst, (a.weights - b.weights).cwiseAbs().maxCoeff());
    for (int k = 0; k < 2; ++k) {
      worst = std::max(worst, (a.means[k] - b.means[k]).cwiseAbs().maxCoeff());
      worst = std::max(worst, (a.scatters[k] - b.scatters[k]).cwiseAbs().maxCoeff());
    }
    if (worst > 1e-12) break;
  }
  detail = "max param diff over 50 iterations " + fmt(worst);
  return worst <= 1e-12;
}

// 6: responsibilities from observed coordinates against the brute-force
// normalized-ratio oracle, 1000 random (row, model) cases.
bool c06(std::string& detail) {
  Rng rng(4606);
  const FitConfig cfg;
  double worst = 0.0;
  for (int ds = 0; ds < 10; ++ds) {
    const MaskedDataset data = random_masked(100, 6, 0.35, rng);
    const MixtureModel model = random_model(3, 6, rng);
    const EStepResult e = responsibilities_observed(data, model, cfg);
    const Eigen::MatrixXd ref =
        oracle::ag_responsibilities(data.values(), data.observed(), model.weights, model.means,
                                    model.scatters, cfg.distance_floor);
    worst = std::max(worst, (e.resp.p - ref).cwiseAbs().maxCoeff());
  }
  detail = "max abs diff " + fmt(worst);
  return worst <= 1e-12;
}

const AggregateRow* find_agg(const ExperimentReport& rep, double mr, double outlier,
                             FitMethod method) {
  for (const AggregateRow& a : rep.aggregates)
    if (a.method == method && std::abs(a.missing_rate - mr) < 1e-12 &&
        std::abs(a.outlier_rate - outlier) < 1e-12)
      return &a;
  return nullptr;
}

// 7: on clean Gaussian mixtures with half the cells missing, the
// elliptical imputer's median MAPE stays within 10% of the Gaussian
// imputer's.
bool c07(std::string& detail) {
  BenchSpec bs;
  bs.data.n = 2000;
  bs.data.m = 10;
  bs.data.k = 3;
  bs.data.family = Family::gaussian;
  bs.missing_rates = {0.5};
  bs.outlier_rates = {0.0};
  bs.mc_runs = 10;
  bs.base_seed = 81001;
  bs.k = 3;
  const ExperimentReport rep = run_experiment(bs);
  const AggregateRow* fem = find_agg(rep, 0.5, 0.0, FitMethod::fem);
  const AggregateRow* gmm = find_agg(rep, 0.5, 0.0, FitMethod::gmm);
  if (!fem || !gmm) {
    detail = "aggregate rows missing";
    return false;
  }
  detail = "median MAPE fem " + fmt(fem->mape_med) + ", gmm " + fmt(gmm->mape_med) + ", failed " +
           std::to_string(fem->n_failed + gmm->n_failed);
  return fem->n_failed == 0 && gmm->n_failed == 0 && fem->mape_med <= 1.1 * gmm->mape_med;
}

// 8: on Student(5) mixtures with 5% whole-row uniform outliers, the
// elliptical imputer's clean-rows MAPE wins at least 8 of 10 paired
// replicates.
bool c08(std::string& detail) {
  BenchSpec bs;
  bs.data.n = 2000;
  bs.data.m = 10;
  bs.data.k = 3;
  bs.data.family = Family::student;
  bs.data.student_dof = 5.0;
  bs.missing_rates = {0.5};
  bs.outlier_rates = {0.05};
  bs.outlier_kind = OutlierKind::uniform_minmax;
  bs.mc_runs = 10;
  bs.base_seed = 82001;
  bs.k = 3;
  const ExperimentReport rep = run_experiment(bs);
  std::map<std::uint64_t, std::pair<double, double>> paired;
  for (const RunRecord& r : rep.runs) {
    const double v = r.error.empty() ? r.clean.mape : std::numeric_limits<double>::quiet_NaN();
    if (r.method == FitMethod::fem)
      paired[r.seed].first = v;
    else
      paired[r.seed].second = v;
  }
  int wins = 0;
  for (const auto& [seed, pr] : paired) {
    (void)seed;
    if (std::isfinite(pr.first) && (!std::isfinite(pr.second) || pr.first < pr.second)) ++wins;
  }
  detail = "fem wins " + std::to_string(wins) + " of " + std::to_string(paired.size());
  return paired.size() == 10 && wins >= 8;
}

// 9: raising uniform contamination from 0% to 10% at 10% missingness
// moves the elliptical imputer's median clean-rows MAPE by less than
// 25% relative, and moves the Gaussian imputer's by more than that.
bool c09(std::string& detail) {
  BenchSpec bs;
  bs.data.n = 2000;
  bs.data.m = 10;
  bs.data.k = 3;
  bs.data.family = Family::gaussian;
  bs.missing_rates = {0.1};
  bs.outlier_rates = {0.0, 0.10};
  bs.outlier_kind = OutlierKind::uniform_minmax;
  bs.mc_runs = 10;
  bs.base_seed = 83001;
  bs.k = 3;
  const ExperimentReport rep = run_experiment(bs);
  const AggregateRow* f0 = find_agg(rep, 0.1, 0.0, FitMethod::fem);
  const AggregateRow* f1 = find_agg(rep, 0.1, 0.10, FitMethod::fem);
  const AggregateRow* g0 = find_agg(rep, 0.1, 0.0, FitMethod::gmm);
  const AggregateRow* g1 = find_agg(rep, 0.1, 0.10, FitMethod::gmm);
  if (!f0 || !f1 || !g0 || !g1) {
    detail = "aggregate rows missing";
    return false;
  }
  const double inc_fem = (f1->clean_mape_med - f0->clean_mape_med) / f0->clean_mape_med;
  const double inc_gmm = (g1->clean_mape_med - g0->clean_mape_med) / g0->clean_mape_med;
  detail = "clean MAPE increase fem " + fmt(100.0 * inc_fem) + "%, gmm " + fmt(100.0 * inc_gmm) +
           "%";
  return std::isfinite(inc_fem) && std::isfinite(inc_gmm) && inc_fem < 0.25 && inc_gmm > inc_fem;
}

// 10: the Gaussian baseline maximizes the observed-data log-likelihood,
// so its trace must be non-decreasing on every fit.
bool c10(std::string& detail) {
  Rng rng(4710);
  double worst_drop = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index n = 150 + static_cast<Eigen::Index>(rng.below(100));
    const int m = 4 + static_cast<int>(rng.below(3));
    const int k = 1 + rep % 2;
    const double rate = 0.15 + 0.02 * (rep % 6);
    const MaskedDataset data = random_masked(n, m, rate, rng, k > 1 ? 2.5 : 0.0);
    const GmmImputeResult res = gmm_fit_impute(data, k, 900 + rep);
    const std::vector<double>& trace = res.report.loglik_trace;
    for (std::size_t t = 1; t < trace.size(); ++t)
      worst_drop = std::max(worst_drop, trace[t - 1] - trace[t]);
    if (!trace.empty())
      worst_drop = std::max(worst_drop, trace.back() - res.report.final_loglik);
  }
  detail = "worst decrease " + fmt(worst_drop);
  return worst_drop <= 1e-10;
}

// 11: on clean three-cluster Gaussian data, BIC selection over k in
// 1..6 picks exactly 3 for the Gaussian fitter and at least 3 for the
// elliptical fitter (whose profiled likelihood tolerates extra
// components), each in at least 7 of 10 seeded runs.
bool c11(std::string& detail) {
  int gmm_exact = 0, fem_ge3 = 0;
  for (int s = 0; s < 10; ++s) {
    SyntheticSpec sp;
    sp.n = 1000;
    sp.m = 6;
    sp.k = 3;
    sp.family = Family::gaussian;
    sp.seed = 7000 + static_cast<std::uint64_t>(s);
    const Dataset ds = generate_dataset(sp);
    const MaskedDataset data = MaskedDataset::from_complete(ds.values);
    const SelectionResult rg = select_k(data, 1, 6, FitMethod::gmm, 555 + s);
    const SelectionResult rf = select_k(data, 1, 6, FitMethod::fem, 555 + s);
    if (rg.chosen_k == 3) ++gmm_exact;
    if (rf.chosen_k >= 3) ++fem_ge3;
  }
  detail = "gmm picked 3 in " + std::to_string(gmm_exact) + "/10, fem picked >=3 in " +
           std::to_string(fem_ge3) + "/10";
  return gmm_exact >= 7 && fem_ge3 >= 7;
}

int run_cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<<missing: " + path + ">>";
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 12: every CLI command is a pure function of its arguments; rerunning
// with the same seed must reproduce every output byte for byte.
bool c12(std::string& detail) {
  if (g_cli.empty()) {
    detail = "CLI path not provided";
    return false;
  }
  const fs::path base("acceptance_cli");
  fs::remove_all(base);
  for (const char* d : {"synth_a", "synth_b", "bench_a", "bench_b"})
    fs::create_directories(base / d);

  const std::string synth_args = "--n 120 --m 5 --k 2 --missing 0.2 --outliers 0.05 --seed 31";
  if (run_cli("synth --output " + (base / "synth_a").string() + " " + synth_args) != 0 ||
      run_cli("synth --output " + (base / "synth_b").string() + " " + synth_args) != 0) {
    detail = "synth invocation failed";
    return false;
  }
  for (const char* f : {"data.csv", "complete.csv", "mask.csv", "labels.csv", "outliers.csv"})
    if (slurp((base / "synth_a" / f).string()) != slurp((base / "synth_b" / f).string())) {
      detail = std::string("synth outputs differ: ") + f;
      return false;
    }

  const std::string in_csv = (base / "synth_a" / "data.csv").string();
  const std::string imp_a = (base / "imp_a.csv").string();
  const std::string imp_b = (base / "imp_b.csv").string();
  if (run_cli("impute --input " + in_csv + " --output " + imp_a + " --method fem --k 2 --seed 7") !=
          0 ||
      run_cli("impute --input " + in_csv + " --output " + imp_b + " --method fem --k 2 --seed 7") !=
          0) {
    detail = "impute invocation failed";
    return false;
  }
  for (const char* suffix : {"", ".model.json", ".summary.json"})
    if (slurp(imp_a + suffix) != slurp(imp_b + suffix)) {
      detail = std::string("impute outputs differ: output") + suffix;
      return false;
    }

  const std::string bench_args =
      "--n 100 --m 5 --k 2 --fit-k 2 --missing 0.1 --mc 2 --seed 5";
  if (run_cli("bench --output " + (base / "bench_a").string() + " " + bench_args) != 0 ||
      run_cli("bench --output " + (base / "bench_b").string() + " " + bench_args) != 0) {
    detail = "bench invocation failed";
    return false;
  }
  for (const char* f : {"runs.csv", "aggregates.json"})
    if (slurp((base / "bench_a" / f).string()) != slurp((base / "bench_b" / f).string())) {
      detail = std::string("bench outputs differ: ") + f;
      return false;
    }

  fs::remove_all(base);
  detail = "synth, impute, bench reproduced byte-identically";
  return true;
}

// 13: mape/mae/rmse against naive scalar loops on 100 random masked
// matrices, and MAE <= RMSE throughout.
bool c13(std::string& detail) {
  Rng rng(4813);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index r = 2 + static_cast<Eigen::Index>(rng.below(7));
    const Eigen::Index c = 2 + static_cast<Eigen::Index>(rng.below(7));
    Eigen::MatrixXd truth(r, c), est(r, c);
    BoolArray obs = BoolArray::Constant(r, c, true);
    oracle::Vec vt, ve;
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) {
        truth(i, j) = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * (0.5 + std::abs(rng.normal()));
        est(i, j) = truth(i, j) + 0.3 * rng.normal();
        if (rng.uniform01() < 0.4) obs(i, j) = false;
      }
    if (obs.all()) obs(0, 0) = false;
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j)
        if (!obs(i, j)) {
          vt.push_back(truth(i, j));
          ve.push_back(est(i, j));
        }
    const MetricSet ms = score_imputation(truth, est, obs);
    const double direct = mape(truth, est, obs);
    const double refs[3] = {oracle::mape_loop(vt, ve), oracle::mae_loop(vt, ve),
                            oracle::rmse_loop(vt, ve)};
    const double got[3] = {ms.mape, ms.mae, ms.rmse};
    for (int q = 0; q < 3; ++q)
      worst = std::max(worst, std::abs(got[q] - refs[q]) / std::max(1.0, std::abs(refs[q])));
    worst = std::max(worst, std::abs(direct - refs[0]) / std::max(1.0, refs[0]));
    if (ms.mae > ms.rmse + 1e-15) {
      detail = "MAE exceeded RMSE";
      return false;
    }
  }
  detail = "max rel err " + fmt(worst);
  return worst <= 1e-12;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli = argv[1];
  run_criterion(1, "conditional law matches the quadrature-normalized joint", 5.0, c01);
  run_criterion(2, "conditional covariance matches Monte-Carlo moments", 60.0, c02);
  run_criterion(3, "scale-profile elimination is exact and sample-independent", 5.0, c03);
  run_criterion(4, "scatter scale changes nothing observable", 0.0, c04);
  run_criterion(5, "missing-data updates reduce to complete-data updates", 0.0, c05);
  run_criterion(6, "observed-data responsibilities match the brute-force oracle", 0.0, c06);
  run_criterion(7, "imputation stays competitive on clean Gaussian mixtures", 300.0, c07);
  run_criterion(8, "imputation wins paired runs on contaminated Student data", 300.0, c08);
  run_criterion(9, "contamination degrades the robust fitter less", 0.0, c09);
  run_criterion(10, "Gaussian baseline log-likelihood is monotone", 0.0, c10);
  run_criterion(11, "BIC selection recovers the planted component count", 0.0, c11);
  run_criterion(12, "CLI outputs are byte-identical across reruns", 0.0, c12);
  run_criterion(13, "imputation metrics match naive-loop oracles", 0.0, c13);
  if (g_failed > 0)
    std::printf("%d of 13 criteria failed\n", g_failed);
  else
    std::printf("all 13 criteria passed\n");
  return g_failed == 0 ? 0 : 1;
}
