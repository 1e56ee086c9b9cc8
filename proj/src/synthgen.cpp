#include "femimpute/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "femimpute/errors.hpp"
#include "femimpute/linalg.hpp"
#include "femimpute/stats.hpp"

namespace femimpute {

namespace {

void check_rate(double rate, const std::string& name) {
  if (!(rate >= 0.0) || !(rate <= 1.0))
    throw UsageError(name + " must lie in [0, 1], got " + std::to_string(rate));
}

bool row_valid(const std::vector<bool>& observed_row) {
  int mis = 0, obs = 0;
  for (bool o : observed_row) (o ? obs : mis)++;
  return mis == 0 || obs >= 3;
}

}  // namespace

Eigen::MatrixXd ar1_covariance(double sigma2, double phi, int m) {
  if (!(sigma2 > 0.0)) throw UsageError("sigma2 must be positive");
  if (!(std::abs(phi) < 1.0)) throw UsageError("|phi| must be below 1");
  if (m < 1) throw UsageError("dimension must be at least 1");
  const double scale = sigma2 / (1.0 - phi * phi);
  Eigen::MatrixXd sigma(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      sigma(i, j) = scale * std::pow(phi, std::abs(i - j));
  return sigma;
}

Eigen::MatrixXd sample_elliptical(Eigen::Index n, const Eigen::VectorXd& mu,
                                  const Eigen::MatrixXd& sigma, Family family, double dof,
                                  Rng& rng) {
  const Eigen::Index m = mu.size();
  if (sigma.rows() != m || sigma.cols() != m)
    throw DimensionMismatch("scale matrix does not match the mean's dimension");
  if (n < 1) throw UsageError("need at least one draw");
  int idof = 0;
  if (family == Family::student) {
    idof = static_cast<int>(std::llround(dof));
    if (!(dof > 0.0) || std::abs(dof - idof) > 1e-12 || idof < 1)
      throw UsageError("student dof must be a positive integer, got " + std::to_string(dof));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("sampling scale matrix is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();

  Eigen::MatrixXd out(n, m);
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) z(j) = rng.normal();
    Eigen::VectorXd x = L * z;
    if (family == Family::student) {
      const double s = rng.chi_squared(idof);
      x *= std::sqrt(static_cast<double>(idof) / s);
    }
    out.row(i) = (mu + x).transpose();
  }
  return out;
}

Dataset generate_dataset(const SyntheticSpec& spec) {
  if (spec.n < 1 || spec.m < 1 || spec.k < 1)
    throw UsageError("n, m, k must all be positive");

  // Component parameters, then labels, then noise, each on its own
  // derived stream so the draws cannot interleave.
  Rng param_rng(derive_seed(spec.seed, 0));
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> sigmas;
  for (int k = 0; k < spec.k; ++k) {
    Eigen::VectorXd mu(spec.m);
    for (int f = 0; f < spec.m; ++f) mu(f) = param_rng.uniform01();
    const double phi = param_rng.uniform(0.1, 0.9);
    const double sigma2 = param_rng.uniform(0.0005, 0.005);
    means.push_back(std::move(mu));
    sigmas.push_back(ar1_covariance(sigma2, phi, spec.m));
  }

  Rng label_rng(derive_seed(spec.seed, 1));
  std::vector<int> labels(static_cast<std::size_t>(spec.n));
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(spec.k), 0);
  for (auto& l : labels) {
    l = static_cast<int>(label_rng.below(static_cast<std::uint64_t>(spec.k)));
    ++counts[static_cast<std::size_t>(l)];
  }

  Rng noise_rng(derive_seed(spec.seed, 2));
  std::vector<Eigen::MatrixXd> draws;
  for (int k = 0; k < spec.k; ++k) {
    const Eigen::Index nk = counts[static_cast<std::size_t>(k)];
    if (nk == 0) {
      draws.emplace_back(0, spec.m);
      continue;
    }
    draws.push_back(sample_elliptical(nk, means[static_cast<std::size_t>(k)],
                                      sigmas[static_cast<std::size_t>(k)], spec.family,
                                      spec.student_dof, noise_rng));
  }

  Dataset out;
  out.labels = labels;
  out.values.resize(spec.n, spec.m);
  std::vector<Eigen::Index> cursor(static_cast<std::size_t>(spec.k), 0);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const auto l = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
    out.values.row(i) = draws[l].row(cursor[l]++);
  }

  // Global affine map: minimum -> 1, 98th percentile -> 100.
  std::vector<double> flat(out.values.data(), out.values.data() + out.values.size());
  std::sort(flat.begin(), flat.end());
  const double lo = flat.front();
  const double q98 = quantile_sorted(flat, 0.98);
  if (!(q98 > lo))
    throw Error("degenerate sample: 98th percentile does not exceed the minimum");
  const double a = 99.0 / (q98 - lo);
  out.values = (out.values.array() - lo) * a + 1.0;
  return out;
}

std::vector<std::vector<int>> consecutive_groups(int m, int n_groups) {
  if (m < 1 || n_groups < 1 || n_groups > m)
    throw UsageError("need 1 <= n_groups <= m");
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(n_groups));
  const int base = m / n_groups;
  const int extra = m % n_groups;
  int col = 0;
  for (int g = 0; g < n_groups; ++g) {
    const int size = base + (g < extra ? 1 : 0);
    for (int j = 0; j < size; ++j) groups[static_cast<std::size_t>(g)].push_back(col++);
  }
  return groups;
}

MaskedDataset inject_missing(const Eigen::MatrixXd& values, const MissingnessSpec& spec) {
  if (!values.allFinite())
    throw DimensionMismatch("missingness injection requires a complete matrix");
  const Eigen::Index n = values.rows();
  const Eigen::Index m = values.cols();
  BoolArray observed = BoolArray::Constant(n, m, true);
  Rng rng(spec.seed);

  if (spec.mode == MissingMode::mcar) {
    check_rate(spec.rate, "missing rate");
    std::vector<bool> row(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < n; ++i) {
      bool ok = false;
      for (int attempt = 0; attempt < 100; ++attempt) {
        for (Eigen::Index j = 0; j < m; ++j)
          row[static_cast<std::size_t>(j)] = !(rng.uniform01() < spec.rate);
        if (row_valid(row)) {
          ok = true;
          break;
        }
      }
      if (!ok)
        throw InfeasibleMask("row " + std::to_string(i) +
                             " cannot keep 3 observed cells at missing rate " +
                             std::to_string(spec.rate));
      for (Eigen::Index j = 0; j < m; ++j) observed(i, j) = row[static_cast<std::size_t>(j)];
    }
  } else {
    check_rate(spec.image_rate, "image rate");
    check_rate(spec.row_rate, "row rate");
    const auto& groups = spec.column_groups;
    if (groups.empty()) throw UsageError("block mode needs column groups");
    std::vector<bool> used(static_cast<std::size_t>(m), false);
    for (const auto& g : groups) {
      if (g.empty()) throw UsageError("empty column group");
      for (int j : g) {
        if (j < 0 || j >= m)
          throw UsageError("column index " + std::to_string(j) + " outside dimension " +
                           std::to_string(m));
        if (used[static_cast<std::size_t>(j)])
          throw UsageError("column " + std::to_string(j) + " appears in two groups");
        used[static_cast<std::size_t>(j)] = true;
      }
    }

    const auto n_groups = static_cast<std::uint64_t>(groups.size());
    const auto n_affected = static_cast<std::size_t>(
        std::llround(spec.image_rate * static_cast<double>(n_groups)));
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::size_t> affected(order.begin(),
                                      order.begin() + static_cast<std::ptrdiff_t>(n_affected));
    std::sort(affected.begin(), affected.end());

    const auto rows_per = static_cast<std::size_t>(
        std::floor(spec.row_rate * static_cast<double>(n)));
    for (std::size_t g : affected) {
      std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), 0);
      rng.shuffle(rows);
      for (std::size_t r = 0; r < rows_per; ++r)
        for (int j : groups[g]) observed(rows[r], j) = false;
    }

    // Repair rows that fell below 3 observed cells by restoring one of
    // their masked groups at a time.
    for (int pass = 0; pass < 100; ++pass) {
      bool any = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index obs = 0;
        for (Eigen::Index j = 0; j < m; ++j) obs += observed(i, j) ? 1 : 0;
        if (obs >= 3 || obs == m) continue;
        std::vector<std::size_t> masked_groups;
        for (std::size_t g : affected) {
          bool fully_masked = true;
          for (int j : groups[g]) fully_masked = fully_masked && !observed(i, j);
          if (fully_masked) masked_groups.push_back(g);
        }
        if (masked_groups.empty())
          throw InfeasibleMask("row " + std::to_string(i) +
                               " cannot keep 3 observed cells under the block mask");
        const std::size_t pick = masked_groups[static_cast<std::size_t>(
            rng.below(masked_groups.size()))];
        for (int j : groups[pick]) observed(i, j) = true;
        any = true;
      }
      if (!any) break;
      if (pass == 99)
        throw InfeasibleMask("block mask repair did not converge");
    }
  }

  Eigen::MatrixXd masked = values;
  return MaskedDataset(std::move(masked), std::move(observed));
}

ContaminationResult contaminate(const Eigen::MatrixXd& values, const OutlierSpec& spec) {
  if (!values.allFinite())
    throw DimensionMismatch("contamination requires a complete matrix");
  check_rate(spec.rate, "outlier rate");
  const Eigen::Index n = values.rows();
  const Eigen::Index m = values.cols();

  ContaminationResult out;
  out.values = values;
  out.flags.assign(static_cast<std::size_t>(n), 0);
  const auto count =
      static_cast<std::size_t>(std::llround(spec.rate * static_cast<double>(n)));
  if (count == 0) return out;

  Rng rng(spec.seed);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  rng.shuffle(rows);
  std::vector<Eigen::Index> chosen(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(chosen.begin(), chosen.end());

  // Column statistics from the pre-contamination data.
  Eigen::VectorXd col_min(m), col_max(m), col_mean(m), col_sd(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    col_min(j) = values.col(j).minCoeff();
    col_max(j) = values.col(j).maxCoeff();
    col_mean(j) = values.col(j).mean();
    col_sd(j) = std::sqrt((values.col(j).array() - col_mean(j)).square().sum() /
                          static_cast<double>(n));
  }

  for (Eigen::Index i : chosen) {
    out.flags[static_cast<std::size_t>(i)] = 1;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (spec.kind == OutlierKind::uniform_minmax)
        out.values(i, j) = rng.uniform(col_min(j), col_max(j));
      else
        out.values(i, j) = col_mean(j) + col_sd(j) * rng.normal();
    }
  }
  return out;
}

}  // namespace femimpute
