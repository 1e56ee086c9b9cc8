#include "femimpute/evalbench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <utility>

#include <json.hpp>

#include "femimpute/csv.hpp"
#include "femimpute/errors.hpp"
#include "femimpute/fem.hpp"
#include "femimpute/gmm.hpp"
#include "femimpute/stats.hpp"

namespace femimpute {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_shapes(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& imputed,
                  const BoolArray& observed) {
  if (truth.rows() != imputed.rows() || truth.cols() != imputed.cols() ||
      truth.rows() != observed.rows() || truth.cols() != observed.cols())
    throw DimensionMismatch("truth, imputed, and mask shapes disagree");
}

MetricSet score_cells(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& imputed,
                      const BoolArray& observed, const std::vector<int>* row_excluded,
                      bool throw_on_empty) {
  check_shapes(truth, imputed, observed);
  double ape = 0.0, ae = 0.0, se = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    if (row_excluded && (*row_excluded)[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
      if (observed(i, j)) continue;
      const double t = truth(i, j);
      if (std::abs(t) < 1e-300)
        throw ZeroTruth("masked truth cell (" + std::to_string(i) + "," +
                        std::to_string(j) + ") is zero; relative error is undefined");
      const double err = std::abs(t - imputed(i, j));
      ape += err / std::abs(t);
      ae += err;
      se += err * err;
      ++count;
    }
  }
  if (count == 0) {
    if (throw_on_empty) throw DimensionMismatch("mask selects no cells");
    return MetricSet{kNaN, kNaN, kNaN, 0};
  }
  const double dn = static_cast<double>(count);
  return MetricSet{100.0 * ape / dn, ae / dn, std::sqrt(se / dn), count};
}

}  // namespace

double mape(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& imputed,
            const BoolArray& observed) {
  return score_cells(truth, imputed, observed, nullptr, true).mape;
}

MetricSet score_imputation(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& imputed,
                           const BoolArray& observed, const std::vector<int>* row_excluded) {
  if (row_excluded && static_cast<Eigen::Index>(row_excluded->size()) != truth.rows())
    throw DimensionMismatch("row exclusion flags do not match the row count");
  return score_cells(truth, imputed, observed, row_excluded, false);
}

const char* method_tag(FitMethod method) {
  return method == FitMethod::fem ? "fem" : "gmm";
}

namespace {

void validate_bench(const BenchSpec& spec) {
  if (spec.mc_runs < 1) throw UsageError("mc_runs must be at least 1");
  if (spec.missing_rates.empty()) throw UsageError("need at least one missing rate");
  for (double r : spec.missing_rates)
    if (!(r > 0.0) || !(r <= 1.0))
      throw UsageError("missing rates must lie in (0, 1], got " + std::to_string(r));
  if (spec.outlier_rates.empty()) throw UsageError("need at least one outlier rate");
  for (double r : spec.outlier_rates)
    if (!(r >= 0.0) || !(r < 1.0))
      throw UsageError("outlier rates must lie in [0, 1), got " + std::to_string(r));
  if (spec.methods.empty()) throw UsageError("need at least one method");
  if (spec.auto_k) {
    if (spec.k_min < 1 || spec.k_max < spec.k_min)
      throw UsageError("invalid auto-k range");
  } else if (spec.k < 1) {
    throw UsageError("k must be at least 1");
  }
  if (spec.missing_mode == MissingMode::block && spec.block_groups < 1)
    throw UsageError("block mode needs at least one column group");
}

struct FitOutcome {
  Eigen::MatrixXd imputed;
  int iterations = 0;
  bool converged = false;
  int chosen_k = 0;
};

FitOutcome fit_one(const MaskedDataset& masked, FitMethod method, const BenchSpec& spec,
                   std::uint64_t init_seed) {
  int k = spec.k;
  std::uint64_t seed = init_seed;
  if (spec.auto_k) {
    const SelectionResult sel =
        select_k(masked, spec.k_min, spec.k_max, method, init_seed, spec.fit);
    k = sel.chosen_k;
    seed = derive_seed(init_seed, static_cast<std::uint64_t>(k));
  }
  FitOutcome out;
  out.chosen_k = k;
  if (method == FitMethod::fem) {
    ImputeResult r = fit_impute(masked, k, seed, spec.fit);
    out.imputed = std::move(r.imputed);
    out.iterations = r.report.iterations;
    out.converged = r.report.converged;
  } else {
    GmmImputeResult r = gmm_fit_impute(masked, k, seed, spec.fit);
    out.imputed = std::move(r.imputed);
    out.iterations = r.report.iterations;
    out.converged = r.report.converged;
  }
  return out;
}

}  // namespace

ExperimentReport run_experiment(const BenchSpec& spec) {
  validate_bench(spec);
  ExperimentReport report;

  for (int r = 0; r < spec.mc_runs; ++r) {
    const std::uint64_t seed_r = spec.base_seed + static_cast<std::uint64_t>(r);

    Eigen::MatrixXd base;
    if (spec.fixed_data) {
      base = *spec.fixed_data;
    } else {
      SyntheticSpec gen = spec.data;
      gen.seed = seed_r;
      base = generate_dataset(gen).values;
    }

    for (std::size_t oi = 0; oi < spec.outlier_rates.size(); ++oi) {
      const double orate = spec.outlier_rates[oi];
      OutlierSpec ospec{spec.outlier_kind, orate,
                        derive_seed(seed_r, 100 + static_cast<std::uint64_t>(oi))};
      const ContaminationResult cont = contaminate(base, ospec);

      for (std::size_t mi = 0; mi < spec.missing_rates.size(); ++mi) {
        const double mrate = spec.missing_rates[mi];
        MissingnessSpec mspec;
        mspec.seed = derive_seed(seed_r, 200 + static_cast<std::uint64_t>(mi));
        mspec.mode = spec.missing_mode;
        if (spec.missing_mode == MissingMode::mcar) {
          mspec.rate = mrate;
        } else {
          mspec.column_groups =
              consecutive_groups(static_cast<int>(base.cols()), spec.block_groups);
          mspec.image_rate = mrate;
          mspec.row_rate = spec.block_row_rate;
        }

        std::string mask_error;
        std::optional<MaskedDataset> masked;
        try {
          masked.emplace(inject_missing(cont.values, mspec));
        } catch (const Error& e) {
          mask_error = e.what();
        }

        const std::uint64_t init_seed = derive_seed(seed_r, 300);
        for (FitMethod method : spec.methods) {
          RunRecord rec;
          rec.seed = seed_r;
          rec.method = method;
          rec.missing_rate = mrate;
          rec.outlier_rate = orate;
          if (!mask_error.empty()) {
            rec.error = mask_error;
            report.runs.push_back(std::move(rec));
            continue;
          }
          const auto t0 = std::chrono::steady_clock::now();
          try {
            const FitOutcome fit = fit_one(*masked, method, spec, init_seed);
            rec.iterations = fit.iterations;
            rec.converged = fit.converged;
            rec.chosen_k = fit.chosen_k;
            rec.all = score_imputation(cont.values, fit.imputed, masked->observed());
            rec.clean = score_imputation(cont.values, fit.imputed, masked->observed(),
                                         &cont.flags);
          } catch (const Error& e) {
            rec.error = e.what();
          }
          rec.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
          report.runs.push_back(std::move(rec));
        }
      }
    }
  }

  // Aggregate per (outlier rate, missing rate, method) over replicates.
  for (std::size_t oi = 0; oi < spec.outlier_rates.size(); ++oi) {
    for (std::size_t mi = 0; mi < spec.missing_rates.size(); ++mi) {
      for (FitMethod method : spec.methods) {
        AggregateRow agg;
        agg.missing_rate = spec.missing_rates[mi];
        agg.outlier_rate = spec.outlier_rates[oi];
        agg.method = method;
        std::vector<double> v_mape, v_clean, v_mae, v_rmse;
        for (const RunRecord& rec : report.runs) {
          if (rec.method != method || rec.missing_rate != agg.missing_rate ||
              rec.outlier_rate != agg.outlier_rate)
            continue;
          ++agg.n_runs;
          if (!rec.error.empty() || rec.all.n_cells == 0) {
            ++agg.n_failed;
            continue;
          }
          v_mape.push_back(rec.all.mape);
          v_mae.push_back(rec.all.mae);
          v_rmse.push_back(rec.all.rmse);
          if (rec.clean.n_cells > 0) v_clean.push_back(rec.clean.mape);
        }
        const auto q3 = [](std::vector<double> v, double* med, double* q1, double* q3v) {
          if (v.empty()) {
            *med = *q1 = *q3v = kNaN;
            return;
          }
          std::sort(v.begin(), v.end());
          *med = quantile_sorted(v, 0.5);
          *q1 = quantile_sorted(v, 0.25);
          *q3v = quantile_sorted(v, 0.75);
        };
        q3(v_mape, &agg.mape_med, &agg.mape_q1, &agg.mape_q3);
        q3(v_clean, &agg.clean_mape_med, &agg.clean_mape_q1, &agg.clean_mape_q3);
        q3(v_mae, &agg.mae_med, &agg.mae_q1, &agg.mae_q3);
        q3(v_rmse, &agg.rmse_med, &agg.rmse_q1, &agg.rmse_q3);
        report.aggregates.push_back(agg);
      }
    }
  }
  return report;
}

namespace {

std::string csv_field(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

nlohmann::json quartiles_json(double med, double q1, double q3) {
  nlohmann::json j;
  j["median"] = std::isfinite(med) ? nlohmann::json(med) : nlohmann::json(nullptr);
  j["q1"] = std::isfinite(q1) ? nlohmann::json(q1) : nlohmann::json(nullptr);
  j["q3"] = std::isfinite(q3) ? nlohmann::json(q3) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

void write_runs_csv(const std::string& path, const ExperimentReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "seed,method,missing_rate,outlier_rate,mape,mape_clean,mae,rmse,"
         "n_missing_cells,iterations,converged,chosen_k,error\n";
  for (const RunRecord& rec : report.runs) {
    out << rec.seed << ',' << method_tag(rec.method) << ',' << format_double(rec.missing_rate)
        << ',' << format_double(rec.outlier_rate) << ',';
    if (rec.error.empty()) {
      out << csv_field(rec.all.mape) << ',' << csv_field(rec.clean.mape) << ','
          << csv_field(rec.all.mae) << ',' << csv_field(rec.all.rmse) << ','
          << rec.all.n_cells << ',' << rec.iterations << ',' << (rec.converged ? 1 : 0)
          << ',' << rec.chosen_k << ',';
    } else {
      out << ",,,,,,,," << sanitize(rec.error);
    }
    out << '\n';
  }
}

void write_aggregates_json(const std::string& path, const ExperimentReport& report) {
  nlohmann::json conditions = nlohmann::json::array();
  for (const AggregateRow& agg : report.aggregates) {
    nlohmann::json j;
    j["missing_rate"] = agg.missing_rate;
    j["outlier_rate"] = agg.outlier_rate;
    j["method"] = method_tag(agg.method);
    j["n_runs"] = agg.n_runs;
    j["n_failed"] = agg.n_failed;
    j["mape"] = quartiles_json(agg.mape_med, agg.mape_q1, agg.mape_q3);
    j["mape_clean"] = quartiles_json(agg.clean_mape_med, agg.clean_mape_q1, agg.clean_mape_q3);
    j["mae"] = quartiles_json(agg.mae_med, agg.mae_q1, agg.mae_q3);
    j["rmse"] = quartiles_json(agg.rmse_med, agg.rmse_q1, agg.rmse_q3);
    conditions.push_back(j);
  }
  nlohmann::json root;
  root["conditions"] = conditions;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << root.dump(2) << '\n';
}

std::string aggregates_table(const ExperimentReport& report) {
  std::string s = "missing  outliers  method  ok/runs  mape_med  mape_clean_med  "
                  "mae_med  rmse_med\n";
  char buf[256];
  for (const AggregateRow& agg : report.aggregates) {
    std::snprintf(buf, sizeof(buf), "%7.3f  %8.3f  %6s  %3d/%-3d  %8.4f  %14.4f  %7.4f  %8.4f\n",
                  agg.missing_rate, agg.outlier_rate, method_tag(agg.method),
                  agg.n_runs - agg.n_failed, agg.n_runs, agg.mape_med, agg.clean_mape_med,
                  agg.mae_med, agg.rmse_med);
    s += buf;
  }
  return s;
}

}  // namespace femimpute
