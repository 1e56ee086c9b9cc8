// Imputation scoring and the Monte-Carlo evaluation harness.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "femimpute/init_select.hpp"
#include "femimpute/masked_data.hpp"
#include "femimpute/model.hpp"
#include "femimpute/synthgen.hpp"

namespace femimpute {

// Mean absolute percentage error over masked cells only,
// (100 / N_mis) * sum |truth - imputed| / |truth|.  Throws ZeroTruth when
// a masked truth cell is smaller than 1e-300 in magnitude, and
// DimensionMismatch when the mask selects no cells.
double mape(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& imputed,
            const BoolArray& observed);

struct MetricSet {
  double mape = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  Eigen::Index n_cells = 0;
};

// All three metrics over masked cells; when row_excluded is given, rows
// flagged 1 are dropped first.  An empty selection yields NaN metrics
// with n_cells = 0 rather than an error.
MetricSet score_imputation(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& imputed,
                           const BoolArray& observed,
                           const std::vector<int>* row_excluded = nullptr);

struct BenchSpec {
  SyntheticSpec data;
  std::optional<Eigen::MatrixXd> fixed_data;  // replaces generation when set

  std::vector<double> missing_rates;  // mcar cell rates, or block image rates
  MissingMode missing_mode = MissingMode::mcar;
  int block_groups = 5;
  double block_row_rate = 0.5;

  std::vector<double> outlier_rates = {0.0};
  OutlierKind outlier_kind = OutlierKind::uniform_minmax;

  std::vector<FitMethod> methods = {FitMethod::fem, FitMethod::gmm};
  int mc_runs = 10;
  std::uint64_t base_seed = 0;

  int k = 3;
  bool auto_k = false;
  int k_min = 1;
  int k_max = 6;
  FitConfig fit;
};

struct RunRecord {
  std::uint64_t seed = 0;
  FitMethod method = FitMethod::fem;
  double missing_rate = 0.0;
  double outlier_rate = 0.0;
  MetricSet all;    // every masked cell
  MetricSet clean;  // masked cells in non-contaminated rows only
  int iterations = 0;
  bool converged = false;
  int chosen_k = 0;
  double wall_ms = 0.0;  // in-memory only, never serialized
  std::string error;     // empty on success
};

struct AggregateRow {
  double missing_rate = 0.0;
  double outlier_rate = 0.0;
  FitMethod method = FitMethod::fem;
  int n_runs = 0;
  int n_failed = 0;
  // median / q1 / q3 over completed runs, NaN when none completed
  double mape_med = 0.0, mape_q1 = 0.0, mape_q3 = 0.0;
  double clean_mape_med = 0.0, clean_mape_q1 = 0.0, clean_mape_q3 = 0.0;
  double mae_med = 0.0, mae_q1 = 0.0, mae_q3 = 0.0;
  double rmse_med = 0.0, rmse_q1 = 0.0, rmse_q3 = 0.0;
};

struct ExperimentReport {
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> aggregates;
};

const char* method_tag(FitMethod method);

// Full protocol: per replicate r the seed is base_seed + r; generation,
// contamination, masking, and initialization each use a stream derived
// from that, so both methods at one grid point see identical data.
// Failures are recorded per run, never propagated.
ExperimentReport run_experiment(const BenchSpec& spec);

void write_runs_csv(const std::string& path, const ExperimentReport& report);
void write_aggregates_json(const std::string& path, const ExperimentReport& report);
// Fixed-width text rendering of the aggregate table.
std::string aggregates_table(const ExperimentReport& report);

}  // namespace femimpute
