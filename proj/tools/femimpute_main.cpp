// Command-line front end: synthetic data generation, imputation of a
// single CSV, and the Monte-Carlo benchmark harness.
//
// Exit codes: 0 success, 1 numerical failure (non-convergence, singular
// matrices, failed model selection), 2 invalid input or usage.
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "femimpute/csv.hpp"
#include "femimpute/errors.hpp"
#include "femimpute/evalbench.hpp"
#include "femimpute/fem.hpp"
#include "femimpute/gmm.hpp"
#include "femimpute/init_select.hpp"
#include "femimpute/model.hpp"
#include "femimpute/rng.hpp"
#include "femimpute/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace femimpute;

bool is_validation_error(const Error& e) {
  return dynamic_cast<const DimensionMismatch*>(&e) || dynamic_cast<const AllMissing*>(&e) ||
         dynamic_cast<const EmptyColumn*>(&e) || dynamic_cast<const InsufficientObserved*>(&e) ||
         dynamic_cast<const InfeasibleMask*>(&e) || dynamic_cast<const ZeroTruth*>(&e) ||
         dynamic_cast<const UsageError*>(&e) || dynamic_cast<const IoError*>(&e);
}

Family parse_family(const std::string& s) {
  if (s == "gaussian") return Family::gaussian;
  if (s == "student") return Family::student;
  throw UsageError("unknown family '" + s + "' (expected gaussian or student)");
}

MissingMode parse_missing_mode(const std::string& s) {
  if (s == "mcar") return MissingMode::mcar;
  if (s == "block") return MissingMode::block;
  throw UsageError("unknown missing mode '" + s + "' (expected mcar or block)");
}

OutlierKind parse_outlier_kind(const std::string& s) {
  if (s == "uniform") return OutlierKind::uniform_minmax;
  if (s == "gaussian") return OutlierKind::gaussian_feature_noise;
  throw UsageError("unknown outlier kind '" + s + "' (expected uniform or gaussian)");
}

std::vector<double> parse_rate_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find(',', pos);
    const std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("could not parse rate '" + tok + "' in list '" + s + "'");
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (out.empty()) throw UsageError("empty rate list");
  return out;
}

void parse_k_range(const std::string& s, int* lo, int* hi) {
  const std::size_t colon = s.find(':');
  if (colon == std::string::npos)
    throw UsageError("expected k range of the form lo:hi, got '" + s + "'");
  try {
    std::size_t u1 = 0, u2 = 0;
    const std::string a = s.substr(0, colon), b = s.substr(colon + 1);
    *lo = std::stoi(a, &u1);
    *hi = std::stoi(b, &u2);
    if (u1 != a.size() || u2 != b.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw UsageError("could not parse k range '" + s + "'");
  }
}

std::vector<FitMethod> parse_methods(const std::string& s) {
  std::vector<FitMethod> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = s.find(',', pos);
    const std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
    if (tok == "fem")
      out.push_back(FitMethod::fem);
    else if (tok == "gmm")
      out.push_back(FitMethod::gmm);
    else
      throw UsageError("unknown method '" + tok + "' (expected fem or gmm)");
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (out.empty()) throw UsageError("empty method list");
  return out;
}

void require_directory(const std::string& path) {
  if (!fs::is_directory(path)) throw UsageError("output directory does not exist: " + path);
}

std::vector<std::string> default_names(int m) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) names.push_back("f" + std::to_string(j + 1));
  return names;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string output;
  std::int64_t n = 2000;
  int m = 10;
  int k = 3;
  std::string family = "gaussian";
  double dof = 5.0;
  double missing = 0.1;
  std::string missing_mode = "mcar";
  int block_groups = 5;
  double block_row_rate = 0.5;
  double outliers = 0.0;
  std::string outlier_kind = "uniform";
  std::uint64_t seed = 12345;
};

int run_synth(const SynthArgs& a) {
  require_directory(a.output);

  SyntheticSpec spec;
  spec.n = a.n;
  spec.m = a.m;
  spec.k = a.k;
  spec.family = parse_family(a.family);
  spec.student_dof = a.dof;
  spec.seed = a.seed;
  Dataset ds = generate_dataset(spec);

  OutlierSpec ospec{parse_outlier_kind(a.outlier_kind), a.outliers, derive_seed(a.seed, 100)};
  ContaminationResult cont = contaminate(ds.values, ospec);

  MissingnessSpec mspec;
  mspec.mode = parse_missing_mode(a.missing_mode);
  mspec.seed = derive_seed(a.seed, 200);
  if (mspec.mode == MissingMode::mcar) {
    mspec.rate = a.missing;
  } else {
    mspec.column_groups = consecutive_groups(a.m, a.block_groups);
    mspec.image_rate = a.missing;
    mspec.row_rate = a.block_row_rate;
  }
  MaskedDataset masked = inject_missing(cont.values, mspec);

  const std::vector<std::string> names = default_names(a.m);
  const MaskedDataset named(masked.values(), masked.observed(), names);
  const fs::path dir(a.output);
  write_masked_csv((dir / "data.csv").string(), named);
  write_csv((dir / "complete.csv").string(), cont.values, names);
  write_int_csv((dir / "labels.csv").string(), "label", ds.labels);
  write_int_csv((dir / "outliers.csv").string(), "outlier", cont.flags);
  write_mask_csv((dir / "mask.csv").string(), masked.observed());

  std::cout << "wrote " << masked.n() << " x " << masked.m() << " dataset ("
            << masked.n_missing_cells() << " missing cells) to " << a.output << "\n";
  return 0;
}

// --------------------------------------------------------------- impute

struct ImputeArgs {
  std::string input;
  std::string output;
  std::string method = "fem";
  std::string k = "3";
  std::string k_range = "1:6";
  std::uint64_t seed = 12345;
  double tol = 1e-5;
  int max_iters = 200;
  std::string save_model;
  std::string load_model;
};

json trace_json(const std::vector<double>& trace) {
  json arr = json::array();
  for (double v : trace) arr.push_back(v);
  return arr;
}

int run_impute(const ImputeArgs& a) {
  FitMethod method;
  if (a.method == "fem")
    method = FitMethod::fem;
  else if (a.method == "gmm")
    method = FitMethod::gmm;
  else
    throw UsageError("unknown method '" + a.method + "' (expected fem or gmm)");

  const bool auto_k = (a.k == "auto");
  int fixed_k = 0;
  if (!auto_k) {
    try {
      std::size_t used = 0;
      fixed_k = std::stoi(a.k, &used);
      if (used != a.k.size()) throw std::invalid_argument(a.k);
    } catch (const std::exception&) {
      throw UsageError("could not parse --k '" + a.k + "' (expected an integer or auto)");
    }
    if (fixed_k < 1) throw UsageError("--k must be at least 1");
  }
  if (!a.load_model.empty() && auto_k)
    throw UsageError("--load-model fixes the number of components; it cannot be combined "
                     "with --k auto");

  MaskedDataset data = read_masked_csv(a.input);

  FitConfig cfg;
  cfg.outer_tol = a.tol;
  cfg.max_outer_iters = a.max_iters;

  json summary;
  summary["input"] = a.input;
  summary["method"] = a.method;
  summary["n_rows"] = data.n();
  summary["n_cols"] = data.m();
  summary["n_missing_cells"] = data.n_missing_cells();

  std::uint64_t fit_seed = a.seed;
  int k = fixed_k;
  if (auto_k) {
    int lo = 1, hi = 6;
    parse_k_range(a.k_range, &lo, &hi);
    const SelectionResult sel = select_k(data, lo, hi, method, a.seed, cfg);
    k = sel.chosen_k;
    fit_seed = derive_seed(a.seed, static_cast<std::uint64_t>(k));
    json cand = json::array();
    for (std::size_t i = 0; i < sel.candidates.size(); ++i)
      cand.push_back({{"k", sel.candidates[i]}, {"bic", sel.bics[i]}});
    summary["selection"] = {{"chosen_k", sel.chosen_k}, {"candidates", cand}};
  }

  const std::string model_path = a.save_model.empty() ? a.output + ".model.json" : a.save_model;
  Eigen::MatrixXd imputed;
  FitReport report;
  if (method == FitMethod::fem) {
    ImputeResult r = a.load_model.empty()
                         ? fit_impute(data, k, fit_seed, cfg)
                         : fit_impute(data, load_fem_model(a.load_model), cfg);
    k = r.model.k();
    save_model_json(model_path, r.model);
    imputed = std::move(r.imputed);
    report = std::move(r.report);
  } else {
    GmmImputeResult r = a.load_model.empty()
                            ? gmm_fit_impute(data, k, fit_seed, cfg)
                            : gmm_fit_impute(data, load_gmm_model(a.load_model), cfg);
    k = r.model.k();
    save_model_json(model_path, r.model);
    imputed = std::move(r.imputed);
    report = std::move(r.report);
  }

  write_csv(a.output, imputed, data.feature_names());

  summary["k"] = k;
  summary["iterations"] = report.iterations;
  summary["converged"] = report.converged;
  summary["final_loglik"] = report.final_loglik;
  summary["loglik_trace"] = trace_json(report.loglik_trace);
  summary["ridge_events"] = report.ridge_events;

  std::ofstream out(a.output + ".summary.json", std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + a.output + ".summary.json");
  out << summary.dump(2) << "\n";

  std::cout << "imputed " << data.n_missing_cells() << " cells in " << data.n() << " rows ("
            << (report.converged ? "converged" : "not converged") << " after "
            << report.iterations << " iterations)\n";
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string output;
  std::int64_t n = 2000;
  int m = 10;
  int k = 3;
  std::string family = "gaussian";
  double dof = 5.0;
  std::string missing = "0.1,0.3,0.5";
  std::string missing_mode = "mcar";
  int block_groups = 5;
  double block_row_rate = 0.5;
  std::string outliers = "0";
  std::string outlier_kind = "uniform";
  std::string methods = "fem,gmm";
  int mc = 10;
  std::uint64_t seed = 12345;
  int fit_k = 3;
  bool auto_k = false;
  std::string k_range = "1:6";
  double tol = 1e-5;
  int max_iters = 200;
};

int run_bench(const BenchArgs& a) {
  require_directory(a.output);

  BenchSpec spec;
  spec.data.n = a.n;
  spec.data.m = a.m;
  spec.data.k = a.k;
  spec.data.family = parse_family(a.family);
  spec.data.student_dof = a.dof;
  spec.missing_rates = parse_rate_list(a.missing);
  spec.missing_mode = parse_missing_mode(a.missing_mode);
  spec.block_groups = a.block_groups;
  spec.block_row_rate = a.block_row_rate;
  spec.outlier_rates = parse_rate_list(a.outliers);
  spec.outlier_kind = parse_outlier_kind(a.outlier_kind);
  spec.methods = parse_methods(a.methods);
  spec.mc_runs = a.mc;
  spec.base_seed = a.seed;
  spec.k = a.fit_k;
  spec.auto_k = a.auto_k;
  if (a.auto_k) parse_k_range(a.k_range, &spec.k_min, &spec.k_max);
  spec.fit.outer_tol = a.tol;
  spec.fit.max_outer_iters = a.max_iters;

  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport report = run_experiment(spec);
  const auto t1 = std::chrono::steady_clock::now();

  const fs::path dir(a.output);
  write_runs_csv((dir / "runs.csv").string(), report);
  write_aggregates_json((dir / "aggregates.json").string(), report);

  std::cout << aggregates_table(report);
  const double secs = std::chrono::duration<double>(t1 - t0).count();
  std::cerr << "bench: " << report.runs.size() << " runs in " << secs << " s\n";

  bool any_ok = false;
  for (const RunRecord& r : report.runs)
    if (r.error.empty()) any_ok = true;
  if (!any_ok) {
    std::cerr << "error: all " << report.runs.size() << " runs failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture-model imputation of missing values"};
  app.require_subcommand(1);

  SynthArgs sa;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
  synth->add_option("--output", sa.output, "Existing directory for the output files")
      ->required();
  synth->add_option("--n", sa.n, "Number of rows");
  synth->add_option("--m", sa.m, "Number of features");
  synth->add_option("--k", sa.k, "Number of mixture components");
  synth->add_option("--family", sa.family, "Component family: gaussian or student");
  synth->add_option("--dof", sa.dof, "Student degrees of freedom (integer)");
  synth->add_option("--missing", sa.missing, "Missing rate (block mode: fraction of groups)");
  synth->add_option("--missing-mode", sa.missing_mode, "mcar or block");
  synth->add_option("--block-groups", sa.block_groups, "Number of column groups in block mode");
  synth->add_option("--block-row-rate", sa.block_row_rate,
                    "Fraction of rows masked per affected group in block mode");
  synth->add_option("--outliers", sa.outliers, "Fraction of rows replaced by outliers");
  synth->add_option("--outlier-kind", sa.outlier_kind, "uniform or gaussian");
  synth->add_option("--seed", sa.seed, "Random seed");

  ImputeArgs ia;
  CLI::App* impute = app.add_subcommand("impute", "Impute missing cells of a CSV file");
  impute->add_option("--input", ia.input, "CSV with empty or NaN cells for missing values")
      ->required();
  impute->add_option("--output", ia.output, "Path for the imputed CSV")->required();
  impute->add_option("--method", ia.method, "fem or gmm");
  impute->add_option("--k", ia.k, "Number of components, or 'auto' for BIC selection");
  impute->add_option("--k-range", ia.k_range, "Candidate range lo:hi for --k auto");
  impute->add_option("--seed", ia.seed, "Random seed for initialization");
  impute->add_option("--tol", ia.tol, "Relative parameter-change convergence tolerance");
  impute->add_option("--max-iters", ia.max_iters, "Maximum EM iterations");
  impute->add_option("--save-model", ia.save_model,
                     "Path for the fitted model JSON (default: <output>.model.json)");
  impute->add_option("--load-model", ia.load_model,
                     "Initialize from a model JSON (family must match --method)");

  BenchArgs ba;
  CLI::App* bench = app.add_subcommand("bench", "Monte-Carlo imputation benchmark");
  bench->add_option("--output", ba.output, "Existing directory for runs.csv/aggregates.json")
      ->required();
  bench->add_option("--n", ba.n, "Rows per synthetic dataset");
  bench->add_option("--m", ba.m, "Features per synthetic dataset");
  bench->add_option("--k", ba.k, "Components in the generating mixture");
  bench->add_option("--family", ba.family, "gaussian or student");
  bench->add_option("--dof", ba.dof, "Student degrees of freedom (integer)");
  bench->add_option("--missing", ba.missing, "Comma-separated missing rates");
  bench->add_option("--missing-mode", ba.missing_mode, "mcar or block");
  bench->add_option("--block-groups", ba.block_groups, "Column groups in block mode");
  bench->add_option("--block-row-rate", ba.block_row_rate, "Rows masked per affected group");
  bench->add_option("--outliers", ba.outliers, "Comma-separated outlier row rates");
  bench->add_option("--outlier-kind", ba.outlier_kind, "uniform or gaussian");
  bench->add_option("--methods", ba.methods, "Comma-separated: fem,gmm");
  bench->add_option("--mc", ba.mc, "Monte-Carlo replicates per grid point");
  bench->add_option("--seed", ba.seed, "Base seed (replicate r uses seed + r)");
  bench->add_option("--fit-k", ba.fit_k, "Components used by the fitters");
  bench->add_flag("--auto-k", ba.auto_k, "Select the component count per run by BIC");
  bench->add_option("--k-range", ba.k_range, "Candidate range lo:hi for --auto-k");
  bench->add_option("--tol", ba.tol, "Convergence tolerance");
  bench->add_option("--max-iters", ba.max_iters, "Maximum EM iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return run_synth(sa);
    if (*impute) return run_impute(ia);
    return run_bench(ba);
  } catch (const femimpute::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
