// Synthetic benchmark generation: mixtures with AR(1)-structured
// covariances sampled from a Gaussian or Student family, rescaled to a
// common range, plus seeded missingness injection and row contamination.
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "femimpute/masked_data.hpp"
#include "femimpute/rng.hpp"

namespace femimpute {

enum class Family { gaussian, student };
enum class MissingMode { mcar, block };
enum class OutlierKind { uniform_minmax, gaussian_feature_noise };

// sigma2 / (1 - phi^2) * phi^|i-j|; SPD for |phi| < 1.
Eigen::MatrixXd ar1_covariance(double sigma2, double phi, int m);

// n rows from one elliptical component.  Gaussian: mu + L z.  Student:
// mu + L z * sqrt(dof / chi2_dof), dof a positive integer (scale-matrix
// parameterization).
Eigen::MatrixXd sample_elliptical(Eigen::Index n, const Eigen::VectorXd& mu,
                                  const Eigen::MatrixXd& sigma, Family family, double dof,
                                  Rng& rng);

struct SyntheticSpec {
  Eigen::Index n = 2000;
  int m = 10;
  int k = 3;
  Family family = Family::gaussian;
  double student_dof = 5.0;
  std::uint64_t seed = 0;
};

struct Dataset {
  Eigen::MatrixXd values;
  std::vector<int> labels;
};

// Balanced mixture draw: per-component means uniform on [0,1], AR(1)
// covariances with phi ~ U[0.1, 0.9] and sigma2 ~ U[0.0005, 0.005], then
// one global affine map sending the minimum cell to 1 and the 98th
// percentile cell to 100.
Dataset generate_dataset(const SyntheticSpec& spec);

struct MissingnessSpec {
  MissingMode mode = MissingMode::mcar;
  double rate = 0.0;  // mcar: independent cell-missingness probability
  // block mode: disjoint column groups; image_rate of the groups are
  // affected, and in each affected group floor(row_rate * N) rows lose
  // the whole group.
  std::vector<std::vector<int>> column_groups;
  double image_rate = 0.0;
  double row_rate = 0.0;
  std::uint64_t seed = 0;
};

// m consecutive columns split into n_groups nearly equal groups.
std::vector<std::vector<int>> consecutive_groups(int m, int n_groups);

// Masks cells of a complete matrix.  Every row keeps at least 3 observed
// cells: mcar rows violating that are redrawn (up to 100 times), block
// rows are restored group-by-group; InfeasibleMask when repair fails.
MaskedDataset inject_missing(const Eigen::MatrixXd& values, const MissingnessSpec& spec);

struct OutlierSpec {
  OutlierKind kind = OutlierKind::uniform_minmax;
  double rate = 0.0;
  std::uint64_t seed = 0;
};

struct ContaminationResult {
  Eigen::MatrixXd values;
  std::vector<int> flags;  // 1 = row replaced
};

// Replaces round(rate * N) whole rows: uniform_minmax draws each cell
// from U[column min, column max], gaussian_feature_noise from
// N(column mean, column variance); bounds and moments come from the
// pre-contamination data.
ContaminationResult contaminate(const Eigen::MatrixXd& values, const OutlierSpec& spec);

}  // namespace femimpute
