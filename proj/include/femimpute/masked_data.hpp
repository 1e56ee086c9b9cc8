// Dataset with cell-wise missingness and observed/missing index handling.
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace femimpute {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Observed/missing column indices of one row, each list ascending.
struct IndexPartition {
  std::vector<Eigen::Index> observed;
  std::vector<Eigen::Index> missing;

  Eigen::Index d_obs() const { return static_cast<Eigen::Index>(observed.size()); }
  Eigen::Index d_mis() const { return static_cast<Eigen::Index>(missing.size()); }
};

IndexPartition partition_row(const std::vector<bool>& observed_row);

// N x m data matrix plus an observation mask.  Missing cells hold NaN in
// values(); observed cells must be finite.  Every row keeps at least one
// observed cell (AllMissing otherwise).
class MaskedDataset {
 public:
  MaskedDataset(Eigen::MatrixXd values, BoolArray observed,
                std::vector<std::string> feature_names = {});

  // Fully observed wrapper around a complete matrix.
  static MaskedDataset from_complete(Eigen::MatrixXd values,
                                     std::vector<std::string> feature_names = {});

  Eigen::Index n() const { return values_.rows(); }
  Eigen::Index m() const { return values_.cols(); }
  const Eigen::MatrixXd& values() const { return values_; }
  const BoolArray& observed() const { return observed_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  const IndexPartition& partition(Eigen::Index i) const { return partitions_[i]; }
  bool row_complete(Eigen::Index i) const { return partitions_[i].d_mis() == 0; }
  bool any_missing() const { return n_missing_ > 0; }
  Eigen::Index n_missing_cells() const { return n_missing_; }

 private:
  Eigen::MatrixXd values_;
  BoolArray observed_;
  std::vector<std::string> feature_names_;
  std::vector<IndexPartition> partitions_;
  Eigen::Index n_missing_ = 0;
};

}  // namespace femimpute
