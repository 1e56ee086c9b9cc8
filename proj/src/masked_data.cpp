#include "femimpute/masked_data.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "femimpute/errors.hpp"

namespace femimpute {

IndexPartition partition_row(const std::vector<bool>& observed_row) {
  IndexPartition p;
  const auto m = static_cast<Eigen::Index>(observed_row.size());
  for (Eigen::Index j = 0; j < m; ++j) {
    if (observed_row[static_cast<std::size_t>(j)])
      p.observed.push_back(j);
    else
      p.missing.push_back(j);
  }
  return p;
}

MaskedDataset::MaskedDataset(Eigen::MatrixXd values, BoolArray observed,
                             std::vector<std::string> feature_names)
    : values_(std::move(values)),
      observed_(std::move(observed)),
      feature_names_(std::move(feature_names)) {
  if (values_.rows() != observed_.rows() || values_.cols() != observed_.cols())
    throw DimensionMismatch("mask shape " + std::to_string(observed_.rows()) + "x" +
                            std::to_string(observed_.cols()) + " does not match data shape " +
                            std::to_string(values_.rows()) + "x" + std::to_string(values_.cols()));
  if (!feature_names_.empty() &&
      static_cast<Eigen::Index>(feature_names_.size()) != values_.cols())
    throw DimensionMismatch("feature name count " + std::to_string(feature_names_.size()) +
                            " does not match column count " + std::to_string(values_.cols()));
  if (values_.rows() == 0 || values_.cols() == 0)
    throw DimensionMismatch("dataset must have at least one row and one column");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  partitions_.reserve(static_cast<std::size_t>(values_.rows()));
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    std::vector<bool> row(static_cast<std::size_t>(values_.cols()));
    Eigen::Index obs = 0;
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      if (observed_(i, j)) {
        if (!std::isfinite(values_(i, j)))
          throw DimensionMismatch("cell (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") is marked observed but holds a non-finite value");
        ++obs;
      } else {
        values_(i, j) = nan;
        ++n_missing_;
      }
      row[static_cast<std::size_t>(j)] = observed_(i, j);
    }
    if (obs == 0)
      throw AllMissing("row " + std::to_string(i) + " has no observed cells");
    partitions_.push_back(partition_row(row));
  }
}

MaskedDataset MaskedDataset::from_complete(Eigen::MatrixXd values,
                                           std::vector<std::string> feature_names) {
  BoolArray observed = BoolArray::Constant(values.rows(), values.cols(), true);
  return MaskedDataset(std::move(values), std::move(observed), std::move(feature_names));
}

}  // namespace femimpute
