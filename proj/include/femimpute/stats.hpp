// Shared order-statistics helpers (linear-interpolation quantiles).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "femimpute/errors.hpp"

namespace femimpute {

// Quantile with linear interpolation between order statistics
// (h = (n-1)p convention).  `sorted` must be ascending and nonempty.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw DimensionMismatch("quantile of an empty sample");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - std::floor(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

}  // namespace femimpute
