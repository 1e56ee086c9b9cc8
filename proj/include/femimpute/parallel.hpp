// Deterministic block-wise execution.  Row loops are split into fixed
// 256-row blocks; each block produces an independent partial that the
// caller folds serially in block order.  The fold order never depends on
// the thread count, so serial and parallel runs are bit-identical.
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace femimpute {

enum class Exec { serial, parallel };

inline constexpr std::size_t kBlockRows = 256;

inline std::size_t block_count(std::size_t n, std::size_t block = kBlockRows) {
  return n == 0 ? 0 : (n + block - 1) / block;
}

// Runs fn(block_index, begin, end) over [0, n).  The first exception
// thrown inside a parallel region is rethrown after the join.
template <class Fn>
void for_each_block(std::size_t n, Exec exec, Fn&& fn,
                    std::size_t block = kBlockRows) {
  const std::size_t nb = block_count(n, block);
#ifdef _OPENMP
  if (exec == Exec::parallel && nb > 1) {
    std::exception_ptr err = nullptr;
    #pragma omp parallel for schedule(dynamic, 1)
    for (long long bi = 0; bi < static_cast<long long>(nb); ++bi) {
      const std::size_t b = static_cast<std::size_t>(bi);
      try {
        fn(b, b * block, std::min(n, (b + 1) * block));
      } catch (...) {
        #pragma omp critical(femimpute_block_err)
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    return;
  }
#endif
  (void)exec;
  for (std::size_t b = 0; b < nb; ++b)
    fn(b, b * block, std::min(n, (b + 1) * block));
}

}  // namespace femimpute
