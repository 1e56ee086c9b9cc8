// Failure taxonomy shared across the library.  Everything derives from
// Error so callers can catch the whole family at once; the CLI maps
// validation-type errors to exit code 2 and numerical ones to exit code 1.
#pragma once

#include <stdexcept>
#include <string>

namespace femimpute {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input / validation failures.
struct DimensionMismatch : Error { using Error::Error; };
struct AllMissing : Error { using Error::Error; };
struct EmptyColumn : Error { using Error::Error; };
struct InsufficientObserved : Error { using Error::Error; };
struct InfeasibleMask : Error { using Error::Error; };
struct ZeroTruth : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// Numerical / fitting failures.
struct NotPositiveDefinite : Error { using Error::Error; };
struct FitDiverged : Error { using Error::Error; };
struct DegenerateClustering : Error { using Error::Error; };
struct SelectionFailed : Error { using Error::Error; };
struct NoInteriorMaximum : Error { using Error::Error; };

}  // namespace femimpute
