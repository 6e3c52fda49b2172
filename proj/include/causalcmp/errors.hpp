#pragma once

#include <stdexcept>
#include <string>

namespace causalcmp {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatchError : Error { using Error::Error; };
struct RankDeficientError : Error { using Error::Error; };
struct SeparationError : Error { using Error::Error; };
struct NotConvergedError : Error { using Error::Error; };
struct UnknownTermError : Error { using Error::Error; };
struct MissingInteractionColumnError : Error { using Error::Error; };

struct MissingColumnError : Error { using Error::Error; };
struct BadValueError : Error {
  BadValueError(std::size_t row, const std::string& column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row(row), column(column) {}
  std::size_t row;
  std::string column;
};
struct EmptyCohortError : Error { using Error::Error; };
struct MissingInstrumentError : Error { using Error::Error; };
struct UnknownClusterError : Error { using Error::Error; };

struct ZeroDenominatorError : Error { using Error::Error; };
struct EmptyMatchedSetError : Error { using Error::Error; };
struct NoControlsError : Error { using Error::Error; };
struct ZeroVarianceError : Error { using Error::Error; };
struct SingularCovarianceError : Error { using Error::Error; };
struct TooManyFailedReplicatesError : Error { using Error::Error; };
struct ProbabilityOutOfRangeError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace causalcmp
