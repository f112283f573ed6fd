#pragma once

#include <stdexcept>
#include <string>

namespace mtts {

// Invalid hyperparameters, dimensions or option combinations.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Out-of-domain scalar arguments (probabilities outside (0,1) and the like).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A factorization or solve failed even after jitter escalation.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A task id referenced by a history could not be resolved.
struct LookupError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// An interaction stream violates the per-task count contract.
struct ScheduleError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace mtts
