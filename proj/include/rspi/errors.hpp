#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rspi {

/// Raised when a configuration or model parameter violates a contract.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The Euler-Maruyama update produced a non-finite state.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A rollout inside a batch failed; carries the offending sample index.
class BatchError : public std::runtime_error {
 public:
  BatchError(const std::string& what, std::size_t sample)
      : std::runtime_error("sample " + std::to_string(sample) + ": " + what), sample_(sample) {}

  std::size_t sample() const noexcept { return sample_; }

 private:
  std::size_t sample_;
};

/// Monte Carlo weights carry no usable information (all zero or some infinite).
class DegenerateEstimate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A closed-form controller was evaluated outside its domain of validity.
class IllPosedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace rspi
