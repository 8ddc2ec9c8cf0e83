#ifndef WGCS_ERROR_HPP
#define WGCS_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace wgcs {

/// Invalid configuration: bad spec, unknown key, unsupported primitive.
/// Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an operation precondition (shape/dimension mismatch, bad arity).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed or inconsistent serialized document.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A non-finite loss or gradient was produced during training.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::int64_t step, const std::string& what)
      : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// Kernel weights underflowed for a conditional-density query.
class DegenerateQuery : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wgcs

#endif  // WGCS_ERROR_HPP
