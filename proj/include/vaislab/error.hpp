#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vaislab {

/// A numerical precondition or invariant failed. `check()` names the failing check.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string check, const std::string& detail)
      : std::runtime_error(check + ": " + detail), check_(std::move(check)) {}

  const std::string& check() const noexcept { return check_; }

 private:
  std::string check_;
};

/// Experiment configuration does not match the schema.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vaislab
