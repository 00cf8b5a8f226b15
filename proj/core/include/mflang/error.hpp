#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mflang {

/// Invalid argument or violated invariant on an input value.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A time integrator produced a non-finite or runaway coordinate.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Gibbs map failures (overflow, truncation domain too small).
class GibbsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mflang
