#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace otfwi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Time step violates the CFL bound of the solver.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared while stepping; `step()` is the first bad index.
class DivergenceError : public Error {
 public:
  DivergenceError(int step, const std::string& what)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Every problem found while validating a configuration, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = "invalid configuration:";
    for (const auto& s : p) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace otfwi
