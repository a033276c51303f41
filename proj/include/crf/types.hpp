#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>

namespace crf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Invalid user input: bad parameters, mismatched shapes, malformed configs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite or otherwise unusable result.
/// Carries the module name and (1-based) layer index when one applies.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string module, int layer, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)), layer_(layer) {}

  const std::string& module() const noexcept { return module_; }
  int layer() const noexcept { return layer_; }

 private:
  std::string module_;
  int layer_;
};

/// Smoothing was requested but the bandwidth came out as zero.
class DegenerateSmoothing : public NumericalError {
 public:
  explicit DegenerateSmoothing(const std::string& what)
      : NumericalError("estimators", 0, what) {}
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace crf
