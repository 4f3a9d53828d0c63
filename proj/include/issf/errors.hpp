#pragma once

#include <stdexcept>
#include <string>

namespace issf {

/// Trajectory left the completeness region (‖x‖ grew past the escape bound).
class FiniteEscapeError : public std::runtime_error {
 public:
  FiniteEscapeError(double time, double norm);
  double time() const noexcept { return time_; }
  double norm() const noexcept { return norm_; }

 private:
  double time_;
  double norm_;
};

/// Analytic gradient disagrees with central finite differences.
class GradientMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A region or barrier does not fit the shapes a construction supports.
class UnsupportedShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Experiment configuration failed validation. `path` names the offending
/// field (dotted JSON path) when one is known.
class SpecError : public std::runtime_error {
 public:
  SpecError(std::string path, const std::string& message);
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace issf
