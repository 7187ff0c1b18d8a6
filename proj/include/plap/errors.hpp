#pragma once

#include <stdexcept>
#include <string>

namespace plap {

/// An iterative solver ran out of budget. `last_residual` is its final residual.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual(last_residual) {}
  double last_residual;
};

/// A scalar root could not be bracketed below the configured cap.
class NoBracket : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The shooting miss function has no sign change on the requested interval.
class NoSignChange : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trajectory left the region where the truncated problem is meaningful.
class OutOfRange : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace plap
