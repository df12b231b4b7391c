#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvlab {

/// Verdict of an inequality check. Margins are slack values: negative means violated.
struct CheckReport {
  std::string name;
  bool holds = true;
  double margin = 0.0;
  double tolerance = 0.0;
  std::vector<double> witness;
  std::vector<double> residuals;
  std::map<std::string, double> diagnostics;

  const char* verdict() const { return holds ? "pass" : "fail"; }
};

/// Raised when an iterative solver fails to converge or a computation leaves the finite range.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace curvlab
