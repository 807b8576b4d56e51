#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

// Thin wrapper over a dense Levenberg-Marquardt solver.
namespace qpburst::lsq {

struct Problem {
  std::size_t n_params = 0;
  std::size_t n_residuals = 0;
  /// r = f(x).
  std::function<void(std::span<const double> x, std::span<double> r)> residuals;
  /// Row-major n_residuals x n_params Jacobian of r.
  std::function<void(std::span<const double> x, std::span<double> jac)> jacobian;
};

struct Options {
  double tolerance = 1e-14;
  int max_evaluations = 2000;
};

struct Result {
  std::vector<double> x;
  double rms = 0.0;  // sqrt(mean r^2) at x
  int status = 0;
  bool converged = false;
};

Result levenberg_marquardt(const Problem& problem, std::vector<double> x0, const Options& options = {});

}  // namespace qpburst::lsq
