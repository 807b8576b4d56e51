#pragma once

#include <cstddef>
#include <span>

#include "qpburst/device.hpp"
#include "qpburst/impact.hpp"

// Data-parallel hot loops. Each kernel has a plain serial reference and an
// OpenMP version; the two agree bit for bit on the rate grid and to rounding
// on the matched filter, independent of the thread count.
namespace qpburst::kernels {

/// Inputs shared by the rate-grid kernels.
struct RateGridInput {
  std::span<const Vec2> qubit_xy;         // mm
  std::span<const double> baseline_rate;  // 1/s per qubit
  double rate_per_x_qp = 0.0;             // Gamma_1 / x_qp
  std::span<const ImpactEvent> events;    // sorted by t_impact
  const FootprintModel* model = nullptr;
  std::span<const double> times;          // ascending
};

/// out[it * n_qubits + q] = total relaxation rate of qubit q at times[it].
void rate_grid_serial(const RateGridInput& in, std::span<double> out);
void rate_grid_parallel(const RateGridInput& in, std::span<double> out);

/// Number of taps for an exponential kernel of time constant tau at spacing dt,
/// truncated at 5 tau.
std::size_t exp_kernel_length(double tau, double dt);

/// y[n] = sum_{k<K} w_k x[n+k] with w_k = r^k / sum_j r^(2j); taps past the
/// end of x are dropped without renormalising.
void exp_correlate_serial(std::span<const double> x, double r, std::size_t taps,
                          std::span<double> y);

/// Blocked backward recursion, S[n] = x[n] + r S[n+1] - r^K x[n+K]. Blocks
/// have a fixed size that depends only on (N, K), so the output does not
/// depend on the number of threads.
void exp_correlate_parallel(std::span<const double> x, double r, std::size_t taps,
                            std::span<double> y);

}  // namespace qpburst::kernels
