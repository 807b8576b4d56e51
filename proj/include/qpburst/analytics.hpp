#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qpburst/device.hpp"
#include "qpburst/sampler.hpp"

namespace qpburst {

struct CountDistribution {
  std::vector<double> pmf;  // P(count = k), k = 0..support_max
  std::size_t support_max = 0;

  double mean() const;
  double variance() const;
  /// Smallest k with P(count <= k) >= q.
  std::size_t quantile(double q) const;
};

/// Exact distribution of a sum of independent Bernoulli(p_i), by convolution.
CountDistribution poisson_binomial(std::span<const double> p);

/// Background count model for one sampling-time slot of the plan.
CountDistribution independent_count_pmf(const DeviceConfig& device, const SamplingPlan& plan,
                                        std::size_t slot = 0);

struct HistogramComparison {
  double total_variation = 0.0;
  double chi_square = 0.0;
  std::size_t chi_square_dof = 0;
  double excess_tail_mass = 0.0;
  std::size_t tail_threshold = 0;  // counts above this are "tail"
  std::vector<double> observed;    // empirical frequencies, same support as the model
};

/// Compares an empirical count histogram with a model. Chi-square bins are
/// pooled until each expects at least 5 counts.
HistogramComparison histogram_comparison(std::span<const double> counts, const CountDistribution& model);

struct PoissonFit {
  double lambda_mle = 0.0;
  double ks_statistic = 0.0;
  double ks_pvalue = 1.0;
  std::size_t n_intervals = 0;
};

/// Kolmogorov-Smirnov distance between the sample and Exp(lambda).
double ks_statistic_exponential(std::span<const double> sample, double lambda);

/// Exponential MLE and a KS test whose p-value is calibrated by Monte Carlo
/// with lambda re-estimated on every replicate (Lilliefors). Replicate r uses
/// the stream derive_seed(seed, r), so the p-value does not depend on the
/// thread count.
PoissonFit poisson_rate_fit(std::span<const double> intervals, std::uint64_t seed = 0x51f15eedULL,
                            int resamples = 10000);

struct T1Extraction {
  double t1_avg = 0.0;
  double amplitude_a = 0.0;
  std::vector<double> heights;         // ordered by sampling time
  std::vector<double> sampling_times;  // ascending
  double fit_rms = 0.0;
  double zero_param_residual = 0.0;  // RMS of h - N (1 - exp(-t'/T1))
  bool converged = false;
};

inline constexpr double kT1FitMin = 1e-9;
inline constexpr double kT1FitMax = 1e-2;

/// Fits h = a (1 - exp(-(t + extra_window) / T1)) and evaluates the model with
/// a = n_qubits at the fitted T1. Needs >= 3 pairs and positive heights;
/// degenerate inputs come back with converged = false.
T1Extraction t1_from_peak_heights(std::span<const double> heights, std::span<const double> sampling_times,
                                  std::size_t n_qubits, double extra_window = kDefaultExtraWindow);

/// Undoes readout misclassification on a simultaneous-error count:
/// (h - N eps_read0_given1) / (1 - eps_read0_given1 - eps_read1_given0).
double readout_corrected_height(double height, std::size_t n_qubits, double eps_read0_given1,
                                double eps_read1_given0);

struct Heatmap {
  int rows = 0;
  int cols = 0;
  int min_row = 0;
  int min_col = 0;
  std::vector<double> grid;       // rows x cols, NaN where no qubit sits
  std::vector<double> per_qubit;  // device order
  std::size_t n_records = 0;

  double at(int row, int col) const { return grid[static_cast<std::size_t>((row - min_row) * cols + (col - min_col))]; }
};

/// Per-qubit error fraction over records with wall time in
/// [center - width/2, center + width/2), optionally restricted to one slot.
Heatmap heatmap(const Dataset& dataset, double window_center, double window_width = 300e-6,
                std::optional<std::size_t> slot = std::nullopt);

}  // namespace qpburst
