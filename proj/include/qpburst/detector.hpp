#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "qpburst/series.hpp"

namespace qpburst {

/// a exp(-(t - t0) / tau_decay) + c for t >= t0, c before.
struct Template {
  double a = 0.0;
  double c = 0.0;
  double t0 = 0.0;
  double tau_decay = 20e-3;

  double operator()(double t) const;
  double height() const { return a + c; }
};

struct PeakFit {
  double t0 = 0.0;
  double tau_decay = 0.0;
  double height = 0.0;      // a + c
  double amplitude = 0.0;   // a
  double baseline_c = 0.0;  // c
  double residual_rms = 0.0;
  bool converged = false;
  std::size_t n_samples = 0;
};

struct FitWindow {
  double pre = 20e-3;
  double post = 100e-3;
  double neighbor_guard = 20e-3;  // keep this far from adjacent peaks
  double onset_radius = 2e-3;     // t0 is searched within t_peak +- this
};

struct FitBounds {
  double tau_min = 1e-3;
  double tau_max = 200e-3;
};

struct DetectorOptions {
  double filter_tau = 20e-3;
  double threshold = 2.0;
  double release_fraction = 0.5;  // segment closes below threshold * release_fraction
  FitWindow window;
  FitBounds bounds;
  bool parallel = true;
};

/// Mean-subtracted exponential matched filter, unit gain for a template of
/// the filter's own time constant. Throws InvalidInput for non-uniform
/// spacing and InsufficientData when the series is shorter than the kernel.
TimeSeries matched_filter(const TimeSeries& counts, double filter_tau = 20e-3, bool parallel = true);

/// One index per segment, at the segment's maximum (earliest on ties). A
/// segment opens when the series exceeds threshold and closes once it drops
/// to release or below; release defaults to threshold (plain runs above it).
std::vector<std::size_t> find_peak_indices(const TimeSeries& filtered, double threshold = 2.0,
                                           std::optional<double> release = std::nullopt);
std::vector<double> find_peaks(const TimeSeries& filtered, double threshold = 2.0,
                               std::optional<double> release = std::nullopt);

/// Least-squares template fit around t_peak. t0 is searched on the sample
/// grid; for each t0 the linear parameters are solved exactly and tau by a
/// bounded 1-D search, then (a, c, tau) are polished jointly. a is bounded to
/// [0, 2 n_qubits]. Throws InsufficientData for windows under 10 samples.
PeakFit fit_event(const TimeSeries& raw, double t_peak, std::size_t n_qubits,
                  const FitWindow& window = {}, const FitBounds& bounds = {},
                  std::optional<double> prev_peak = std::nullopt,
                  std::optional<double> next_peak = std::nullopt);

/// Filter, threshold, and fit every peak of one count series. Peaks whose
/// window is too small are reported with converged = false.
std::vector<PeakFit> detect_events(const TimeSeries& raw, std::size_t n_qubits,
                                   const DetectorOptions& options = {});

/// Consecutive differences inside each list; nothing across lists.
std::vector<double> inter_event_intervals(const std::vector<std::vector<double>>& peaks_per_dataset);

}  // namespace qpburst
