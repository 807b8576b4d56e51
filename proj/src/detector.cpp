#include "qpburst/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <boost/math/tools/minima.hpp>

#include "qpburst/errors.hpp"
#include "qpburst/kernels.hpp"
#include "qpburst/lsq.hpp"

namespace qpburst {

namespace {

constexpr double kSpacingTolerance = 1e-6;
constexpr std::size_t kMinFitSamples = 10;
constexpr int kTauGridPoints = 24;
constexpr std::size_t kCoarseCandidates = 40;

double uniform_spacing(const std::vector<double>& t) {
  if (t.size() < 2) throw InsufficientData("series needs at least two samples");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(dt > 0.0)) throw InvalidInput("series times must increase");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - dt) > kSpacingTolerance * dt) {
      throw InvalidInput("series is not uniformly spaced near t = " + std::to_string(t[i]));
    }
  }
  return dt;
}

struct LinearSolution {
  double a = 0.0;
  double c = 0.0;
  double sse = std::numeric_limits<double>::infinity();
};

// Samples of the fit window and the exact (a, c) solve for fixed (t0, tau).
struct FitProblem {
  std::vector<double> t;
  std::vector<double> y;
  double a_max = 0.0;
  double sum_y = 0.0;

  LinearSolution solve(std::size_t j0, double tau) const {
    const std::size_t n = t.size();
    const double t0 = t[j0];
    double s_ee = 0.0, s_e = 0.0, s_ey = 0.0;
    for (std::size_t i = j0; i < n; ++i) {
      const double e = std::exp(-(t[i] - t0) / tau);
      s_ee += e * e;
      s_e += e;
      s_ey += e * y[i];
    }
    const double nn = static_cast<double>(n);
    LinearSolution s;
    const double det = s_ee * nn - s_e * s_e;
    if (det > 0.0) {
      s.a = (s_ey * nn - s_e * sum_y) / det;
      s.c = (s_ee * sum_y - s_e * s_ey) / det;
    }
    if (!(det > 0.0) || s.a < 0.0) {
      s.a = 0.0;
      s.c = sum_y / nn;
    } else if (s.a > a_max) {
      s.a = a_max;
      s.c = (sum_y - a_max * s_e) / nn;
    }
    s.sse = sse(j0, tau, s.a, s.c);
    return s;
  }

  double sse(std::size_t j0, double tau, double a, double c) const {
    const double t0 = t[j0];
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double model = i >= j0 ? a * std::exp(-(t[i] - t0) / tau) + c : c;
      const double r = y[i] - model;
      acc += r * r;
    }
    return acc;
  }
};

struct OnsetFit {
  LinearSolution lin;
  double tau = 0.0;
};

OnsetFit best_tau(const FitProblem& p, std::size_t j0, const FitBounds& b) {
  const double lo = std::log(b.tau_min);
  const double hi = std::log(b.tau_max);
  auto cost = [&](double log_tau) { return p.solve(j0, std::exp(log_tau)).sse; };

  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  const double step = (hi - lo) / (kTauGridPoints - 1);
  for (int k = 0; k < kTauGridPoints; ++k) {
    const double c = cost(lo + step * k);
    if (c < best_cost) {
      best_cost = c;
      best = k;
    }
  }
  const double br_lo = lo + step * std::max(0, best - 1);
  const double br_hi = lo + step * std::min(kTauGridPoints - 1, best + 1);
  std::uintmax_t max_iter = 200;
  const auto [x, fx] = boost::math::tools::brent_find_minima(cost, br_lo, br_hi,
                                                             std::numeric_limits<double>::digits / 2,
                                                             max_iter);
  OnsetFit f;
  f.tau = fx <= best_cost ? std::exp(x) : std::exp(lo + step * best);
  f.lin = p.solve(j0, f.tau);
  return f;
}

bool at_bound(double v, double bound) { return std::abs(v - bound) <= 1e-6 * std::abs(bound); }

}  // namespace

double Template::operator()(double t) const {
  return t >= t0 ? a * std::exp(-(t - t0) / tau_decay) + c : c;
}

TimeSeries matched_filter(const TimeSeries& counts, double filter_tau, bool parallel) {
  if (counts.t.size() != counts.y.size()) throw InvalidInput("series time and value sizes differ");
  const double dt = uniform_spacing(counts.t);
  const std::size_t taps = kernels::exp_kernel_length(filter_tau, dt);
  if (counts.size() < taps) {
    throw InsufficientData("series shorter than the matched-filter kernel (" + std::to_string(taps) +
                           " samples)");
  }
  const double mean =
      std::accumulate(counts.y.begin(), counts.y.end(), 0.0) / static_cast<double>(counts.size());
  std::vector<double> centred(counts.size());
  std::transform(counts.y.begin(), counts.y.end(), centred.begin(), [mean](double v) { return v - mean; });

  TimeSeries out;
  out.t = counts.t;
  out.y.resize(counts.size());
  const double r = std::exp(-dt / filter_tau);
  if (parallel) {
    kernels::exp_correlate_parallel(centred, r, taps, out.y);
  } else {
    kernels::exp_correlate_serial(centred, r, taps, out.y);
  }
  return out;
}

std::vector<std::size_t> find_peak_indices(const TimeSeries& filtered, double threshold,
                                           std::optional<double> release) {
  const double lo = release.value_or(threshold);
  if (lo > threshold) throw InvalidParameter("release level must not exceed the threshold");
  std::vector<std::size_t> peaks;
  const auto& y = filtered.y;
  std::size_t i = 0;
  while (i < y.size()) {
    if (!(y[i] > threshold)) {
      ++i;
      continue;
    }
    std::size_t best = i;
    for (; i < y.size() && y[i] > lo; ++i) {
      if (y[i] > y[best]) best = i;
    }
    peaks.push_back(best);
  }
  return peaks;
}

std::vector<double> find_peaks(const TimeSeries& filtered, double threshold, std::optional<double> release) {
  std::vector<double> times;
  for (auto i : find_peak_indices(filtered, threshold, release)) times.push_back(filtered.t[i]);
  return times;
}

PeakFit fit_event(const TimeSeries& raw, double t_peak, std::size_t n_qubits, const FitWindow& window,
                  const FitBounds& bounds, std::optional<double> prev_peak,
                  std::optional<double> next_peak) {
  if (raw.t.size() != raw.y.size()) throw InvalidInput("series time and value sizes differ");
  if (!(bounds.tau_min > 0.0 && bounds.tau_max > bounds.tau_min)) {
    throw InvalidParameter("tau bounds must satisfy 0 < tau_min < tau_max");
  }
  double start = t_peak - window.pre;
  double stop = t_peak + window.post;
  if (prev_peak) start = std::max(start, *prev_peak + window.neighbor_guard);
  if (next_peak) stop = std::min(stop, *next_peak - window.neighbor_guard);

  const auto lo = static_cast<std::size_t>(std::lower_bound(raw.t.begin(), raw.t.end(), start) - raw.t.begin());
  const auto hi = static_cast<std::size_t>(std::upper_bound(raw.t.begin(), raw.t.end(), stop) - raw.t.begin());
  if (hi <= lo || hi - lo < kMinFitSamples) {
    throw InsufficientData("fit window around t = " + std::to_string(t_peak) + " s has fewer than " +
                           std::to_string(kMinFitSamples) + " samples");
  }

  FitProblem p;
  p.t.assign(raw.t.begin() + static_cast<std::ptrdiff_t>(lo), raw.t.begin() + static_cast<std::ptrdiff_t>(hi));
  p.y.assign(raw.y.begin() + static_cast<std::ptrdiff_t>(lo), raw.y.begin() + static_cast<std::ptrdiff_t>(hi));
  p.a_max = 2.0 * static_cast<double>(n_qubits);
  p.sum_y = std::accumulate(p.y.begin(), p.y.end(), 0.0);
  const std::size_t n = p.t.size();

  // Onset candidates: samples near t_peak that leave a few points after them.
  const auto first_it = std::lower_bound(p.t.begin(), p.t.end(), t_peak - window.onset_radius);
  const auto last_it = std::upper_bound(p.t.begin(), p.t.end(), t_peak + window.onset_radius);
  std::size_t c_lo = static_cast<std::size_t>(first_it - p.t.begin());
  std::size_t c_hi = static_cast<std::size_t>(last_it - p.t.begin());
  c_hi = std::min(c_hi, n - 3);
  if (c_hi <= c_lo) {
    c_lo = std::min(c_lo, n - 3);
    c_hi = c_lo + 1;
  }

  std::map<std::size_t, OnsetFit> tried;
  auto eval = [&](std::size_t j) -> const OnsetFit& {
    auto it = tried.find(j);
    if (it == tried.end()) it = tried.emplace(j, best_tau(p, j, bounds)).first;
    return it->second;
  };
  auto best_of = [&](std::size_t from, std::size_t to, std::size_t stride, std::size_t best) {
    for (std::size_t j = from; j < to; j += stride) {
      if (eval(j).lin.sse < eval(best).lin.sse) best = j;
    }
    if (eval(to - 1).lin.sse < eval(best).lin.sse) best = to - 1;
    return best;
  };

  std::size_t stride = std::max<std::size_t>(1, (c_hi - c_lo + kCoarseCandidates - 1) / kCoarseCandidates);
  std::size_t j_best = best_of(c_lo, c_hi, stride, c_lo);
  while (stride > 1) {
    const std::size_t next = std::max<std::size_t>(1, stride / 4);
    const std::size_t from = j_best > c_lo + stride ? j_best - stride : c_lo;
    const std::size_t to = std::min(c_hi, j_best + stride + 1);
    j_best = best_of(from, to, next, j_best);
    stride = next;
  }

  const OnsetFit vp = eval(j_best);
  double a = vp.lin.a;
  double c = vp.lin.c;
  double tau = vp.tau;
  double sse = vp.lin.sse;
  const double t0 = p.t[j_best];

  // Joint polish of (a, c, tau) at the chosen onset.
  if (a > 0.0 && a < p.a_max) {
    lsq::Problem prob;
    prob.n_params = 3;
    prob.n_residuals = n;
    prob.residuals = [&](std::span<const double> x, std::span<double> r) {
      for (std::size_t i = 0; i < n; ++i) {
        const double e = i >= j_best ? std::exp(-(p.t[i] - t0) / x[2]) : 0.0;
        r[i] = x[0] * e + x[1] - p.y[i];
      }
    };
    prob.jacobian = [&](std::span<const double> x, std::span<double> jac) {
      for (std::size_t i = 0; i < n; ++i) {
        const double dtt = p.t[i] - t0;
        const double e = i >= j_best ? std::exp(-dtt / x[2]) : 0.0;
        jac[i * 3 + 0] = e;
        jac[i * 3 + 1] = 1.0;
        jac[i * 3 + 2] = x[0] * e * dtt / (x[2] * x[2]);
      }
    };
    const auto res = lsq::levenberg_marquardt(prob, {a, c, tau});
    const double ta = res.x[0], tc = res.x[1], tt = res.x[2];
    if (res.converged && ta >= 0.0 && ta <= p.a_max && tt >= bounds.tau_min && tt <= bounds.tau_max) {
      const double s = p.sse(j_best, tt, ta, tc);
      if (s <= sse) {
        a = ta;
        c = tc;
        tau = tt;
        sse = s;
      }
    }
  }

  PeakFit fit;
  fit.t0 = t0;
  fit.tau_decay = tau;
  fit.amplitude = a;
  fit.baseline_c = c;
  fit.height = a + c;
  fit.residual_rms = std::sqrt(sse / static_cast<double>(n));
  fit.n_samples = n;
  const bool finite = std::isfinite(a) && std::isfinite(c) && std::isfinite(tau) && std::isfinite(sse);
  fit.converged = finite && a > 0.0 && a < p.a_max && !at_bound(tau, bounds.tau_min) &&
                  !at_bound(tau, bounds.tau_max);
  return fit;
}

std::vector<PeakFit> detect_events(const TimeSeries& raw, std::size_t n_qubits,
                                   const DetectorOptions& options) {
  const auto filtered = matched_filter(raw, options.filter_tau, options.parallel);
  const auto peaks = find_peaks(filtered, options.threshold, options.threshold * options.release_fraction);
  std::vector<PeakFit> fits;
  fits.reserve(peaks.size());
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    std::optional<double> prev, next;
    if (k > 0) prev = peaks[k - 1];
    if (k + 1 < peaks.size()) next = peaks[k + 1];
    try {
      fits.push_back(fit_event(raw, peaks[k], n_qubits, options.window, options.bounds, prev, next));
    } catch (const InsufficientData&) {
      PeakFit f;
      f.t0 = peaks[k];
      f.converged = false;
      fits.push_back(f);
    }
  }
  return fits;
}

std::vector<double> inter_event_intervals(const std::vector<std::vector<double>>& peaks_per_dataset) {
  std::vector<double> out;
  for (const auto& peaks : peaks_per_dataset) {
    for (std::size_t i = 1; i < peaks.size(); ++i) out.push_back(peaks[i] - peaks[i - 1]);
  }
  return out;
}

}  // namespace qpburst
