#include "qpburst/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/tools/minima.hpp>

#include "qpburst/errors.hpp"
#include "qpburst/lsq.hpp"
#include "qpburst/rng.hpp"

namespace qpburst {

namespace {

constexpr double kMinExpectedPerBin = 5.0;
constexpr double kTailQuantile = 0.9999;
constexpr double kMinRelativeSpread = 1e-6;

}  // namespace

double CountDistribution::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) m += static_cast<double>(k) * pmf[k];
  return m;
}

double CountDistribution::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    const double d = static_cast<double>(k) - m;
    v += d * d * pmf[k];
  }
  return v;
}

std::size_t CountDistribution::quantile(double q) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    acc += pmf[k];
    if (acc >= q) return k;
  }
  return support_max;
}

CountDistribution poisson_binomial(std::span<const double> p) {
  CountDistribution d;
  d.support_max = p.size();
  d.pmf.assign(p.size() + 1, 0.0);
  d.pmf[0] = 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw InvalidParameter("probabilities must lie in [0, 1]");
    for (std::size_t k = i + 1; k > 0; --k) {
      d.pmf[k] = d.pmf[k] * (1.0 - p[i]) + d.pmf[k - 1] * p[i];
    }
    d.pmf[0] *= 1.0 - p[i];
  }
  return d;
}

CountDistribution independent_count_pmf(const DeviceConfig& device, const SamplingPlan& plan,
                                        std::size_t slot) {
  plan.validate();
  if (slot >= plan.n_slots()) throw InvalidParameter("slot index out of range");
  const auto probs = baseline_probabilities(device, plan);
  return poisson_binomial(probs[slot]);
}

HistogramComparison histogram_comparison(std::span<const double> counts, const CountDistribution& model) {
  if (counts.empty()) throw InsufficientData("histogram needs at least one count");
  const std::size_t support = model.pmf.size();
  HistogramComparison h;
  h.observed.assign(support, 0.0);
  for (double c : counts) {
    const double r = std::round(c);
    if (!(r >= 0.0) || r > static_cast<double>(model.support_max) || r != c) {
      throw InvalidInput("count " + std::to_string(c) + " outside the model support");
    }
    h.observed[static_cast<std::size_t>(r)] += 1.0;
  }
  const double n = static_cast<double>(counts.size());
  std::vector<double> raw = h.observed;
  for (auto& v : h.observed) v /= n;

  for (std::size_t k = 0; k < support; ++k) {
    h.total_variation += 0.5 * std::abs(h.observed[k] - model.pmf[k]);
  }

  // Pool consecutive bins so every group expects enough counts; a short
  // trailing group joins the previous one.
  std::vector<std::pair<double, double>> groups;  // (observed, expected)
  double obs = 0.0, exp = 0.0;
  for (std::size_t k = 0; k < support; ++k) {
    obs += raw[k];
    exp += n * model.pmf[k];
    if (exp >= kMinExpectedPerBin) {
      groups.emplace_back(obs, exp);
      obs = exp = 0.0;
    }
  }
  if (obs > 0.0 || exp > 0.0) {
    if (groups.empty()) {
      groups.emplace_back(obs, exp);
    } else {
      groups.back().first += obs;
      groups.back().second += exp;
    }
  }
  for (const auto& [o, e] : groups) {
    if (e > 0.0) h.chi_square += (o - e) * (o - e) / e;
  }
  h.chi_square_dof = groups.empty() ? 0 : groups.size() - 1;

  h.tail_threshold = model.quantile(kTailQuantile);
  double obs_tail = 0.0, model_tail = 0.0;
  for (std::size_t k = h.tail_threshold + 1; k < support; ++k) {
    obs_tail += h.observed[k];
    model_tail += model.pmf[k];
  }
  h.excess_tail_mass = std::max(0.0, obs_tail - model_tail);
  return h;
}

double ks_statistic_exponential(std::span<const double> sample, double lambda) {
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = -std::expm1(-lambda * x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

PoissonFit poisson_rate_fit(std::span<const double> intervals, std::uint64_t seed, int resamples) {
  if (intervals.size() < 2) throw InsufficientData("rate fit needs at least two intervals");
  if (resamples < 1) throw InvalidParameter("resamples must be positive");
  for (double v : intervals) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("intervals must be positive and finite");
  }
  PoissonFit fit;
  fit.n_intervals = intervals.size();
  const double mean = std::accumulate(intervals.begin(), intervals.end(), 0.0) /
                      static_cast<double>(intervals.size());
  fit.lambda_mle = 1.0 / mean;
  fit.ks_statistic = ks_statistic_exponential(intervals, fit.lambda_mle);

  // The statistic is scale-free, so replicates are drawn from Exp(1).
  const std::size_t n = intervals.size();
  std::vector<double> replicate(static_cast<std::size_t>(resamples));
#pragma omp parallel
  {
    std::vector<double> draw(n);
#pragma omp for schedule(static)
    for (int r = 0; r < resamples; ++r) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
      double s = 0.0;
      for (auto& v : draw) {
        v = rng.exponential(1.0);
        s += v;
      }
      replicate[static_cast<std::size_t>(r)] =
          ks_statistic_exponential(draw, static_cast<double>(n) / s);
    }
  }
  const auto exceed = std::count_if(replicate.begin(), replicate.end(),
                                    [&](double d) { return d >= fit.ks_statistic; });
  fit.ks_pvalue = static_cast<double>(1 + exceed) / static_cast<double>(1 + resamples);
  return fit;
}

T1Extraction t1_from_peak_heights(std::span<const double> heights, std::span<const double> sampling_times,
                                  std::size_t n_qubits, double extra_window) {
  if (heights.size() != sampling_times.size()) throw InvalidInput("heights and times differ in length");
  if (heights.size() < 3) throw InsufficientData("T1 extraction needs at least three slots");
  if (!(extra_window >= 0.0)) throw InvalidParameter("extra_window must be non-negative");
  for (std::size_t i = 0; i < heights.size(); ++i) {
    if (!(heights[i] > 0.0) || !std::isfinite(heights[i])) throw InvalidInput("heights must be positive");
    if (!(sampling_times[i] >= 0.0)) throw InvalidInput("sampling times must be non-negative");
  }

  std::vector<std::size_t> order(heights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sampling_times[a] < sampling_times[b] ||
           (sampling_times[a] == sampling_times[b] && heights[a] < heights[b]);
  });
  T1Extraction out;
  std::vector<double> tp;
  for (auto i : order) {
    out.heights.push_back(heights[i]);
    out.sampling_times.push_back(sampling_times[i]);
    tp.push_back(sampling_times[i] + extra_window);
  }
  const std::size_t m = tp.size();
  const double nq = static_cast<double>(n_qubits);

  auto zero_param_sse = [&](double t1) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = out.heights[i] + nq * std::expm1(-tp[i] / t1);
      s += r * r;
    }
    return s;
  };

  // Start from the best zero-parameter T1 on a log grid, refined by Brent.
  const double lo = std::log(kT1FitMin), hi = std::log(kT1FitMax);
  constexpr int kGrid = 64;
  const double step = (hi - lo) / (kGrid - 1);
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kGrid; ++k) {
    const double s = zero_param_sse(std::exp(lo + step * k));
    if (s < best_sse) {
      best_sse = s;
      best = k;
    }
  }
  std::uintmax_t iters = 200;
  const auto [lt, fx] = boost::math::tools::brent_find_minima(
      [&](double l) { return zero_param_sse(std::exp(l)); }, lo + step * std::max(0, best - 1),
      lo + step * std::min(kGrid - 1, best + 1), std::numeric_limits<double>::digits / 2, iters);
  const double t1_init = fx <= best_sse ? std::exp(lt) : std::exp(lo + step * best);

  // Two-parameter fit in (a, log T1).
  lsq::Problem prob;
  prob.n_params = 2;
  prob.n_residuals = m;
  prob.residuals = [&](std::span<const double> x, std::span<double> r) {
    const double t1 = std::exp(x[1]);
    for (std::size_t i = 0; i < m; ++i) r[i] = -x[0] * std::expm1(-tp[i] / t1) - out.heights[i];
  };
  prob.jacobian = [&](std::span<const double> x, std::span<double> jac) {
    const double t1 = std::exp(x[1]);
    for (std::size_t i = 0; i < m; ++i) {
      const double e = std::exp(-tp[i] / t1);
      jac[i * 2 + 0] = -std::expm1(-tp[i] / t1);
      jac[i * 2 + 1] = -x[0] * e * tp[i] / t1;
    }
  };
  const auto res = lsq::levenberg_marquardt(prob, {nq, std::log(t1_init)});
  out.amplitude_a = res.x[0];
  out.t1_avg = std::exp(res.x[1]);
  out.fit_rms = res.rms;
  out.zero_param_residual = std::sqrt(zero_param_sse(out.t1_avg) / static_cast<double>(m));

  const bool finite = std::isfinite(out.t1_avg) && std::isfinite(out.amplitude_a);
  const bool inside = out.t1_avg > kT1FitMin * (1.0 + 1e-6) && out.t1_avg < kT1FitMax * (1.0 - 1e-6);
  // With fewer than two distinct times T1 is not identifiable.
  const bool distinct = out.sampling_times.front() != out.sampling_times.back();
  // A curve already saturated at the shortest time carries no T1 information.
  const double spread = std::exp(-tp.front() / out.t1_avg) * -std::expm1(-(tp.back() - tp.front()) / out.t1_avg);
  const bool identifiable = spread > kMinRelativeSpread;
  out.converged = res.converged && finite && inside && distinct && identifiable && out.amplitude_a > 0.0;
  if (!inside) out.t1_avg = std::clamp(out.t1_avg, kT1FitMin, kT1FitMax);
  return out;
}

double readout_corrected_height(double height, std::size_t n_qubits, double eps_read0_given1,
                                double eps_read1_given0) {
  const double denom = 1.0 - eps_read0_given1 - eps_read1_given0;
  if (!(denom > 0.0)) throw InvalidParameter("readout error rates must sum below 1");
  return (height - static_cast<double>(n_qubits) * eps_read0_given1) / denom;
}

Heatmap heatmap(const Dataset& dataset, double window_center, double window_width,
                std::optional<std::size_t> slot) {
  if (!(window_width > 0.0)) throw InvalidParameter("window width must be positive");
  const auto& dev = dataset.device();
  const std::size_t nq = dev.n_qubits();
  const double lo = window_center - 0.5 * window_width;
  const double hi = window_center + 0.5 * window_width;
  const auto times = dataset.wall_times();
  const auto first = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), lo) - times.begin());
  const auto last = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), hi) - times.begin());

  Heatmap h;
  h.rows = dev.grid_rows();
  h.cols = dev.grid_cols();
  h.min_row = dev.min_row();
  h.min_col = dev.min_col();
  h.per_qubit.assign(nq, 0.0);
  const auto bits = dataset.bits();
  for (std::size_t i = first; i < last; ++i) {
    if (slot && dataset.slots()[i] != *slot) continue;
    for (std::size_t q = 0; q < nq; ++q) h.per_qubit[q] += bits[i * nq + q];
    ++h.n_records;
  }
  if (h.n_records == 0) throw InsufficientData("heatmap window contains no records");
  for (auto& v : h.per_qubit) v /= static_cast<double>(h.n_records);
  h.grid.assign(static_cast<std::size_t>(h.rows * h.cols), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t q = 0; q < nq; ++q) {
    const auto& g = dev.qubit(q).grid_pos;
    h.grid[static_cast<std::size_t>((g.row - h.min_row) * h.cols + (g.col - h.min_col))] = h.per_qubit[q];
  }
  return h;
}

}  // namespace qpburst
