#include "qpburst/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qpburst/errors.hpp"

namespace qpburst::kernels {

namespace {

struct ActiveTerm {
  Vec2 center;
  double amplitude;
  double inv_two_sigma_sq;
};

void check_grid(const RateGridInput& in, std::span<double> out) {
  if (in.qubit_xy.size() != in.baseline_rate.size()) {
    throw InvalidParameter("rate grid: qubit and baseline sizes differ");
  }
  if (out.size() != in.times.size() * in.qubit_xy.size()) {
    throw InvalidParameter("rate grid: output size mismatch");
  }
  if (!in.events.empty() && in.model == nullptr) {
    throw InvalidParameter("rate grid: events given without a footprint model");
  }
}

// Rates for one time point; terms is scratch space.
void rate_row(const RateGridInput& in, double t, std::vector<ActiveTerm>& terms, double* row) {
  terms.clear();
  if (!in.events.empty()) {
    const double horizon = kEventCutoffDecays * in.model->profile.tau_decay;
    // Events are sorted, so only those in (t - horizon, t) can contribute.
    auto first = std::lower_bound(in.events.begin(), in.events.end(), t - horizon,
                                  [](const ImpactEvent& e, double v) { return e.t_impact < v; });
    for (auto it = first; it != in.events.end() && it->t_impact < t; ++it) {
      const auto snap = event_snapshot(*it, *in.model, t);
      if (snap.active && snap.amplitude > 0.0) {
        terms.push_back({it->location, snap.amplitude, 0.5 / snap.sigma_sq_mm2});
      }
    }
  }
  const std::size_t nq = in.qubit_xy.size();
  for (std::size_t q = 0; q < nq; ++q) {
    double x = 0.0;
    for (const auto& term : terms) {
      x += term.amplitude * std::exp(-distance_sq(in.qubit_xy[q], term.center) * term.inv_two_sigma_sq);
    }
    row[q] = in.baseline_rate[q] + in.rate_per_x_qp * x;
  }
}

double tap_norm(double r, std::size_t taps) {
  double s = 0.0;
  double rk = 1.0;
  for (std::size_t k = 0; k < taps; ++k) {
    s += rk * rk;
    rk *= r;
  }
  return s;
}

void check_filter(std::span<const double> x, double r, std::size_t taps, std::span<double> y) {
  if (y.size() != x.size()) throw InvalidParameter("filter: output size mismatch");
  if (!(r > 0.0 && r < 1.0)) throw InvalidParameter("filter: decay ratio must lie in (0, 1)");
  if (taps == 0) throw InvalidParameter("filter: kernel needs at least one tap");
}

}  // namespace

void rate_grid_serial(const RateGridInput& in, std::span<double> out) {
  check_grid(in, out);
  const std::size_t nq = in.qubit_xy.size();
  std::vector<ActiveTerm> terms;
  for (std::size_t it = 0; it < in.times.size(); ++it) {
    rate_row(in, in.times[it], terms, out.data() + it * nq);
  }
}

void rate_grid_parallel(const RateGridInput& in, std::span<double> out) {
  check_grid(in, out);
  const std::size_t nq = in.qubit_xy.size();
  const auto n = static_cast<std::ptrdiff_t>(in.times.size());
#pragma omp parallel
  {
    std::vector<ActiveTerm> terms;
#pragma omp for schedule(static)
    for (std::ptrdiff_t it = 0; it < n; ++it) {
      rate_row(in, in.times[static_cast<std::size_t>(it)], terms,
               out.data() + static_cast<std::size_t>(it) * nq);
    }
  }
}

std::size_t exp_kernel_length(double tau, double dt) {
  if (!(tau > 0.0 && dt > 0.0)) throw InvalidParameter("kernel needs positive tau and spacing");
  return static_cast<std::size_t>(std::floor(5.0 * tau / dt)) + 1;
}

void exp_correlate_serial(std::span<const double> x, double r, std::size_t taps,
                          std::span<double> y) {
  check_filter(x, r, taps, y);
  const double inv_norm = 1.0 / tap_norm(r, taps);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t kmax = std::min(taps, n - i);
    double s = 0.0;
    double rk = 1.0;
    for (std::size_t k = 0; k < kmax; ++k) {
      s += rk * x[i + k];
      rk *= r;
    }
    y[i] = s * inv_norm;
  }
}

void exp_correlate_parallel(std::span<const double> x, double r, std::size_t taps,
                            std::span<double> y) {
  check_filter(x, r, taps, y);
  const double inv_norm = 1.0 / tap_norm(r, taps);
  const double r_taps = std::pow(r, static_cast<double>(taps));
  const std::size_t n = x.size();
  if (n == 0) return;
  const std::size_t block = std::max<std::size_t>(8192, 2 * taps);
  const auto n_blocks = static_cast<std::ptrdiff_t>((n + block - 1) / block);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n_blocks; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * block;
    const std::size_t hi = std::min(n, lo + block);
    // Seed the recursion with a direct sum at the block's last sample.
    const std::size_t last = hi - 1;
    const std::size_t kmax = std::min(taps, n - last);
    double s = 0.0;
    double rk = 1.0;
    for (std::size_t k = 0; k < kmax; ++k) {
      s += rk * x[last + k];
      rk *= r;
    }
    y[last] = s * inv_norm;
    for (std::size_t i = last; i-- > lo;) {
      s = x[i] + r * s;
      if (i + taps < n) s -= r_taps * x[i + taps];
      y[i] = s * inv_norm;
    }
  }
}

}  // namespace qpburst::kernels
