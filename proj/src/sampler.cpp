#include "qpburst/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "qpburst/cascade.hpp"
#include "qpburst/errors.hpp"
#include "qpburst/kernels.hpp"
#include "qpburst/rng.hpp"

namespace qpburst {

namespace {

constexpr std::int64_t kChunkCycles = 2048;

std::vector<double> trrecs_times() { return {2.0e-6, 1.5e-6, 1.0e-6, 0.5e-6, 0.0}; }

std::int64_t cycles_for(double duration, double cycle_interval) {
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  if (!(cycle_interval > 0.0)) throw ConfigError("cycle interval must be positive");
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(duration / cycle_interval)));
}

// Per-record, per-qubit error probabilities in chunks of whole cycles. The
// callback receives the first record index, the record count and a row-major
// [record][qubit] probability block.
using ChunkSink = std::function<void(std::size_t, std::size_t, std::span<const double>)>;

void for_each_probability_chunk(const DeviceConfig& device, std::span<const ImpactEvent> events,
                                const FootprintModel& model, const SamplingPlan& plan,
                                const ChunkSink& sink) {
  const std::size_t nq = device.n_qubits();
  const std::size_t ns = plan.n_slots();
  const auto baseline = baseline_probabilities(device, plan);

  std::vector<ImpactEvent> sorted(events.begin(), events.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ImpactEvent& a, const ImpactEvent& b) { return a.t_impact < b.t_impact; });
  const double horizon = kEventCutoffDecays * model.profile.tau_decay;

  std::vector<Vec2> xy;
  std::vector<double> base_rate;
  for (const auto& q : device.qubits()) {
    xy.push_back(q.xy_mm);
    base_rate.push_back(1.0 / q.t1_baseline);
  }
  const double k =
      sorted.empty() ? 0.0 : cascade::relaxation_rate_per_x_qp(device.omega_q(), model.material);

  std::vector<double> times;
  std::vector<double> rates;
  std::vector<double> probs;
  for (std::int64_t c0 = 0; c0 < plan.n_cycles; c0 += kChunkCycles) {
    const std::int64_t c1 = std::min(plan.n_cycles, c0 + kChunkCycles);
    const std::size_t n_rec = static_cast<std::size_t>(c1 - c0) * ns;
    const double t_lo = plan.record_time(c0, 0);
    const double t_hi = plan.record_time(c1 - 1, ns - 1);

    bool any_active = false;
    if (plan.prep_state == PrepState::One) {
      auto it = std::lower_bound(sorted.begin(), sorted.end(), t_lo - horizon,
                                 [](const ImpactEvent& e, double v) { return e.t_impact < v; });
      any_active = it != sorted.end() && it->t_impact < t_hi;
    }

    probs.resize(n_rec * nq);
    if (!any_active) {
      for (std::size_t r = 0; r < n_rec; ++r) {
        std::copy(baseline[r % ns].begin(), baseline[r % ns].end(), probs.begin() + r * nq);
      }
    } else {
      times.resize(n_rec);
      for (std::int64_t c = c0; c < c1; ++c) {
        for (std::size_t s = 0; s < ns; ++s) {
          times[static_cast<std::size_t>(c - c0) * ns + s] = plan.record_time(c, s);
        }
      }
      rates.resize(n_rec * nq);
      kernels::RateGridInput in;
      in.qubit_xy = xy;
      in.baseline_rate = base_rate;
      in.rate_per_x_qp = k;
      in.events = sorted;
      in.model = &model;
      in.times = times;
      kernels::rate_grid_parallel(in, rates);
      for (std::size_t r = 0; r < n_rec; ++r) {
        const double t_idle = plan.sampling_times[r % ns] + plan.extra_window;
        for (std::size_t q = 0; q < nq; ++q) {
          const auto& spec = device.qubit(q);
          const double p_decay = -std::expm1(-t_idle * rates[r * nq + q]);
          probs[r * nq + q] = p_decay * (1.0 - spec.eps_read1_given0) +
                              (1.0 - p_decay) * spec.eps_read0_given1;
        }
      }
    }
    sink(static_cast<std::size_t>(c0) * ns, n_rec, probs);
  }
}

}  // namespace

void SamplingPlan::validate() const {
  if (!(cycle_interval > 0.0)) throw ConfigError("cycle_interval must be positive");
  if (sampling_times.empty()) throw ConfigError("sampling plan needs at least one sampling time");
  if (n_cycles < 1) throw ConfigError("n_cycles must be at least 1");
  if (!(extra_window >= 0.0)) throw ConfigError("extra_window must be non-negative");
  for (double t : sampling_times) {
    if (!(t >= 0.0)) throw ConfigError("sampling times must be non-negative");
  }
  const double longest = *std::max_element(sampling_times.begin(), sampling_times.end());
  if (!(cycle_interval > longest)) {
    throw ConfigError("cycle_interval must exceed the longest sampling time");
  }
}

SamplingPlan SamplingPlan::rrecs(double duration, double cycle_interval) {
  SamplingPlan p;
  p.cycle_interval = cycle_interval;
  p.n_cycles = cycles_for(duration, cycle_interval);
  p.validate();
  return p;
}

SamplingPlan SamplingPlan::trrecs(double duration, double cycle_interval) {
  SamplingPlan p;
  p.sampling_times = trrecs_times();
  p.cycle_interval = cycle_interval;
  p.n_cycles = cycles_for(duration, cycle_interval);
  p.validate();
  return p;
}

void Dataset::reserve(std::size_t n_records) {
  cycle_.reserve(n_records);
  slot_.reserve(n_records);
  wall_time_.reserve(n_records);
  bits_.reserve(n_records * n_qubits());
}

void Dataset::append(std::int64_t cycle, std::size_t slot, double wall_time,
                     std::span<const std::uint8_t> bits) {
  if (bits.size() != n_qubits()) {
    throw InvalidInput("record has " + std::to_string(bits.size()) + " bits, expected " +
                       std::to_string(n_qubits()));
  }
  if (slot >= plan_.n_slots()) throw InvalidInput("slot index out of range");
  if (!cycle_.empty()) {
    const bool ordered = cycle > cycle_.back() || (cycle == cycle_.back() && slot > slot_.back());
    if (!ordered) throw InvalidInput("records must be strictly ordered by (cycle, slot)");
  }
  cycle_.push_back(cycle);
  slot_.push_back(slot);
  wall_time_.push_back(wall_time);
  bits_.insert(bits_.end(), bits.begin(), bits.end());
}

std::vector<std::vector<double>> baseline_probabilities(const DeviceConfig& device,
                                                        const SamplingPlan& plan) {
  std::vector<std::vector<double>> out(plan.n_slots());
  for (std::size_t s = 0; s < plan.n_slots(); ++s) {
    for (const auto& q : device.qubits()) {
      const double p_decay =
          decay_error_probability(q.t1_baseline, plan.sampling_times[s], plan.extra_window);
      out[s].push_back(observed_error_probability(p_decay, q, plan.prep_state));
    }
  }
  return out;
}

Dataset run_rrecs(const DeviceConfig& device, std::span<const ImpactEvent> events,
                  const FootprintModel& model, const SamplingPlan& plan, std::uint64_t rng_seed) {
  plan.validate();
  model.validate();
  for (const auto& e : events) {
    if (!model.chip.contains(e.location)) throw ConfigError("event location lies outside the chip");
    if (!(e.deposited_energy > 0.0)) throw ConfigError("event energy must be positive");
  }

  Dataset ds(device, plan);
  ds.seed = rng_seed;
  ds.has_ground_truth = true;
  ds.ground_truth.assign(events.begin(), events.end());
  const std::size_t nq = device.n_qubits();
  const std::size_t ns = plan.n_slots();
  ds.reserve(static_cast<std::size_t>(plan.n_cycles) * ns);

  Rng rng(rng_seed);
  std::vector<std::uint8_t> bits(nq);
  for_each_probability_chunk(device, events, model, plan,
                             [&](std::size_t first, std::size_t n, std::span<const double> p) {
                               for (std::size_t r = 0; r < n; ++r) {
                                 for (std::size_t q = 0; q < nq; ++q) {
                                   bits[q] = rng.uniform() < p[r * nq + q] ? 1 : 0;
                                 }
                                 const std::size_t idx = first + r;
                                 const auto cycle = static_cast<std::int64_t>(idx / ns);
                                 const std::size_t slot = idx % ns;
                                 ds.append(cycle, slot, plan.record_time(cycle, slot), bits);
                               }
                             });
  return ds;
}

std::vector<double> expected_error_counts(const Dataset& dataset, const FootprintModel& model) {
  if (!dataset.has_ground_truth) throw InvalidInput("dataset carries no ground-truth events");
  const std::size_t nq = dataset.n_qubits();
  const auto& plan = dataset.plan();
  if (dataset.n_records() != static_cast<std::size_t>(plan.n_cycles) * plan.n_slots()) {
    throw InvalidInput("dataset records do not cover the full sampling plan");
  }
  std::vector<double> out(static_cast<std::size_t>(plan.n_cycles) * plan.n_slots());
  for_each_probability_chunk(dataset.device(), dataset.ground_truth, model, plan,
                             [&](std::size_t first, std::size_t n, std::span<const double> p) {
                               for (std::size_t r = 0; r < n; ++r) {
                                 double s = 0.0;
                                 for (std::size_t q = 0; q < nq; ++q) s += p[r * nq + q];
                                 out[first + r] = s;
                               }
                             });
  return out;
}

std::vector<TimeSeries> error_counts(const Dataset& dataset) {
  if (dataset.n_records() == 0) throw InsufficientData("dataset has no records");
  std::vector<TimeSeries> out(dataset.plan().n_slots());
  const std::size_t nq = dataset.n_qubits();
  const auto bits = dataset.bits();
  for (std::size_t i = 0; i < dataset.n_records(); ++i) {
    int count = 0;
    for (std::size_t q = 0; q < nq; ++q) count += bits[i * nq + q];
    auto& s = out[dataset.slots()[i]];
    s.t.push_back(dataset.wall_times()[i]);
    s.y.push_back(count);
  }
  return out;
}

}  // namespace qpburst
