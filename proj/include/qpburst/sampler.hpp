#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qpburst/device.hpp"
#include "qpburst/impact.hpp"
#include "qpburst/series.hpp"

namespace qpburst {

struct SamplingPlan {
  PrepState prep_state = PrepState::One;
  std::vector<double> sampling_times{1e-6};  // s, one per slot
  double cycle_interval = 100e-6;
  std::int64_t n_cycles = 1;
  double extra_window = kDefaultExtraWindow;

  /// Throws ConfigError on a non-positive interval, an empty slot list,
  /// negative sampling times, n_cycles < 1, or max(sampling_times) >= interval.
  void validate() const;

  std::size_t n_slots() const { return sampling_times.size(); }

  /// Slots are spread evenly across the cycle.
  double slot_offset(std::size_t slot) const {
    return cycle_interval * static_cast<double>(slot) / static_cast<double>(n_slots());
  }

  double record_time(std::int64_t cycle, std::size_t slot) const {
    return static_cast<double>(cycle) * cycle_interval + slot_offset(slot);
  }

  /// Single 1 us slot covering duration.
  static SamplingPlan rrecs(double duration, double cycle_interval = 100e-6);
  /// Five slots at 2.0, 1.5, 1.0, 0.5, 0.0 us.
  static SamplingPlan trrecs(double duration, double cycle_interval = 100e-6);
};

struct MeasurementRecord {
  std::int64_t cycle_index = 0;
  double wall_time = 0.0;
  std::size_t sampling_time_index = 0;
  std::span<const std::uint8_t> error_bits;
};

/// Columnar record store: record i has bits[i * n_qubits, (i + 1) * n_qubits).
class Dataset {
 public:
  Dataset(DeviceConfig device, SamplingPlan plan) : device_(std::move(device)), plan_(std::move(plan)) {}

  const DeviceConfig& device() const { return device_; }
  const SamplingPlan& plan() const { return plan_; }
  std::size_t n_qubits() const { return device_.n_qubits(); }
  std::size_t n_records() const { return wall_time_.size(); }

  MeasurementRecord record(std::size_t i) const {
    return {cycle_[i], wall_time_[i], slot_[i],
            std::span<const std::uint8_t>(bits_).subspan(i * n_qubits(), n_qubits())};
  }

  /// Appends one record; throws InvalidInput if it breaks (cycle, slot) order
  /// or has the wrong bit count.
  void append(std::int64_t cycle, std::size_t slot, double wall_time,
              std::span<const std::uint8_t> bits);
  void reserve(std::size_t n_records);

  std::span<const std::int64_t> cycles() const { return cycle_; }
  std::span<const std::size_t> slots() const { return slot_; }
  std::span<const double> wall_times() const { return wall_time_; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  std::uint64_t seed = 0;
  bool has_ground_truth = false;
  std::vector<ImpactEvent> ground_truth;

 private:
  DeviceConfig device_;
  SamplingPlan plan_;
  std::vector<std::int64_t> cycle_;
  std::vector<std::size_t> slot_;
  std::vector<double> wall_time_;
  std::vector<std::uint8_t> bits_;
};

/// Bernoulli-samples every (cycle, slot, qubit) from the T1 the events imply at
/// that record's wall time. One RNG stream per dataset; bit-identical output
/// for a fixed seed regardless of thread count.
Dataset run_rrecs(const DeviceConfig& device, std::span<const ImpactEvent> events,
                  const FootprintModel& model, const SamplingPlan& plan, std::uint64_t rng_seed);

/// Expected simultaneous error count per record (sum of per-qubit
/// probabilities), recomputed from the dataset's ground-truth events.
std::vector<double> expected_error_counts(const Dataset& dataset, const FootprintModel& model);

/// One (time, count) series per sampling-time slot.
std::vector<TimeSeries> error_counts(const Dataset& dataset);

/// Per-qubit observed error probabilities with no events present, per slot.
std::vector<std::vector<double>> baseline_probabilities(const DeviceConfig& device,
                                                        const SamplingPlan& plan);

}  // namespace qpburst
