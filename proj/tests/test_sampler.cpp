#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "qpburst/errors.hpp"
#include "qpburst/sampler.hpp"

using namespace qpburst;

namespace {

DeviceConfig with_readout(double eps01, double eps10) {
  const auto base = DeviceConfig::default_device();
  std::vector<QubitSpec> qs(base.qubits().begin(), base.qubits().end());
  for (auto& q : qs) {
    q.eps_read1_given0 = eps01;
    q.eps_read0_given1 = eps10;
  }
  return DeviceConfig::make(qs, base.chip(), base.qubit_pitch_mm(), base.omega_q());
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST_CASE("plan validation") {
  auto plan = SamplingPlan::rrecs(1.0);
  CHECK(plan.n_cycles == 10000);
  CHECK_NOTHROW(plan.validate());
  plan.cycle_interval = 0.5e-6;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = SamplingPlan::rrecs(1.0);
  plan.n_cycles = 0;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = SamplingPlan::rrecs(1.0);
  plan.sampling_times.clear();
  CHECK_THROWS_AS(plan.validate(), ConfigError);

  const auto tr = SamplingPlan::trrecs(1.0);
  REQUIRE(tr.n_slots() == 5);
  CHECK(tr.sampling_times[0] == doctest::Approx(2e-6));
  CHECK(tr.sampling_times[4] == 0.0);
  CHECK(tr.record_time(3, 2) == doctest::Approx(3 * 100e-6 + 40e-6));

  const auto dev = DeviceConfig::default_device();
  auto bad = SamplingPlan::rrecs(1.0);
  bad.cycle_interval = 1e-6;
  CHECK_THROWS_AS(run_rrecs(dev, {}, FootprintModel{}, bad, 1), ConfigError);
}

TEST_CASE("event-free baseline count") {
  const auto dev = DeviceConfig::default_device();
  const auto plan = SamplingPlan::rrecs(10.0);
  const auto ds = run_rrecs(dev, {}, FootprintModel{}, plan, 99);
  REQUIRE(ds.n_records() == 100000);
  const auto probs = baseline_probabilities(dev, plan);
  double mu = 0.0, var = 0.0;
  for (double p : probs[0]) {
    mu += p;
    var += p * (1.0 - p);
  }
  const auto counts = error_counts(ds);
  REQUIRE(counts.size() == 1);
  const double m = mean_of(counts[0].y);
  CHECK(std::abs(m - mu) < 3.0 * std::sqrt(var / counts[0].size()));

  // Sum of per-qubit empirical rates equals the mean count.
  std::vector<double> per_qubit(dev.n_qubits(), 0.0);
  const auto bits = ds.bits();
  for (std::size_t i = 0; i < ds.n_records(); ++i) {
    for (std::size_t q = 0; q < dev.n_qubits(); ++q) per_qubit[q] += bits[i * dev.n_qubits() + q];
  }
  const double rate_sum = std::accumulate(per_qubit.begin(), per_qubit.end(), 0.0) / ds.n_records();
  CHECK(rate_sum == doctest::Approx(m).epsilon(1e-12));

  const auto expected = expected_error_counts(ds, FootprintModel{});
  CHECK(expected.front() == doctest::Approx(mu).epsilon(1e-12));
  CHECK(expected.back() == doctest::Approx(mu).epsilon(1e-12));
}

TEST_CASE("prep ZERO with perfect readout gives no errors") {
  const auto dev = with_readout(0.0, 0.02);
  auto plan = SamplingPlan::rrecs(2.0);
  plan.prep_state = PrepState::Zero;
  const std::vector<ImpactEvent> ev{{1.0, {5.0, 5.0}, 1e6, EventKind::Muon}};
  const auto ds = run_rrecs(dev, ev, FootprintModel{}, plan, 5);
  const auto bits = ds.bits();
  CHECK(std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b == 0; }));
  for (const auto& s : error_counts(ds)) CHECK(std::all_of(s.y.begin(), s.y.end(), [](double c) { return c == 0.0; }));
}

TEST_CASE("a 100 keV event raises the count") {
  const auto dev = DeviceConfig::default_device();
  const auto plan = SamplingPlan::rrecs(60.0);
  const std::vector<ImpactEvent> ev{{30.0, {5.0, 5.0}, 100e3, EventKind::Gamma}};
  const auto ds = run_rrecs(dev, ev, FootprintModel{}, plan, 17);
  CHECK(ds.has_ground_truth);
  REQUIRE(ds.ground_truth.size() == 1);
  const auto s = error_counts(ds)[0];
  double base = 0.0, peak = 0.0;
  std::size_t nb = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.t[i] < 29.0) {
      base += s.y[i];
      ++nb;
    } else if (s.t[i] >= 30.0 && s.t[i] < 30.1) {
      peak = std::max(peak, s.y[i]);
    }
  }
  base /= nb;
  CHECK(peak >= 2.0 * base);
  for (double c : s.y) {
    CHECK(c >= 0.0);
    CHECK(c <= 26.0);
  }
}

TEST_CASE("determinism") {
  const auto dev = DeviceConfig::default_device();
  const auto plan = SamplingPlan::trrecs(3.0);
  const auto ev = sample_events(3.0, 1.0, EnergyDistribution{}, 4);
  const auto a = run_rrecs(dev, ev, FootprintModel{}, plan, 1234);
  const auto b = run_rrecs(dev, ev, FootprintModel{}, plan, 1234);
  const auto c = run_rrecs(dev, ev, FootprintModel{}, plan, 1235);
  CHECK(std::equal(a.bits().begin(), a.bits().end(), b.bits().begin(), b.bits().end()));
  CHECK_FALSE(std::equal(a.bits().begin(), a.bits().end(), c.bits().begin(), c.bits().end()));
  CHECK(std::equal(a.wall_times().begin(), a.wall_times().end(), b.wall_times().begin()));
}

TEST_CASE("T-RReCS baselines rise with sampling time") {
  const auto dev = DeviceConfig::default_device();
  const auto plan = SamplingPlan::trrecs(1.0);
  const auto probs = baseline_probabilities(dev, plan);
  REQUIRE(probs.size() == 5);
  // Slots run from the longest sampling time to the shortest.
  for (std::size_t s = 1; s < 5; ++s) {
    for (std::size_t q = 0; q < dev.n_qubits(); ++q) CHECK(probs[s][q] <= probs[s - 1][q]);
  }
  const auto ds = run_rrecs(dev, {}, FootprintModel{}, plan, 3);
  const auto series = error_counts(ds);
  REQUIRE(series.size() == 5);
  for (const auto& s : series) CHECK(s.size() == 10000);
  CHECK(mean_of(series[0].y) > mean_of(series[4].y));
}

TEST_CASE("error_counts and append") {
  const auto dev = DeviceConfig::default_device();
  Dataset ds(dev, SamplingPlan::rrecs(1.0));
  std::vector<std::uint8_t> bits(26, 0);
  std::fill(bits.begin(), bits.begin() + 24, 1);
  ds.append(0, 0, 0.0, bits);
  const auto s = error_counts(ds);
  REQUIRE(s[0].size() == 1);
  CHECK(s[0].y[0] == 24.0);

  CHECK_THROWS_AS(ds.append(0, 0, 0.0, bits), InvalidInput);
  std::vector<std::uint8_t> short_bits(3, 0);
  CHECK_THROWS_AS(ds.append(1, 0, 1e-4, short_bits), InvalidInput);
  ds.append(1, 0, 1e-4, std::vector<std::uint8_t>(26, 0));
  CHECK(error_counts(ds)[0].y[1] == 0.0);
}
