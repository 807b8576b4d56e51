#include <benchmark/benchmark.h>
#include <omp.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "qpburst/cascade.hpp"
#include "qpburst/impact.hpp"
#include "qpburst/kernels.hpp"

using namespace qpburst;

namespace {

struct GridFixture {
  DeviceConfig dev = DeviceConfig::default_device();
  FootprintModel model;
  std::vector<Vec2> xy;
  std::vector<double> base;
  std::vector<ImpactEvent> events;
  std::vector<double> times;

  explicit GridFixture(double duration) {
    for (const auto& q : dev.qubits()) {
      xy.push_back(q.xy_mm);
      base.push_back(1.0 / q.t1_baseline);
    }
    events = sample_events(duration, 10.0, EnergyDistribution{}, 7);
    for (double t = 0.0; t < duration; t += 100e-6) times.push_back(t);
  }

  kernels::RateGridInput input() const {
    return {xy, base, cascade::relaxation_rate_per_x_qp(dev.omega_q(), model.material), events, &model, times};
  }
};

const GridFixture& grid() {
  static const GridFixture f(2.0);
  return f;
}

std::vector<double> noise_series(std::size_t n) {
  std::mt19937_64 rng(3);
  std::poisson_distribution<int> pois(3.0);
  std::vector<double> x(n);
  for (auto& v : x) v = pois(rng);
  return x;
}

void BM_RateGridSerial(benchmark::State& state) {
  const auto in = grid().input();
  std::vector<double> out(grid().times.size() * grid().xy.size());
  for (auto _ : state) {
    kernels::rate_grid_serial(in, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.size()));
}

void BM_RateGridParallel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto in = grid().input();
  std::vector<double> out(grid().times.size() * grid().xy.size());
  for (auto _ : state) {
    kernels::rate_grid_parallel(in, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out.size()));
}

constexpr std::size_t kSeriesLength = 1 << 20;

void BM_ExpCorrelateSerial(benchmark::State& state) {
  const auto x = noise_series(kSeriesLength);
  std::vector<double> y(x.size());
  const std::size_t taps = kernels::exp_kernel_length(20e-3, 100e-6);
  for (auto _ : state) {
    kernels::exp_correlate_serial(x, std::exp(-0.005), taps, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}

void BM_ExpCorrelateParallel(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto x = noise_series(kSeriesLength);
  std::vector<double> y(x.size());
  const std::size_t taps = kernels::exp_kernel_length(20e-3, 100e-6);
  for (auto _ : state) {
    kernels::exp_correlate_parallel(x, std::exp(-0.005), taps, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}

}  // namespace

BENCHMARK(BM_RateGridSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RateGridParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ExpCorrelateSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ExpCorrelateParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
