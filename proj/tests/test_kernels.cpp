#include <omp.h>

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "qpburst/cascade.hpp"
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

  GridFixture() {
    for (const auto& q : dev.qubits()) {
      xy.push_back(q.xy_mm);
      base.push_back(1.0 / q.t1_baseline);
    }
    events = sample_events(2.0, 5.0, EnergyDistribution{}, 11);
    for (double t = 0.0; t < 2.0; t += 170e-6) times.push_back(t);
  }

  kernels::RateGridInput input() const {
    return {xy, base, cascade::relaxation_rate_per_x_qp(dev.omega_q(), model.material), events, &model, times};
  }
};

}  // namespace

TEST_CASE("rate grid parallel matches serial bit for bit") {
  const GridFixture f;
  REQUIRE(f.events.size() >= 3);
  const auto in = f.input();
  std::vector<double> ref(f.times.size() * f.xy.size());
  kernels::rate_grid_serial(in, ref);
  const int saved = omp_get_max_threads();
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    std::vector<double> out(ref.size(), -1.0);
    kernels::rate_grid_parallel(in, out);
    CHECK(out == ref);
  }
  omp_set_num_threads(saved);

  bool elevated = false;
  for (std::size_t i = 0; i < ref.size(); ++i) elevated |= ref[i] > f.base[i % f.xy.size()] * 1.5;
  CHECK(elevated);
}

TEST_CASE("exponential correlation kernels agree") {
  CHECK(kernels::exp_kernel_length(20e-3, 100e-6) == 1001);
  CHECK(kernels::exp_kernel_length(20e-3, 30e-3) == 4);

  std::mt19937_64 rng(7);
  std::poisson_distribution<int> pois(4.0);
  std::vector<double> x(60000);
  for (auto& v : x) v = pois(rng);
  const double r = std::exp(-100e-6 / 20e-3);
  const std::size_t taps = kernels::exp_kernel_length(20e-3, 100e-6);

  std::vector<double> ys(x.size()), yp(x.size());
  kernels::exp_correlate_serial(x, r, taps, ys);
  kernels::exp_correlate_parallel(x, r, taps, yp);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(ys[i] - yp[i]));
  CHECK(worst < 1e-9);

  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  std::vector<double> y1(x.size());
  kernels::exp_correlate_parallel(x, r, taps, y1);
  omp_set_num_threads(4);
  std::vector<double> y4(x.size());
  kernels::exp_correlate_parallel(x, r, taps, y4);
  omp_set_num_threads(saved);
  CHECK(y1 == y4);

  // Unit impulse: taps are r^k scaled by 1 / sum r^(2j).
  std::vector<double> imp(50, 0.0), yi(50);
  imp[10] = 1.0;
  kernels::exp_correlate_serial(imp, 0.5, 4, yi);
  const double norm = 1.0 + 0.25 + 0.0625 + 0.015625;
  CHECK(yi[10] == doctest::Approx(1.0 / norm));
  CHECK(yi[7] == doctest::Approx(0.125 / norm));
  CHECK(yi[6] == 0.0);
  CHECK(yi[11] == 0.0);
}
