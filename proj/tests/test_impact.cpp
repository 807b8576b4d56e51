#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "qpburst/cascade.hpp"
#include "qpburst/detector.hpp"
#include "qpburst/errors.hpp"
#include "qpburst/impact.hpp"
#include "qpburst/units.hpp"

using namespace qpburst;

namespace {

// Asymptotic one-sample KS critical value at alpha = 0.01.
double ks_critical_001(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

// Composite Simpson rule over the chip of f(x, y), n even.
template <typename F>
double simpson_2d(F f, double w, double h, int n) {
  auto weight = [n](int i) { return (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
  const double hx = w / n, hy = h / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) s += weight(i) * weight(j) * f(i * hx, j * hy);
  }
  return s * hx * hy / 9.0;
}

ImpactEvent event_at(double t, Vec2 p, double e) { return {t, p, e, EventKind::Gamma}; }

}  // namespace

TEST_CASE("sample_events statistics") {
  const EnergyDistribution dist;
  double total = 0.0;
  for (int s = 0; s < 1000; ++s) total += static_cast<double>(sample_events(60.0, 0.1, dist, 1000 + s).size());
  const double mean = total / 1000.0;
  CHECK(mean >= 5.5);
  CHECK(mean <= 6.5);

  for (int s = 0; s < 20; ++s) CHECK(sample_events(60.0, 1e-12, dist, s).empty());
  CHECK(sample_events(60.0, 0.0, dist, 3).empty());

  const auto many = sample_events(1e5, 0.1, dist, 42);
  REQUIRE(many.size() > 9000);
  std::vector<double> gaps;
  double prev = 0.0;
  for (const auto& e : many) {
    gaps.push_back(e.t_impact - prev);
    prev = e.t_impact;
    CHECK(e.location.x >= 0.0);
    CHECK(e.location.x <= 10.0);
    CHECK(e.location.y >= 0.0);
    CHECK(e.location.y <= 10.0);
    CHECK(e.deposited_energy >= 20e3);
    CHECK(e.deposited_energy <= 1e6);
  }
  std::sort(gaps.begin(), gaps.end());
  double d = 0.0;
  const double n = static_cast<double>(gaps.size());
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double f = 1.0 - std::exp(-0.1 * gaps[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  CHECK(d < ks_critical_001(gaps.size()));

  // Log-uniform: half the draws fall below the geometric mean of the bounds.
  const double split = std::sqrt(20e3 * 1e6);
  const auto below = std::count_if(many.begin(), many.end(), [&](const ImpactEvent& e) { return e.deposited_energy < split; });
  CHECK(static_cast<double>(below) / n == doctest::Approx(0.5).epsilon(0.05));

  const auto again = sample_events(1e5, 0.1, dist, 42);
  REQUIRE(again.size() == many.size());
  CHECK(again.back().t_impact == many.back().t_impact);
  CHECK(again.back().deposited_energy == many.back().deposited_energy);

  CHECK_THROWS_AS(sample_events(0.0, 0.1, dist, 1), InvalidParameter);
}

TEST_CASE("energy distribution spec") {
  const auto d = EnergyDistribution::parse("log-uniform:1e4:2e5");
  CHECK(d.e_min == 1e4);
  CHECK(d.e_max == 2e5);
  const auto m = EnergyDistribution::parse("mixture");
  CHECK(m.kind == EnergyDistribution::Kind::GammaMuonMixture);
  CHECK(1.0 / m.gamma_rate == doctest::Approx(7.6923).epsilon(1e-4));
  const auto evs = sample_events(1e4, 0.1, m, 5);
  const auto muons = std::count_if(evs.begin(), evs.end(), [](const ImpactEvent& e) { return e.kind == EventKind::Muon; });
  CHECK(static_cast<double>(muons) / evs.size() == doctest::Approx(1.0 / 6.0).epsilon(0.15));
  for (const auto& e : evs) CHECK((e.deposited_energy == 1e5 || e.deposited_energy == 1e6));
  CHECK_THROWS_AS(EnergyDistribution::parse("gaussian"), ConfigError);
  CHECK_THROWS_AS(EnergyDistribution::parse("log-uniform:5:x"), ConfigError);
  CHECK_THROWS_AS(EnergyDistribution::parse("log-uniform:5e5:1e4"), ConfigError);
  CHECK(EnergyDistribution::parse(d.to_string()).e_max == d.e_max);
}

TEST_CASE("qp_density_at shape") {
  const FootprintModel model;
  const auto ev = event_at(1.0, {5.0, 5.0}, 100e3);
  CHECK(qp_density_at(ev, model, {5.0, 5.0}, 0.999) == 0.0);
  CHECK(qp_density_at(ev, model, {5.0, 5.0}, 1.0) == 0.0);

  const double at_1ms = qp_density_at(ev, model, {5.0, 5.0}, 1.0 + 1e-3);
  const double at_5tau = qp_density_at(ev, model, {5.0, 5.0}, 1.0 + 5 * model.profile.tau_decay);
  CHECK(at_5tau < 0.01 * at_1ms);

  double peak = 0.0;
  for (double dt = 1e-6; dt < 0.1; dt *= 1.05) peak = std::max(peak, qp_density_at(ev, model, {5.0, 5.0}, 1.0 + dt));
  CHECK(qp_density_at(ev, model, {5.0, 5.0}, 1.0 + 30 * model.profile.tau_decay) < 1e-12 * peak);
  CHECK(qp_density_at(ev, model, {5.0, 5.0}, 1.0 + 100 * model.profile.tau_decay) == 0.0);

  for (double dt : {2e-6, 20e-6, 300e-6, 5e-3}) {
    double prev = qp_density_at(ev, model, {5.0, 5.0}, 1.0 + dt);
    CHECK(prev > 0.0);
    for (double r = 0.1; r < 7.0; r += 0.1) {
      const double v = qp_density_at(ev, model, {5.0 + r * 0.6, 5.0 - r * 0.8}, 1.0 + dt);
      CHECK(v >= 0.0);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("footprint conserves the hotspot energy") {
  const FootprintModel model;
  const auto& m = model.material;
  for (Vec2 loc : {Vec2{5.0, 5.0}, Vec2{8.5, 5.0}, Vec2{1.0, 9.0}}) {
    const auto ev = event_at(0.0, loc, 100e3);
    const double dt = 5 * model.profile.tau_rise;
    // x * n_cp * Delta * d per um^2, integrated over the chip in um^2.
    const double per_mm2 = m.n_cp * m.gap_delta * (m.thickness / 1e-6) * 1e6;
    const double energy = simpson_2d(
        [&](double x, double y) { return qp_density_at(ev, model, {x, y}, dt) * per_mm2; }, 10.0, 10.0, 400);
    CHECK(energy == doctest::Approx(model.phonon_fraction * 100e3).epsilon(0.02));
  }
}

TEST_CASE("chip-averaged T1 after a 100 keV event") {
  const FootprintModel model;
  const auto dev = DeviceConfig::default_device();
  const auto ev = event_at(0.0, {5.0, 5.0}, 100e3);
  const double mean_x =
      simpson_2d([&](double x, double y) { return qp_density_at(ev, model, {x, y}, 1.5e-3); }, 10.0, 10.0, 200) / 100.0;
  const double rate = 1.0 / 15e-6 + cascade::qubit_relaxation_rate(mean_x, dev.omega_q(), model.material);
  const double t1 = 1.0 / rate;
  CHECK(t1 >= 1e-6);
  CHECK(t1 <= 2e-6);
}

TEST_CASE("t1_trajectory") {
  const auto dev = DeviceConfig::default_device();
  const FootprintModel model;
  std::vector<double> times;
  for (int i = 0; i < 200; ++i) times.push_back(i * 50e-6);

  const auto none = t1_trajectory(dev, {}, model, times);
  for (std::size_t it = 0; it < times.size(); ++it) {
    for (std::size_t q = 0; q < dev.n_qubits(); ++q) CHECK(none.at(it, q) == doctest::Approx(dev.qubit(q).t1_baseline).epsilon(1e-14));
  }

  const std::size_t target = 9;
  const std::vector<ImpactEvent> one{event_at(0.0, dev.qubit(target).xy_mm, 100e3)};
  const std::vector<double> t20{20e-6};
  const auto tr = t1_trajectory(dev, one, model, t20);
  for (std::size_t q = 0; q < dev.n_qubits(); ++q) {
    if (q != target) CHECK(tr.at(0, q) > tr.at(0, target));
  }

  const std::vector<ImpactEvent> two{one[0], one[0]};
  const auto a = t1_trajectory(dev, one, model, times);
  const auto b = t1_trajectory(dev, two, model, times);
  for (std::size_t it = 1; it < times.size(); ++it) {
    for (std::size_t q = 0; q < dev.n_qubits(); ++q) {
      const double base = 1.0 / dev.qubit(q).t1_baseline;
      const double ga = 1.0 / a.at(it, q) - base;
      const double gb = 1.0 / b.at(it, q) - base;
      CHECK(gb == doctest::Approx(2.0 * ga).epsilon(1e-9));
    }
  }

  std::vector<double> unsorted{1e-3, 0.0};
  CHECK_THROWS_AS(t1_trajectory(dev, one, model, unsorted), InvalidParameter);
}

TEST_CASE("default profile reproduces the three timescales") {
  const auto dev = DeviceConfig::default_device();
  const FootprintModel model;
  const std::vector<ImpactEvent> ev{event_at(0.0, {8.5, 5.0}, 100e3)};

  std::vector<double> times;
  for (double t = 0.0; t < 3e-3; t += 3e-6) times.push_back(t);
  const auto tr = t1_trajectory(dev, ev, model, times);
  auto extent = [&](std::size_t it) {
    int n = 0;
    for (std::size_t q = 0; q < dev.n_qubits(); ++q) {
      const double p = observed_error_probability(decay_error_probability(tr.at(it, q), 1e-6), dev.qubit(q), PrepState::One);
      n += p > 0.5 ? 1 : 0;
    }
    return n;
  };
  int ext20 = 0;
  std::vector<int> ext(times.size());
  for (std::size_t it = 0; it < times.size(); ++it) {
    ext[it] = extent(it);
    if (times[it] <= 20e-6) ext20 = std::max(ext20, ext[it]);
  }
  CHECK(ext20 >= 5);
  const int max_ext = *std::max_element(ext.begin(), ext.end());
  const auto first = std::find(ext.begin(), ext.end(), max_ext) - ext.begin();
  auto last = first;
  while (last + 1 < static_cast<std::ptrdiff_t>(ext.size()) && ext[static_cast<std::size_t>(last + 1)] == max_ext) ++last;
  const double t_max = 0.5 * (times[static_cast<std::size_t>(first)] + times[static_cast<std::size_t>(last)]);
  CHECK(t_max >= 0.5e-3);
  CHECK(t_max <= 3e-3);

  // Decay constant of the expected count on a 100 us grid.
  TimeSeries s;
  for (double t = -20e-3; t < 200e-3; t += 100e-6) s.t.push_back(t);
  std::vector<double> pos_t;
  for (double t : s.t) pos_t.push_back(t);
  const auto full = t1_trajectory(dev, ev, model, pos_t);
  for (std::size_t it = 0; it < s.t.size(); ++it) {
    double c = 0.0;
    for (std::size_t q = 0; q < dev.n_qubits(); ++q) {
      c += observed_error_probability(decay_error_probability(full.at(it, q), 1e-6), dev.qubit(q), PrepState::One);
    }
    s.y.push_back(c);
  }
  const auto fit = fit_event(s, 0.0, dev.n_qubits());
  CHECK(fit.tau_decay >= 20e-3);
  CHECK(fit.tau_decay <= 35e-3);
}

TEST_CASE("uniform floor injection") {
  const auto dev = DeviceConfig::default_device();
  const auto model = uniform_floor_model(FootprintModel{});
  for (double floor : {0.5e-6, 1e-6, 2e-6, 5e-6}) {
    const double e = energy_for_t1_floor(floor, dev, model);
    const std::vector<ImpactEvent> ev{event_at(0.0, {5.0, 5.0}, e)};
    const std::vector<double> t{rise_decay_peak_time(model.profile)};
    const auto tr = t1_trajectory(dev, ev, model, t);
    for (std::size_t q = 0; q < dev.n_qubits(); ++q) CHECK(tr.at(0, q) == doctest::Approx(floor).epsilon(1e-4));
  }
  CHECK_THROWS_AS(energy_for_t1_floor(20e-6, dev, model), InvalidParameter);
}

TEST_CASE("profile validation") {
  EventProfileParams p;
  CHECK_NOTHROW(p.validate());
  p.tau_spread = 1e-6;
  CHECK_THROWS_AS(p.validate(), InvalidParameter);
  p = EventProfileParams{};
  p.sigma_chip_mm = 1.0;
  CHECK_THROWS_AS(p.validate(), InvalidParameter);
  CHECK(p.sigma_sq(0.0) == doctest::Approx(1.8 * 1.8));
}
