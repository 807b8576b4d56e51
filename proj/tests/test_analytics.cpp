#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "doctest.h"
#include "qpburst/analytics.hpp"
#include "qpburst/errors.hpp"

using namespace qpburst;

namespace {

// Enumerates all 2^n outcomes.
std::vector<double> brute_force_pmf(const std::vector<double>& p) {
  const std::size_t n = p.size();
  std::vector<double> pmf(n + 1, 0.0);
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double prob = 1.0;
    for (std::size_t i = 0; i < n; ++i) prob *= (mask >> i) & 1u ? p[i] : 1.0 - p[i];
    pmf[static_cast<std::size_t>(std::popcount(mask))] += prob;
  }
  return pmf;
}

std::vector<double> draw_counts(const CountDistribution& m, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> d(m.pmf.begin(), m.pmf.end());
  std::vector<double> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

}  // namespace

TEST_CASE("poisson_binomial against enumeration") {
  const std::vector<double> p3{0.1, 0.2, 0.3};
  const auto d = poisson_binomial(p3);
  REQUIRE(d.pmf.size() == 4);
  CHECK(d.support_max == 3);
  CHECK(d.pmf[0] == doctest::Approx(0.504).epsilon(1e-12));
  CHECK(d.pmf[1] == doctest::Approx(0.398).epsilon(1e-12));
  CHECK(d.pmf[2] == doctest::Approx(0.092).epsilon(1e-12));
  CHECK(d.pmf[3] == doctest::Approx(0.006).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t n = 1; n <= 12; ++n) {
    std::vector<double> p(n);
    for (auto& v : p) v = u(rng);
    const auto pb = poisson_binomial(p);
    const auto bf = brute_force_pmf(p);
    double total = 0.0, mean = 0.0, var = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      CHECK(std::abs(pb.pmf[k] - bf[k]) < 1e-12);
      CHECK(pb.pmf[k] >= 0.0);
      total += pb.pmf[k];
    }
    for (double v : p) {
      mean += v;
      var += v * (1.0 - v);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(std::abs(pb.mean() - mean) < 1e-10);
    CHECK(std::abs(pb.variance() - var) < 1e-10);
  }

  const std::vector<double> zero(26, 0.0);
  const auto z = poisson_binomial(zero);
  CHECK(z.pmf[0] == 1.0);
  CHECK(std::all_of(z.pmf.begin() + 1, z.pmf.end(), [](double v) { return v == 0.0; }));

  const std::vector<double> homo(26, 0.113);
  const auto h = poisson_binomial(homo);
  const boost::math::binomial_distribution<double> bin(26, 0.113);
  for (std::size_t k = 0; k <= 26; ++k) CHECK(std::abs(h.pmf[k] - boost::math::pdf(bin, k)) < 1e-12);
  CHECK(h.quantile(0.0) == 0);
  CHECK(h.quantile(1.0) <= 26);
}

TEST_CASE("independent_count_pmf uses the observed probabilities") {
  const auto dev = DeviceConfig::default_device();
  const auto plan = SamplingPlan::trrecs(1.0);
  for (std::size_t s = 0; s < plan.n_slots(); ++s) {
    const auto m = independent_count_pmf(dev, plan, s);
    const double p = observed_error_probability(decay_error_probability(15e-6, plan.sampling_times[s]),
                                                dev.qubit(0), PrepState::One);
    CHECK(m.mean() == doctest::Approx(26 * p).epsilon(1e-12));
  }
}

TEST_CASE("histogram comparison") {
  const auto dev = DeviceConfig::default_device();
  const auto plan = SamplingPlan::rrecs(60.0);
  const auto model = independent_count_pmf(dev, plan);

  const auto draws = draw_counts(model, 1000000, 8);
  const auto self = histogram_comparison(draws, model);
  CHECK(self.total_variation < 0.01);
  CHECK(self.chi_square_dof >= 5);
  CHECK(self.chi_square < self.chi_square_dof + 5.0 * std::sqrt(2.0 * self.chi_square_dof));
  CHECK(self.tail_threshold == model.quantile(0.9999));
  CHECK(std::accumulate(self.observed.begin(), self.observed.end(), 0.0) == doctest::Approx(1.0));

  const auto quiet = run_rrecs(dev, {}, FootprintModel{}, plan, 21);
  const auto hq = histogram_comparison(error_counts(quiet)[0].y, model);
  CHECK(hq.excess_tail_mass < 1e-4);
  CHECK(hq.total_variation < 0.02);

  const std::vector<ImpactEvent> ev{{30.0, {5.0, 5.0}, 1e6, EventKind::Muon}};
  const auto loud = run_rrecs(dev, ev, FootprintModel{}, plan, 21);
  CHECK(histogram_comparison(error_counts(loud)[0].y, model).excess_tail_mass > 1e-3);

  CHECK_THROWS_AS(histogram_comparison(std::vector<double>{}, model), InsufficientData);
}

TEST_CASE("exponential KS and Poisson rate fit") {
  const std::vector<double> one{1.0};
  CHECK(ks_statistic_exponential(one, 1.0) == doctest::Approx(1.0 - std::exp(-1.0)));
  const std::vector<double> two{0.5, 2.0};
  const double f1 = 1.0 - std::exp(-0.5), f2 = 1.0 - std::exp(-2.0);
  CHECK(ks_statistic_exponential(two, 1.0) == doctest::Approx(std::max({f1, 0.5 - f1, f2 - 0.5, 1.0 - f2})));

  const std::vector<double> equal(60, 10.0);
  const auto fe = poisson_rate_fit(equal, 1, 2000);
  CHECK(fe.lambda_mle == doctest::Approx(0.1));
  CHECK(fe.ks_pvalue < 0.01);

  std::mt19937_64 rng(326);
  std::exponential_distribution<double> ex(0.1);
  std::vector<double> iv(326);
  for (auto& v : iv) v = ex(rng);
  const auto fit = poisson_rate_fit(iv);
  CHECK(fit.n_intervals == 326);
  CHECK(fit.lambda_mle >= 0.08);
  CHECK(fit.lambda_mle <= 0.12);
  CHECK(fit.ks_pvalue > 0.01);
  CHECK(fit.ks_statistic == doctest::Approx(ks_statistic_exponential(iv, fit.lambda_mle)));
  CHECK(poisson_rate_fit(iv).ks_pvalue == fit.ks_pvalue);

  CHECK_THROWS_AS(poisson_rate_fit(std::vector<double>{}), InsufficientData);
  CHECK_THROWS_AS(poisson_rate_fit(std::vector<double>{3.0}), InsufficientData);
}

TEST_CASE("T1 from peak heights") {
  const std::vector<double> t{2e-6, 1.5e-6, 1e-6, 0.5e-6, 0.0};
  std::vector<double> h;
  for (double ts : t) h.push_back(26.0 * (1.0 - std::exp(-(ts + 500e-9) / 2e-6)));
  const auto x = t1_from_peak_heights(h, t, 26);
  CHECK(x.converged);
  CHECK(x.t1_avg == doctest::Approx(2e-6).epsilon(1e-6));
  CHECK(x.amplitude_a == doctest::Approx(26.0).epsilon(1e-6));
  CHECK(x.zero_param_residual < 1e-9);
  CHECK(x.fit_rms < 1e-9);
  CHECK(std::is_sorted(x.sampling_times.begin(), x.sampling_times.end()));
  CHECK(x.amplitude_a * (1.0 - std::exp(-500e-9 / x.t1_avg)) > 0.0);

  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  std::vector<double> hp, tp;
  for (auto i : perm) {
    hp.push_back(h[i]);
    tp.push_back(t[i]);
  }
  const auto y = t1_from_peak_heights(hp, tp, 26);
  CHECK(y.t1_avg == x.t1_avg);
  CHECK(y.amplitude_a == x.amplitude_a);

  const std::vector<double> flat(5, 10.0);
  CHECK_FALSE(t1_from_peak_heights(flat, t, 26).converged);
  const std::vector<double> few{1.0, 2.0};
  CHECK_THROWS_AS(t1_from_peak_heights(few, std::vector<double>{0.0, 1e-6}, 26), InsufficientData);
  std::vector<double> neg = h;
  neg[0] = -1.0;
  CHECK_THROWS_AS(t1_from_peak_heights(neg, t, 26), InvalidInput);
}

TEST_CASE("readout correction inverts the observed probability") {
  QubitSpec q;
  for (double pd : {0.0, 0.3, 1.0}) {
    const double h = 26.0 * observed_error_probability(pd, q, PrepState::One);
    CHECK(readout_corrected_height(h, 26, q.eps_read0_given1, q.eps_read1_given0) ==
          doctest::Approx(26.0 * pd).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("heatmap") {
  const auto dev = DeviceConfig::default_device();
  const auto zero_dev = [&] {
    std::vector<QubitSpec> qs(dev.qubits().begin(), dev.qubits().end());
    for (auto& q : qs) q.eps_read1_given0 = 0.0;
    return DeviceConfig::make(qs, dev.chip(), dev.qubit_pitch_mm(), dev.omega_q());
  }();
  auto zplan = SamplingPlan::rrecs(0.01, 3e-6);
  zplan.prep_state = PrepState::Zero;
  const auto zds = run_rrecs(zero_dev, {}, FootprintModel{}, zplan, 1);
  const auto zh = heatmap(zds, 5e-3);
  for (double v : zh.per_qubit) CHECK(v == 0.0);
  CHECK(zh.rows == 5);
  CHECK(zh.cols == 6);
  CHECK(std::isnan(zh.at(zh.min_row, zh.min_col)));

  const std::size_t target = 14;
  const double t0 = 0.2;
  const std::vector<ImpactEvent> ev{{t0, dev.qubit(target).xy_mm, 100e3, EventKind::Gamma}};
  const auto ds = run_rrecs(dev, ev, FootprintModel{}, SamplingPlan::rrecs(0.4, 3e-6), 9);
  const auto hm = heatmap(ds, t0 + 100e-6);
  CHECK(hm.n_records == 100);
  // Noise-free rates over the same window peak at the impacted qubit.
  std::vector<double> ts;
  for (double t = t0 - 50e-6; t < t0 + 250e-6; t += 3e-6) ts.push_back(t);
  const auto tr = t1_trajectory(dev, ev, FootprintModel{}, ts);
  std::vector<double> expected(26, 0.0);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (std::size_t q = 0; q < 26; ++q) {
      expected[q] += observed_error_probability(decay_error_probability(tr.at(i, q), 1e-6), dev.qubit(q), PrepState::One);
    }
  }
  CHECK(std::max_element(expected.begin(), expected.end()) - expected.begin() == static_cast<long>(target));
  // The footprint is wider than the pitch, so neighbours sit within noise of the maximum.
  const double max_rate = *std::max_element(hm.per_qubit.begin(), hm.per_qubit.end());
  const double p = hm.per_qubit[target];
  CHECK(max_rate - p <= 3.0 * std::sqrt(2.0 * p * (1.0 - p) / 100.0));
  CHECK(p > 2.0 * observed_error_probability(decay_error_probability(15e-6, 1e-6), dev.qubit(0), PrepState::One));
  const auto& g = dev.qubit(target).grid_pos;
  CHECK(hm.at(g.row, g.col) == hm.per_qubit[target]);

  const auto again = heatmap(ds, t0 + 100e-6);
  CHECK(again.per_qubit == hm.per_qubit);

  double count_sum = 0.0;
  std::size_t n = 0;
  const auto s = error_counts(ds)[0];
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.t[i] >= t0 - 50e-6 && s.t[i] < t0 + 250e-6) {
      count_sum += s.y[i];
      ++n;
    }
  }
  CHECK(n == hm.n_records);
  const double avg = std::accumulate(hm.per_qubit.begin(), hm.per_qubit.end(), 0.0) / 26.0;
  CHECK(avg == doctest::Approx(count_sum / n / 26.0).epsilon(1e-12));
  for (double v : hm.per_qubit) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(heatmap(ds, 10.0), InsufficientData);
}
