#include <cmath>

#include "doctest.h"
#include "qpburst/lsq.hpp"

using namespace qpburst;

TEST_CASE("levenberg_marquardt on a linear model") {
  lsq::Problem p;
  p.n_params = 2;
  p.n_residuals = 5;
  p.residuals = [](std::span<const double> x, std::span<double> r) {
    for (int i = 0; i < 5; ++i) r[i] = x[0] * i + x[1] - (3.0 * i - 2.0);
  };
  p.jacobian = [](std::span<const double>, std::span<double> j) {
    for (int i = 0; i < 5; ++i) {
      j[i * 2] = i;
      j[i * 2 + 1] = 1.0;
    }
  };
  const auto res = lsq::levenberg_marquardt(p, {0.0, 0.0});
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(res.x[1] == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(res.rms < 1e-10);
}

TEST_CASE("levenberg_marquardt on Rosenbrock residuals") {
  lsq::Problem p;
  p.n_params = 2;
  p.n_residuals = 2;
  p.residuals = [](std::span<const double> x, std::span<double> r) {
    r[0] = 10.0 * (x[1] - x[0] * x[0]);
    r[1] = 1.0 - x[0];
  };
  p.jacobian = [](std::span<const double> x, std::span<double> j) {
    j[0] = -20.0 * x[0];
    j[1] = 10.0;
    j[2] = -1.0;
    j[3] = 0.0;
  };
  const auto res = lsq::levenberg_marquardt(p, {-1.2, 1.0});
  CHECK(res.converged);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("levenberg_marquardt reports non-finite problems") {
  lsq::Problem p;
  p.n_params = 1;
  p.n_residuals = 2;
  p.residuals = [](std::span<const double>, std::span<double> r) {
    r[0] = std::nan("");
    r[1] = 1.0;
  };
  p.jacobian = [](std::span<const double>, std::span<double> j) {
    j[0] = 1.0;
    j[1] = 0.0;
  };
  const auto res = lsq::levenberg_marquardt(p, {0.0});
  CHECK_FALSE(res.converged);
}
