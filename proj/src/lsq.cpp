#include "qpburst/lsq.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "qpburst/errors.hpp"

namespace qpburst::lsq {

namespace {

struct Functor : Eigen::DenseFunctor<double> {
  explicit Functor(const Problem& p)
      : Eigen::DenseFunctor<double>(static_cast<int>(p.n_params), static_cast<int>(p.n_residuals)),
        problem(p),
        jac_buf(p.n_params * p.n_residuals) {}

  int operator()(const InputType& x, ValueType& r) const {
    problem.residuals(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                      std::span<double>(r.data(), static_cast<std::size_t>(r.size())));
    return 0;
  }

  int df(const InputType& x, JacobianType& jac) {
    problem.jacobian(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), jac_buf);
    const auto m = static_cast<Eigen::Index>(problem.n_residuals);
    const auto n = static_cast<Eigen::Index>(problem.n_params);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) jac(i, j) = jac_buf[static_cast<std::size_t>(i * n + j)];
    }
    return 0;
  }

  const Problem& problem;
  std::vector<double> jac_buf;
};

}  // namespace

Result levenberg_marquardt(const Problem& problem, std::vector<double> x0, const Options& options) {
  if (x0.size() != problem.n_params || problem.n_params == 0) {
    throw InvalidParameter("lsq: parameter vector size mismatch");
  }
  if (problem.n_residuals < problem.n_params) {
    throw InsufficientData("lsq: fewer residuals than parameters");
  }
  Functor f(problem);
  Eigen::LevenbergMarquardt<Functor> lm(f);
  lm.setXtol(options.tolerance);
  lm.setFtol(options.tolerance);
  lm.setGtol(0.0);
  lm.setMaxfev(options.max_evaluations);

  Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(x0.size()));
  const auto status = lm.minimize(x);

  Result res;
  res.x.assign(x.data(), x.data() + x.size());
  Eigen::VectorXd r(static_cast<Eigen::Index>(problem.n_residuals));
  f(x, r);
  res.rms = std::sqrt(r.squaredNorm() / static_cast<double>(problem.n_residuals));
  res.status = static_cast<int>(status);
  using S = Eigen::LevenbergMarquardtSpace::Status;
  // The *TolTooSmall codes mean the solver hit machine precision, which
  // happens routinely on exact data.
  res.converged = status != S::ImproperInputParameters && status != S::TooManyFunctionEvaluation &&
                  status != S::UserAsked && x.allFinite() && std::isfinite(res.rms);
  return res;
}

}  // namespace qpburst::lsq
