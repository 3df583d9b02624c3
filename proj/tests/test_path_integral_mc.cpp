#include "rspi/errors.hpp"
#include "rspi/path_integral_mc.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace rspi;

namespace {

McOptions fast(std::size_t n = 20000, std::uint64_t seed = 42) { return McOptions{n, 1e-2, seed, 0}; }

ControlProblem quadratic_problem() { return ControlProblem::scalar(1.0, 1.0, EndCost::quadratic(1.0, 0.0), 1.0); }

}  // namespace

TEST_CASE("log Z of the quadratic problem") {
  const auto problem = quadratic_problem();
  const auto p = make_risk_params(1.0, 0.0);
  const auto z = estimate_log_z(problem, p, 0.0, Vector::Zero(1), fast());
  CHECK(std::abs(z.log_z - (-0.5 * std::log(2.0))) <= 3.0 * z.std_err_log_z);
  CHECK(z.n_samples == 20000);
  CHECK(z.effective_sample_size > 0.5 * 20000);
  CHECK(z.effective_sample_size <= 20000.0);
  for (double theta : {-1.0, 0.5}) {
    const auto q = make_risk_params(1.0, theta);
    for (double x : {-1.0, 1.0}) {
      const auto e = estimate_log_z(problem, q, 0.0, Vector::Constant(1, x), fast());
      CHECK(std::abs(e.log_z - leqg_log_z(1.0, 0.0, q, 1.0, 1.0, x)) <= 3.0 * e.std_err_log_z);
    }
  }
}

TEST_CASE("partition log Z agrees with the analytic value") {
  const auto ec = EndCost::targets_threats({Region(-0.1, 0.0, -10.0), Region(0.0, 0.1, 10.0)});
  const auto problem = ControlProblem::scalar(1.0, 1.0, ec, 1.0);
  for (double theta : {-1.0, 0.5}) {
    const auto p = make_risk_params(1.0, theta);
    for (double x : {-0.5, 0.5}) {
      const auto z = estimate_log_z(problem, p, 0.0, Vector::Constant(1, x), fast(50000));
      CHECK(std::abs(z.log_z - partition_log_z(0.0, x, ec, p, 1.0, 1.0)) <= 3.0 * z.std_err_log_z);
    }
  }
}

TEST_CASE("value estimates") {
  const auto problem = quadratic_problem();
  // Special case: plain mean cost E[X_T^2 / 2] = 0.5 from x = 0.
  const auto s = estimate_value(problem, special_risk_params(1.0), 0.0, Vector::Zero(1), fast());
  CHECK(std::abs(s.value - 0.5) <= 3.0 * s.std_err);

  const auto c = ControlProblem::scalar(1.0, 1.0, EndCost::constant(3.25), 1.0);
  for (double theta : {-2.0, 0.0, 0.5}) {
    const auto v = estimate_value(c, make_risk_params(1.0, theta), 0.0, Vector::Zero(1), fast(200));
    CHECK(v.value == 3.25);
  }
  CHECK(estimate_value(c, special_risk_params(1.0), 0.0, Vector::Zero(1), fast(200)).value == 3.25);
}

TEST_CASE("value is continuous in theta") {
  const auto problem = quadratic_problem();
  const auto opts = fast(20000, 7);
  const Vector x = Vector::Constant(1, 0.4);
  const double j0 = estimate_value(problem, make_risk_params(1.0, 0.0), 0.0, x, opts).value;
  const double j = estimate_value(problem, make_risk_params(1.0, 1e-6), 0.0, x, opts).value;
  CHECK(std::abs(j - j0) <= 1e-4 * (1.0 + std::abs(j0)));

  // Approaching the special point recovers the plain mean cost.
  const double mean = estimate_value(problem, special_risk_params(1.0), 0.0, x, opts).value;
  const double near = estimate_value(problem, make_risk_params(1.0, 1.0 - 1e-6), 0.0, x, opts).value;
  CHECK(std::abs(near - mean) <= 1e-4 * (1.0 + std::abs(mean)));
}

TEST_CASE("value increases with theta on a shared seed") {
  const auto problem = quadratic_problem();
  double prev = -std::numeric_limits<double>::infinity();
  for (double theta : {-2.0, -1.0, 0.0, 0.5, 0.9}) {
    const double v = estimate_value(problem, make_risk_params(1.0, theta), 0.0, Vector::Constant(1, 0.5), fast()).value;
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("control estimate matches LEQG") {
  const auto problem = quadratic_problem();
  for (double theta : {-1.0, 0.0, 0.5}) {
    LeqgSpec spec;
    spec.theta = theta;
    const auto p = make_risk_params(1.0, theta);
    for (double x : {-1.0, 0.0, 2.0}) {
      const auto u = estimate_control(problem, p, 0.0, Vector::Constant(1, x), std::nullopt, fast());
      const double ref = leqg_control(spec, 0.0, x);
      CHECK(std::abs(u.control(0) - ref) <= std::max(3.0 * u.std_err(0), 0.03 * std::abs(ref)));
      CHECK(u.step == doctest::Approx(1e-2));
    }
  }
}

TEST_CASE("special-case control is minus the mean-cost gradient") {
  const auto problem = quadratic_problem();
  // E[phi] = (x^2 + 1) / 2, so u = -x.
  const auto u = estimate_control(problem, special_risk_params(1.0), 0.0, Vector::Constant(1, 0.8), std::nullopt, fast());
  CHECK(std::abs(u.control(0) + 0.8) <= 3.0 * u.std_err(0) + 1e-3);
}

TEST_CASE("finite-difference steps agree") {
  const auto problem = quadratic_problem();
  const auto p = make_risk_params(1.0, 0.5);
  const auto a = estimate_control(problem, p, 0.0, Vector::Constant(1, 1.0), 0.02, fast());
  const auto b = estimate_control(problem, p, 0.0, Vector::Constant(1, 1.0), 0.01, fast());
  const double combined = std::hypot(a.std_err(0), b.std_err(0));
  CHECK(std::abs(a.control(0) - b.control(0)) <= 3.0 * combined + 4e-4);
}

TEST_CASE("common random numbers across stencil points") {
  const auto problem = quadratic_problem();
  std::vector<Vector> starts{Vector::Constant(1, -0.01), Vector::Constant(1, 0.01)};
  const Matrix c = uncontrolled_costs(problem, 0.0, starts, fast(100));
  // Same noise: the endpoints differ by the start offset only.
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    const double xa = std::sqrt(2.0 * c(i, 0));
    (void)xa;
    const double diff = c(i, 1) - c(i, 0);
    // phi(w + 0.01) - phi(w - 0.01) = 0.02 w
    const double w = diff / 0.02;
    CHECK(c(i, 0) == doctest::Approx(0.5 * (w - 0.01) * (w - 0.01)).epsilon(1e-9).scale(1e-6));
  }
}

TEST_CASE("estimates do not depend on the worker count") {
  const auto problem = quadratic_problem();
  const auto p = make_risk_params(1.0, 0.5);
  auto o1 = fast(3000);
  o1.workers = 1;
  auto o4 = fast(3000);
  o4.workers = 4;
  CHECK(estimate_log_z(problem, p, 0.0, Vector::Zero(1), o1).log_z ==
        estimate_log_z(problem, p, 0.0, Vector::Zero(1), o4).log_z);
  CHECK(estimate_control(problem, p, 0.0, Vector::Zero(1), std::nullopt, o1).control(0) ==
        estimate_control(problem, p, 0.0, Vector::Zero(1), std::nullopt, o4).control(0));
}

TEST_CASE("log-mean-exp is shift safe") {
  std::vector<double> e{1000.0, 1000.0 + std::log(3.0)};
  const auto z = log_mean_exp_estimate(e);
  CHECK(z.log_z == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(z.effective_sample_size == doctest::Approx(16.0 / 10.0));
  std::vector<double> dead(10, -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(log_mean_exp_estimate(dead), DegenerateEstimate);
  std::vector<double> inf{0.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(log_mean_exp_estimate(inf), DegenerateEstimate);
  std::vector<double> partial{-std::numeric_limits<double>::infinity(), 0.0};
  CHECK(log_mean_exp_estimate(partial).log_z == doctest::Approx(-std::log(2.0)));
}

TEST_CASE("estimators reject bad input") {
  const auto problem = quadratic_problem();
  CHECK_THROWS_AS(estimate_log_z(problem, special_risk_params(1.0), 0.0, Vector::Zero(1), fast()), ConfigError);
  CHECK_THROWS_AS(estimate_log_z(problem, make_risk_params(1.0, 0.0), 0.0, Vector::Zero(1), fast(1)), ConfigError);
  CHECK_THROWS_AS(estimate_log_z(problem, make_risk_params(2.0, 0.0), 0.0, Vector::Zero(1), fast()), ConfigError);
}

TEST_CASE("blow-up diagnostic") {
  const auto problem = quadratic_problem();
  LeqgSpec spec;
  spec.theta = 3.0;
  const auto e = path_exponents(problem, make_risk_params(1.0, 3.0), 0.0, Vector::Zero(1), fast(20000));
  const auto d = detect_blowup(e, &spec, 0.0);
  REQUIRE(d.analytic_divergent.has_value());
  CHECK(*d.analytic_divergent);
  CHECK(d.analytic_threshold == doctest::Approx(2.0));
  CHECK(d.suspected_divergent());
  CHECK(d.message.find("suspected divergent path integral") != std::string::npos);

  spec.theta = 2.0;
  CHECK(*detect_blowup(e, &spec, 0.0).analytic_divergent);

  spec.theta = 0.0;
  const auto ok = path_exponents(problem, make_risk_params(1.0, 0.0), 0.0, Vector::Zero(1), fast(20000));
  const auto calm = detect_blowup(ok, &spec, 0.0);
  CHECK_FALSE(*calm.analytic_divergent);
  CHECK_FALSE(calm.empirical_flag);
  CHECK_FALSE(calm.suspected_divergent());

  std::vector<double> few(50, 0.0);
  CHECK_THROWS_AS(detect_blowup(few), ConfigError);
}

TEST_CASE("Monte Carlo policy") {
  const auto problem = quadratic_problem();
  const auto pol = mc_policy(problem, make_risk_params(1.0, 0.0), fast(5000));
  const double u = pol(0.0, Vector::Constant(1, 1.0))(0);
  CHECK(u == doctest::Approx(-0.5).epsilon(0.05));
}
