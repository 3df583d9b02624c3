#include "rspi/analytic_control.hpp"
#include "rspi/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

using namespace rspi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

EndCost two_targets(double eps, double c) {
  return EndCost::targets_threats({Region(-1.0 - eps / 2, -1.0 + eps / 2, c), Region(1.0 - eps / 2, 1.0 + eps / 2, c)});
}

std::vector<oracle::Piece> pieces_of(const EndCost& e) {
  std::vector<oracle::Piece> out;
  for (const auto& r : e.get_if<TargetsThreatsCost>()->regions) out.push_back({r.lower(), r.upper(), r.cost()});
  return out;
}

bool bitwise_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("gaussian helpers") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327));
  // Deep tail keeps relative accuracy.
  CHECK(normal_cdf(-30.0) == doctest::Approx(4.906713927148187e-198).epsilon(1e-12));
  CHECK(normal_interval_probability(30.0, 31.0) > 0.0);
  CHECK(normal_interval_probability(-kInf, kInf) == 1.0);
}

TEST_CASE("LEQG closed form") {
  LeqgSpec s;
  CHECK(leqg_control(s, 0.0, 1.0) == doctest::Approx(-0.5));
  CHECK(leqg_control(s, 0.0, 0.0) == 0.0);
  s.mu = 0.7;
  CHECK(leqg_control(s, 0.3, 0.7) == 0.0);
  s.mu = 0.0;
  s.theta = 1.0;
  for (double t : {0.0, 0.3, 0.9}) CHECK(leqg_control(s, t, 1.0) == doctest::Approx(-1.0));
}

TEST_CASE("LEQG well-posedness truth table") {
  LeqgSpec s;
  CHECK(leqg_wellposed(s, 0.0));
  s.theta = 2.0;
  CHECK_FALSE(leqg_wellposed(s, 0.0));
  CHECK(leqg_wellposed(s, 0.5));
  CHECK(leqg_theta_threshold(s, 0.5) == doctest::Approx(3.0));
  CHECK_THROWS_AS(leqg_control(s, 0.0, 1.0), IllPosedError);
  s.alpha = 0.0;
  CHECK(std::isinf(leqg_theta_threshold(s, 0.0)));
}

TEST_CASE("LEQG magnitude grows with theta") {
  for (double t : {0.0, 0.5}) {
    for (double x : {-2.0, -0.3, 0.4, 2.0}) {
      double prev = 0.0;
      for (double theta : {-3.0, -1.0, 0.0, 0.5, 1.0, 1.5, 1.9}) {
        LeqgSpec s;
        s.theta = theta;
        if (!leqg_wellposed(s, t)) continue;
        const double u = std::abs(leqg_control(s, t, x));
        CHECK(u >= prev);
        prev = u;
      }
    }
  }
}

TEST_CASE("LEQG log Z matches quadrature") {
  for (double theta : {-1.0, 0.0, 0.5, 1.5}) {
    const auto p = make_risk_params(1.0, theta);
    const double lt = p.lambda_theta();
    for (double x : {-1.0, 0.0, 2.0}) {
      const double ref = std::log(oracle::gaussian_expectation(
          [&](double y) { return std::exp(-0.5 * y * y / lt); }, x, 1.0));
      CHECK(leqg_log_z(1.0, 0.0, p, 1.0, 1.0, x) == doctest::Approx(ref).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(leqg_log_z(1.0, 0.0, make_risk_params(1.0, 3.0), 1.0, 1.0, 0.0), IllPosedError);
}

TEST_CASE("hit probability against quadrature") {
  const Region r(-0.1, 0.0, 0.0);
  const double ref = oracle::gaussian_expectation([&](double y) { return r.contains(y) ? 1.0 : 0.0; }, 0.0, 1.0,
                                                  {-0.1, 0.0});
  CHECK(hit_probability(0.0, 0.0, r, 1.0, 1.0) == doctest::Approx(ref).epsilon(1e-10));
  CHECK(hit_probability(0.0, 0.0, r, 1.0, 1.0) == doctest::Approx(0.0398278).epsilon(1e-5));
  CHECK(hit_probability(0.0, 0.0, Region(0.0, kInf, 0.0), 1.0, 1.0) == doctest::Approx(0.5));
  CHECK(hit_probability(0.0, 3.0, Region(-kInf, kInf, 0.0), 1.0, 1.0) == 1.0);
  const double far = log_hit_probability(0.0, 60.0, Region(-0.05, 0.05, 0.0), 1.0, 1.0);
  CHECK(std::isfinite(far));
  CHECK(far < -1700.0);
}

TEST_CASE("single-region control equals sigma^2 d/dx log l") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ux(-3.0, 3.0);
  for (int i = 0; i < 50; ++i) {
    const double x = ux(gen);
    const double sigma = 0.5 + 0.1 * (i % 10);
    const Region r(-0.3 + 0.01 * i, 0.2 + 0.01 * i, -1.0);
    const double h = 1e-6;
    const double fd = sigma * sigma *
                      (std::log(hit_probability(0.2, x + h, r, sigma, 1.0)) -
                       std::log(hit_probability(0.2, x - h, r, sigma, 1.0))) /
                      (2 * h);
    const double u = single_region_control(0.2, x, r, sigma, 1.0, sigma * sigma, 1.0).control;
    CHECK(u == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("single-region control sign and symmetry") {
  const Region r(-0.05, 0.05, -10.0);
  CHECK(single_region_control(0.0, 0.0, r, 1.0, 1.0, 1.0, 1.0).control == doctest::Approx(0.0));
  CHECK(single_region_control(0.0, -1.0, r, 1.0, 1.0, 1.0, 1.0).control > 0.0);
  CHECK(single_region_control(0.0, 1.0, r, 1.0, 1.0, 1.0, 1.0).control < 0.0);
  CHECK_THROWS_AS(single_region_control(0.0, 1.0, r, 1.0, 1.0, 2.0, 1.0), ConfigError);
}

TEST_CASE("single-region control does not depend on the cost level") {
  for (double x : {-2.0, -0.5, 0.0, 0.01, 1.3}) {
    const double a = single_region_control(0.1, x, Region(-0.2, 0.3, -1.0), 1.0, 1.0, 1.0, 1.0).control;
    const double b = single_region_control(0.1, x, Region(-0.2, 0.3, -100.0), 1.0, 1.0, 1.0, 1.0).control;
    CHECK(bitwise_equal(a, b));
  }
}

TEST_CASE("single-region control saturates far away") {
  const Region r(-0.05, 0.05, -1.0);
  const auto far = single_region_control(0.0, 60.0, r, 1.0, 1.0, 1.0, 1.0);
  CHECK(far.saturated);
  CHECK_FALSE(far.diagnostic.empty());
  CHECK(far.control == doctest::Approx(-59.95));
  const auto near = single_region_control(0.0, 30.0, r, 1.0, 1.0, 1.0, 1.0);
  CHECK_FALSE(near.saturated);
  CHECK(near.control == doctest::Approx(-29.95).epsilon(1e-3));
}

TEST_CASE("partition log Z against quadrature") {
  const auto tt = EndCost::targets_threats({Region(-0.1, 0.0, -10.0), Region(0.0, 0.1, 10.0)});
  for (double theta : {-1.0, 0.5, 0.9}) {
    const auto p = make_risk_params(1.0, theta);
    for (double x : {-0.5, 0.0, 0.5, 2.0}) {
      const double ref = oracle::log_z(pieces_of(tt), p.lambda_theta(), x, 1.0);
      CHECK(partition_log_z(0.0, x, tt, p, 1.0, 1.0) == doctest::Approx(ref).epsilon(1e-8));
      CHECK(partition_log_z(0.0, x, tt.as_partition(), p, 1.0, 1.0) == doctest::Approx(ref).epsilon(1e-8));
    }
  }
  const auto zero = EndCost::partition({Region(-kInf, 0.0, 0.0), Region(0.0, kInf, 0.0)});
  CHECK(partition_log_z(0.0, 0.3, zero, make_risk_params(1.0, 0.0), 1.0, 1.0) == doctest::Approx(0.0));
  const auto single = EndCost::single_region(Region(-0.5, 0.5, 2.0));
  const auto p = make_risk_params(1.0, 0.0);
  CHECK(partition_log_z(0.0, 0.2, single, p, 1.0, 1.0) ==
        doctest::Approx(-2.0 + std::log(hit_probability(0.0, 0.2, Region(-0.5, 0.5, 2.0), 1.0, 1.0))));
  CHECK_THROWS_AS(partition_log_z(0.0, 0.0, tt, special_risk_params(1.0), 1.0, 1.0), ConfigError);
}

TEST_CASE("non-positive partition function is reported") {
  // A threat covering all of the mass: Z = 1 - l cancels to zero in floating point.
  const auto tt = EndCost::targets_threats({Region(-50.0, 50.0, 1e6)});
  const auto p = make_risk_params(1.0, 0.0);
  try {
    partition_log_z(0.0, 0.0, tt, p, 1.0, 1.0);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("partition function non-positive") != std::string::npos);
  }
  CHECK_NOTHROW(partition_log_z(0.0, 0.0, tt, risk_params_from_lambda_theta(1.0, -1.0), 1.0, 1.0));
}

TEST_CASE("mixture control against quadrature oracle") {
  const auto cfgs = {EndCost::targets_threats({Region(-0.1, 0.0, -10.0), Region(0.0, 0.1, 10.0)}),
                     two_targets(0.02, -10.0), two_targets(0.02, 10.0)};
  for (const auto& ec : cfgs) {
    for (double lt : {1.0, 0.5, -0.5, -1.0}) {
      const auto p = risk_params_from_lambda_theta(1.0, lt);
      for (double x : {-1.5, -0.7, 0.0, 0.3, 1.2}) {
        const double ref = oracle::control(pieces_of(ec), lt, 1.0, x, std::sqrt(0.5));
        const double u = mixture_control(0.5, x, ec, p, 1.0, 1.0, 1.0, 1.0).control;
        CHECK(std::abs(u - ref) <= 1e-6 * std::abs(ref) + 1e-9);
      }
    }
  }
}

TEST_CASE("special case uses the gradient of the expected end cost") {
  const auto ec = EndCost::targets_threats({Region(-0.1, 0.0, -10.0), Region(0.0, 0.1, 10.0)});
  const auto p = special_risk_params(1.0);
  for (double x : {-0.4, 0.0, 0.25}) {
    auto mean_cost = [&](double y) {
      return oracle::gaussian_expectation([&](double z) { return ec(z); }, y, 1.0, {-0.1, 0.0, 0.1});
    };
    const double h = 1e-4;
    const double ref = -(mean_cost(x + h) - mean_cost(x - h)) / (2 * h);
    CHECK(mixture_control(0.0, x, ec, p, 1.0, 1.0, 1.0, 1.0).control == doctest::Approx(ref).epsilon(1e-6));
  }
  // Special params approach the limit of nearby theta.
  const double near = mixture_control(0.0, 0.2, ec, make_risk_params(1.0, 1.0 - 1e-7), 1.0, 1.0, 1.0, 1.0).control;
  CHECK(mixture_control(0.0, 0.2, ec, p, 1.0, 1.0, 1.0, 1.0).control == doctest::Approx(near).epsilon(1e-5));
}

TEST_CASE("targets/threats and partition forms agree") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> ux(-3.0, 3.0);
  const auto tt = EndCost::targets_threats({Region(-1.01, -0.99, -10.0), Region(-0.1, 0.0, 4.0),
                                            Region(0.0, 0.1, 10.0), Region(0.99, 1.01, -10.0)});
  const auto part = tt.as_partition();
  for (int i = 0; i < 100; ++i) {
    const double x = ux(gen);
    const double t = 0.9 * (i % 7) / 7.0;
    for (double lt : {1.0, 0.5, -0.5, 2.0}) {
      const auto p = risk_params_from_lambda_theta(1.0, lt);
      const double a = mixture_control(t, x, tt, p, 1.0, 1.0, 1.0, 1.0).control;
      const double b = mixture_control(t, x, part, p, 1.0, 1.0, 1.0, 1.0).control;
      CHECK(std::abs(a - b) <= 1e-10 * std::max(std::abs(a), std::abs(b)) + 1e-300);
    }
  }
}

TEST_CASE("partition weights sum to one") {
  const auto part = EndCost::targets_threats({Region(-0.1, 0.0, -10.0), Region(0.0, 0.1, 10.0)}).as_partition();
  const auto m = mixture_control(0.0, 0.3, part, make_risk_params(1.0, 0.5), 1.0, 1.0, 1.0, 1.0);
  double sum = 0.0;
  for (double w : m.weights.weights) {
    CHECK(w >= 0.0);
    sum += w;
  }
  CHECK(sum == doctest::Approx(1.0));
  CHECK(m.weights.prefactor == doctest::Approx(2.0));
}

TEST_CASE("mixture control directions") {
  const auto equal = EndCost::targets_threats({Region(-1.0, 1.0, 3.0)});
  const auto p = make_risk_params(1.0, 0.0);
  const auto tgt = EndCost::targets_threats({Region(-0.05, 0.05, -10.0)});
  const auto thr = EndCost::targets_threats({Region(-0.05, 0.05, 10.0)});
  const auto seeking = risk_params_from_lambda_theta(1.0, -0.5);
  for (double x : {-2.0, -0.5, 0.5, 2.0}) {
    const double toward = -x;
    CHECK(mixture_control(0.0, x, tgt, p, 1.0, 1.0, 1.0, 1.0).control * toward > 0.0);
    CHECK(mixture_control(0.0, x, thr, seeking, 1.0, 1.0, 1.0, 1.0).control * toward < 0.0);
  }
  const auto constant = EndCost::constant(5.0);
  CHECK(mixture_control(0.0, 0.7, constant, p, 1.0, 1.0, 1.0, 1.0).control == 0.0);
  (void)equal;
}

TEST_CASE("two-target control is antisymmetric") {
  const auto ec = two_targets(0.02, -10.0);
  for (double lt : {1.0, -0.5}) {
    const auto p = risk_params_from_lambda_theta(1.0, lt);
    for (double x : {0.1, 0.7, 1.0, 2.5}) {
      CHECK(mixture_control(0.5, -x, ec, p, 1.0, 1.0, 1.0, 1.0).control ==
            -mixture_control(0.5, x, ec, p, 1.0, 1.0, 1.0, 1.0).control);
    }
  }
}

TEST_CASE("delta two-target formula") {
  const auto p = make_risk_params(1.0, 0.0);
  CHECK(delta_two_target_control(0.5, 0.0, p, 1.0, 1.0, 1.0) == 0.0);
  CHECK(delta_two_target_control(0.5, 0.5, p, 1.0, 1.0, 1.0) == doctest::Approx((std::tanh(1.0) - 0.5) / 0.5));
  CHECK(delta_two_target_control(0.5, 0.5, p, 1.0, 1.0, 1.0) == doctest::Approx(0.5232).epsilon(1e-4));
  CHECK(delta_two_target_control(0.5, -0.8, p, 1.0, 1.0, 1.0) == -delta_two_target_control(0.5, 0.8, p, 1.0, 1.0, 1.0));

  const double root = oracle::bisect([](double x) { return std::tanh(2 * x) - x; }, 0.5, 1.5);
  const auto zeros = find_zero_crossings([&](double x) { return delta_two_target_control(0.5, x, p, 1.0, 1.0, 1.0); },
                                         -3.0, 3.0);
  REQUIRE(zeros.size() == 3);
  CHECK(zeros[0] == doctest::Approx(-root).epsilon(1e-9));
  CHECK(zeros[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(zeros[2] == doctest::Approx(root).epsilon(1e-9));
  CHECK(root == doctest::Approx(0.9575).epsilon(1e-4));

  const auto early = find_zero_crossings([&](double x) { return delta_two_target_control(0.0, x, p, 1.0, 1.0, 1.0); },
                                         -3.0, 3.0);
  CHECK(early.size() == 1);
}

TEST_CASE("symmetry breaking time") {
  CHECK(symmetry_breaking_time(1.0) == 1.0);
  CHECK(symmetry_breaking_time(2.0) == 0.25);
  CHECK(symmetry_breaking_time(1e6) < 1e-11);
  CHECK_THROWS_AS(symmetry_breaking_time(0.0), ConfigError);
}

TEST_CASE("zero crossings of the finite-width curve do not depend on theta") {
  const auto ec = two_targets(0.02, -10.0);
  std::vector<std::vector<double>> all;
  for (double lt : {1.0, 0.5, -0.5}) {
    const auto p = risk_params_from_lambda_theta(1.0, lt);
    all.push_back(find_zero_crossings(
        [&](double x) { return mixture_control(0.5, x, ec, p, 1.0, 1.0, 1.0, 1.0).control; }, -3.0, 3.0));
  }
  REQUIRE(all[0].size() == 3);
  for (const auto& z : all) {
    REQUIRE(z.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(z[i] - all[0][i]) <= 1e-6);
  }
  CHECK(std::abs(all[0][2] - 0.9575) < 0.05);
}

TEST_CASE("finite-width curve approaches the delta limit") {
  // Deep-target regime: -c / lambda_theta = 20.
  const auto p = risk_params_from_lambda_theta(1.0, 0.5);
  for (double t : {0.0, 0.5}) {
    double prev = kInf;
    for (double eps : {0.1, 0.02, 0.004}) {
      const auto ec = two_targets(eps, -10.0);
      double gap = 0.0;
      for (int i = 0; i <= 400; ++i) {
        const double x = -2.0 + 0.01 * i;
        gap = std::max(gap, std::abs(mixture_control(t, x, ec, p, 1.0, 1.0, 1.0, 1.0).control -
                                     delta_two_target_control(t, x, p, 1.0, 1.0, 1.0)));
      }
      CHECK(gap < prev);
      prev = gap;
    }
    CHECK(prev < 1e-5);
  }
}

TEST_CASE("policies wrap the closed forms") {
  LeqgSpec s;
  const auto pol = leqg_policy(s);
  CHECK(pol(0.0, Vector::Constant(1, 1.0))(0) == doctest::Approx(-0.5));
  const auto ec = two_targets(0.02, -10.0);
  const auto p = make_risk_params(1.0, 0.0);
  const auto mp = mixture_policy(ec, p, 1.0, 1.0, 1.0, 1.0);
  CHECK(mp(0.5, Vector::Constant(1, 0.3))(0) == mixture_control(0.5, 0.3, ec, p, 1.0, 1.0, 1.0, 1.0).control);
}
