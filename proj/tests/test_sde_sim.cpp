#include "rspi/errors.hpp"
#include "rspi/sde_sim.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace rspi;

namespace {

Policy constant_policy(double u) {
  return Policy("const", [u](double, const Vector&) { return Vector::Constant(1, u); });
}

}  // namespace

TEST_CASE("time grid lands on the horizon") {
  const auto g = time_grid(0.0, 1.0, 1e-3);
  CHECK(g.size() == 1001);
  CHECK(g.back() == 1.0);
  const auto h = time_grid(0.0, 1.0, 0.3);
  REQUIRE(h.size() == 5);
  CHECK(h[3] == doctest::Approx(0.9));
  CHECK(h[4] == 1.0);
  const auto k = time_grid(0.5, 1.0, 0.1);
  CHECK(k.size() == 6);
  CHECK_THROWS_AS(time_grid(1.0, 1.0, 0.1), ConfigError);
  CHECK_THROWS_AS(time_grid(0.0, 1.0, 0.0), ConfigError);
}

TEST_CASE("rollout records states, controls and noise") {
  const auto problem = ControlProblem::scalar(1.0, 2.0, EndCost::quadratic(1.0, 0.0), 1.0);
  RngStream rng(1, 0);
  const auto traj = rollout(problem, constant_policy(1.0), Vector::Constant(1, 0.0), 0.0, 0.01, rng);
  CHECK(traj.steps() == 100);
  CHECK(traj.states.cols() == 101);
  CHECK(traj.controls.cols() == 100);
  // Constant control: cost R^2 u^2 T / 2.
  CHECK(traj.cost_parts.control_cost == doctest::Approx(2.0).epsilon(1e-12));
  const double xT = traj.final_state()(0);
  CHECK(traj.cost_parts.end_cost == doctest::Approx(0.5 * xT * xT));
  // X_T = u T + sum noise.
  CHECK(xT == doctest::Approx(1.0 + traj.noise.sum()).epsilon(1e-12));
  CHECK(trajectory_cost(traj, problem) == doctest::Approx(traj.cost_parts.total()));
}

TEST_CASE("replay reproduces the path bitwise") {
  ProblemTerms terms;
  terms.drift = [](double t, const Vector& x) { return Vector(-x * (1.0 + t)); };
  terms.path_cost = [](double, const Vector& x) { return 0.1 * x.squaredNorm(); };
  const auto problem = ControlProblem::scalar(0.7, 1.0 / 0.7, EndCost::quadratic(1.0, 0.5), 1.0, terms);
  const Policy policy("fb", [](double, const Vector& x) { return Vector(-0.3 * x); });
  RngStream rng(9, 3);
  const auto traj = rollout(problem, policy, Vector::Constant(1, 1.0), 0.0, 0.013, rng);
  const Matrix replay = replay_states(traj, problem);
  CHECK((replay.array() == traj.states.array()).all());
  const auto parts = cost_parts(traj, problem);
  CHECK(parts.path_cost == traj.cost_parts.path_cost);
  CHECK(parts.path_cost > 0.0);
}

TEST_CASE("uncontrolled endpoint statistics") {
  const auto problem = ControlProblem::scalar(1.0, 1.0, EndCost::quadratic(1.0, 0.0), 1.0);
  const double x0 = 0.5;
  const std::size_t n = 40000;
  const auto costs = batch_costs(problem, Policy::zero(1), Vector::Constant(1, x0), 0.0, 0.01,
                                 BatchOptions{n, 11, 0});
  // E[X_T^2 / 2] = (x0^2 + T) / 2, Var = (2 T^2 + 4 x0^2 T) / 4.
  double mean = 0.0;
  for (double c : costs) mean += c;
  mean /= n;
  const double sd = std::sqrt((2.0 + 4.0 * x0 * x0) / 4.0);
  CHECK(std::abs(mean - 0.625) < 4.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("OU drift shrinks the mean") {
  ProblemTerms terms;
  terms.drift = [](double, const Vector& x) { return Vector(-x); };
  const auto problem = ControlProblem::scalar(0.5, 2.0, EndCost::quadratic(0.0, 0.0), 1.0, terms);
  const std::size_t n = 4000;
  const auto paths = batch_rollout(problem, Policy::zero(1), Vector::Constant(1, 2.0), 0.0, 0.001,
                                   BatchOptions{n, 3, 0});
  double m = 0.0;
  for (const auto& p : paths) m += p.final_state()(0);
  m /= n;
  const double sd = 0.5 * std::sqrt((1.0 - std::exp(-2.0)) / 2.0);
  CHECK(std::abs(m - 2.0 * std::exp(-1.0)) < 4.0 * sd / std::sqrt(double(n)) + 1e-3);
}

TEST_CASE("batch output is independent of the worker count") {
  const auto problem = ControlProblem::scalar(1.0, 1.0, EndCost::quadratic(1.0, 0.0), 1.0);
  const Policy policy("fb", [](double, const Vector& x) { return Vector(-x); });
  const auto a = batch_costs(problem, policy, Vector::Zero(1), 0.0, 0.01, BatchOptions{257, 42, 1});
  const auto b = batch_costs(problem, policy, Vector::Zero(1), 0.0, 0.01, BatchOptions{257, 42, 4});
  const auto c = batch_costs(problem, policy, Vector::Zero(1), 0.0, 0.01, BatchOptions{257, 42, 7});
  CHECK(a == b);
  CHECK(a == c);

  // Sample i is stream i.
  RngStream rng(42, 100);
  const auto traj = rollout(problem, policy, Vector::Zero(1), 0.0, 0.01, rng);
  CHECK(traj.cost_parts.total() == a[100]);
}

TEST_CASE("non-finite states are reported with the step and sample") {
  ProblemTerms terms;
  terms.drift = [](double, const Vector& x) { return Vector(x.array().cube() * 1e3); };
  const auto problem = ControlProblem::scalar(1.0, 1.0, EndCost::quadratic(1.0, 0.0), 1.0, terms);
  RngStream rng(0, 0);
  CHECK_THROWS_AS(rollout(problem, Policy::zero(1), Vector::Constant(1, 10.0), 0.0, 0.1, rng), SimulationError);
  CHECK_THROWS_AS(batch_costs(problem, Policy::zero(1), Vector::Constant(1, 10.0), 0.0, 0.1, BatchOptions{8, 0, 2}),
                  BatchError);
  try {
    batch_costs(problem, Policy::zero(1), Vector::Constant(1, 10.0), 0.0, 0.1, BatchOptions{8, 0, 2});
  } catch (const BatchError& e) {
    CHECK(e.sample() == 0);
  }
}

TEST_CASE("trajectory csv") {
  const auto problem = ControlProblem::scalar(1.0, 1.0, EndCost::quadratic(1.0, 0.0), 1.0);
  RngStream rng(0, 0);
  const auto traj = rollout(problem, Policy::zero(1), Vector::Zero(1), 0.0, 0.25, rng);
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  const auto text = os.str();
  CHECK(text.rfind("t,x_1,u_1\n", 0) == 0);
  int lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == 6);
  CHECK(text.substr(text.size() - 2) == ",\n");
}
