#pragma once

#include "rspi/core_model.hpp"
#include "rspi/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace rspi {

/// State-feedback control law u(t, x).
class Policy {
 public:
  using Law = std::function<Vector(double, const Vector&)>;

  Policy(std::string name, Law law) : name_(std::move(name)), law_(std::move(law)) {}

  /// u == 0 in R^k.
  static Policy zero(std::size_t control_dim);

  Vector operator()(double t, const Vector& x) const { return law_(t, x); }
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  Law law_;
};

struct CostParts {
  double control_cost = 0.0;
  double path_cost = 0.0;
  double end_cost = 0.0;

  double total() const noexcept { return control_cost + path_cost + end_cost; }
};

/// One Euler-Maruyama sample path. Column n of `states` is X at times[n];
/// columns of `controls` and `noise` belong to the step starting at times[n].
struct Trajectory {
  std::vector<double> times;
  Matrix states;    // d x (steps + 1)
  Matrix controls;  // k x steps
  Matrix noise;     // k x steps, sigma * dW
  CostParts cost_parts;

  std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
  double step_size(std::size_t n) const { return times[n + 1] - times[n]; }
  Vector final_state() const { return states.col(states.cols() - 1); }
};

/// Grid t0, t0 + dt, ... ending exactly at `horizon`; the last step is truncated
/// when (horizon - t0) is not a multiple of dt.
std::vector<double> time_grid(double t0, double horizon, double dt);

Trajectory rollout(const ControlProblem& problem, const Policy& policy, const Vector& x0,
                   double t0, double dt, RngStream& rng);

/// phi(X_T) + sum (|R u|^2 / 2 + V) dt over the stored grid.
CostParts cost_parts(const Trajectory& traj, const ControlProblem& problem);
double trajectory_cost(const Trajectory& traj, const ControlProblem& problem);

/// Re-integrates the states from x0 using the stored controls and noise increments.
Matrix replay_states(const Trajectory& traj, const ControlProblem& problem);

struct BatchOptions {
  std::size_t n = 1;
  std::uint64_t seed = 0;
  /// 0 selects std::thread::hardware_concurrency().
  unsigned workers = 0;
};

/// Sample i uses stream i of `seed`; output order follows the sample index and
/// does not depend on the worker count.
std::vector<Trajectory> batch_rollout(const ControlProblem& problem, const Policy& policy,
                                      const Vector& x0, double t0, double dt,
                                      const BatchOptions& options);

/// Total costs only, without keeping the trajectories around.
std::vector<double> batch_costs(const ControlProblem& problem, const Policy& policy,
                                const Vector& x0, double t0, double dt,
                                const BatchOptions& options);

/// CSV dump with header t,x_1..x_d,u_1..u_k. The final row has no control; its
/// control columns are left empty.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Runs body(i) for i in [0, n) on `workers` threads with a static contiguous
/// split. Exceptions are rethrown as BatchError for the lowest failing index.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body);

unsigned resolve_workers(unsigned requested) noexcept;

}  // namespace rspi
