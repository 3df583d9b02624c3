#include "rspi/sde_sim.hpp"

#include "rspi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace rspi {

namespace {

void check_state_dim(const ControlProblem& problem, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != problem.state_dim()) {
    throw ConfigError("initial state has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(problem.state_dim()));
  }
}

// X_{n+1} = X_n + b h + B (u h + sigma dW). Shared by rollout and replay so both
// perform bit-for-bit the same arithmetic.
Vector advance(const ControlProblem& problem, double t, double h, const Vector& x,
               const Vector& u, const Vector& noise) {
  Vector forcing = u * h + noise;
  Vector next = x;
  if (problem.has_drift()) {
    next += problem.drift(t, x) * h;
  }
  if (problem.has_gain()) {
    next += problem.gain(t, x) * forcing;
  } else {
    next += forcing;
  }
  return next;
}

}  // namespace

Policy Policy::zero(std::size_t control_dim) {
  const auto k = static_cast<Eigen::Index>(control_dim);
  return Policy("zero", [k](double, const Vector&) { return Vector::Zero(k); });
}

std::vector<double> time_grid(double t0, double horizon, double dt) {
  const double span = horizon - t0;
  if (!(dt > 0.0) || !std::isfinite(dt) || !(span > 0.0) || dt > span * (1.0 + 1e-12)) {
    throw ConfigError("time step must satisfy 0 < dt <= T - t0");
  }
  const double ratio = span / dt;
  const double nearest = std::round(ratio);
  const auto steps = static_cast<std::size_t>(
      std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio) ? nearest : std::ceil(ratio));
  std::vector<double> times(std::max<std::size_t>(steps, 1) + 1);
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    times[i] = t0 + static_cast<double>(i) * dt;
  }
  times.back() = horizon;
  return times;
}

Trajectory rollout(const ControlProblem& problem, const Policy& policy, const Vector& x0,
                   double t0, double dt, RngStream& rng) {
  check_state_dim(problem, x0);
  Trajectory traj;
  traj.times = time_grid(t0, problem.horizon(), dt);
  const auto steps = static_cast<Eigen::Index>(traj.steps());
  const auto d = static_cast<Eigen::Index>(problem.state_dim());
  const auto k = static_cast<Eigen::Index>(problem.control_dim());
  traj.states.resize(d, steps + 1);
  traj.controls.resize(k, steps);
  traj.noise.resize(k, steps);
  traj.states.col(0) = x0;

  Vector x = x0;
  Vector z(k);
  for (Eigen::Index n = 0; n < steps; ++n) {
    const auto idx = static_cast<std::size_t>(n);
    const double t = traj.times[idx];
    const double h = traj.times[idx + 1] - t;
    Vector u = policy(t, x);
    if (u.size() != k) {
      throw ConfigError("policy '" + policy.name() + "' returned a control of dimension " +
                        std::to_string(u.size()));
    }
    if (!u.allFinite()) {
      throw SimulationError("policy '" + policy.name() + "' produced a non-finite control", idx);
    }
    rng.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(k)));
    Vector noise = problem.sigma() * (std::sqrt(h) * z);
    x = advance(problem, t, h, x, u, noise);
    if (!x.allFinite()) {
      throw SimulationError("non-finite state", idx + 1);
    }
    traj.controls.col(n) = u;
    traj.noise.col(n) = noise;
    traj.states.col(n + 1) = x;
  }
  traj.cost_parts = cost_parts(traj, problem);
  return traj;
}

CostParts cost_parts(const Trajectory& traj, const ControlProblem& problem) {
  CostParts parts;
  const auto& R = problem.control_penalty();
  for (std::size_t n = 0; n < traj.steps(); ++n) {
    const auto col = static_cast<Eigen::Index>(n);
    const double h = traj.step_size(n);
    parts.control_cost += 0.5 * (R * traj.controls.col(col)).squaredNorm() * h;
    if (problem.has_path_cost()) {
      parts.path_cost += problem.path_cost(traj.times[n], traj.states.col(col)) * h;
    }
  }
  parts.end_cost = problem.end_cost(traj.final_state());
  return parts;
}

double trajectory_cost(const Trajectory& traj, const ControlProblem& problem) {
  return cost_parts(traj, problem).total();
}

Matrix replay_states(const Trajectory& traj, const ControlProblem& problem) {
  Matrix states(traj.states.rows(), traj.states.cols());
  states.col(0) = traj.states.col(0);
  Vector x = states.col(0);
  for (std::size_t n = 0; n < traj.steps(); ++n) {
    const auto col = static_cast<Eigen::Index>(n);
    x = advance(problem, traj.times[n], traj.step_size(n), x, traj.controls.col(col),
                traj.noise.col(col));
    states.col(col + 1) = x;
  }
  return states;
}

unsigned resolve_workers(unsigned requested) noexcept {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body) {
  const std::size_t w = std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(n, 1));
  std::mutex failure_mutex;
  std::size_t failed_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr failure;

  auto run_chunk = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
        return;
      }
    }
  };

  if (w <= 1) {
    run_chunk(0, n);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(w);
    for (std::size_t j = 0; j < w; ++j) {
      threads.emplace_back(run_chunk, n * j / w, n * (j + 1) / w);
    }
  }

  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw BatchError(e.what(), failed_index);
    }
  }
}

std::vector<Trajectory> batch_rollout(const ControlProblem& problem, const Policy& policy,
                                      const Vector& x0, double t0, double dt,
                                      const BatchOptions& options) {
  if (options.n < 1) {
    throw ConfigError("batch needs at least one sample");
  }
  std::vector<Trajectory> out(options.n);
  parallel_for(options.n, options.workers, [&](std::size_t i) {
    RngStream rng(options.seed, i);
    out[i] = rollout(problem, policy, x0, t0, dt, rng);
  });
  return out;
}

std::vector<double> batch_costs(const ControlProblem& problem, const Policy& policy,
                                const Vector& x0, double t0, double dt,
                                const BatchOptions& options) {
  if (options.n < 1) {
    throw ConfigError("batch needs at least one sample");
  }
  std::vector<double> out(options.n);
  parallel_for(options.n, options.workers, [&](std::size_t i) {
    RngStream rng(options.seed, i);
    out[i] = rollout(problem, policy, x0, t0, dt, rng).cost_parts.total();
  });
  return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const auto d = traj.states.rows();
  const auto k = traj.controls.rows();
  os << "t";
  for (Eigen::Index i = 0; i < d; ++i) os << ",x_" << (i + 1);
  for (Eigen::Index j = 0; j < k; ++j) os << ",u_" << (j + 1);
  os << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  for (std::size_t n = 0; n < traj.times.size(); ++n) {
    const auto col = static_cast<Eigen::Index>(n);
    put(traj.times[n]);
    for (Eigen::Index i = 0; i < d; ++i) {
      os << ',';
      put(traj.states(i, col));
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      os << ',';
      if (n < traj.steps()) put(traj.controls(j, col));
    }
    os << '\n';
  }
}

}  // namespace rspi
