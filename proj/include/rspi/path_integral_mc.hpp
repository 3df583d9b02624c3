#pragma once

#include "rspi/analytic_control.hpp"
#include "rspi/core_model.hpp"
#include "rspi/sde_sim.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rspi {

struct McOptions {
  std::size_t n_samples = 100000;
  double dt = 1e-3;
  std::uint64_t seed = 42;
  /// 0 selects std::thread::hardware_concurrency().
  unsigned workers = 0;
};

/// Monte Carlo estimate of log Z_theta(t, x).
struct ZEstimate {
  double log_z = 0.0;
  /// Delta-method standard error of log_z.
  double std_err_log_z = 0.0;
  std::size_t n_samples = 0;
  /// (sum w)^2 / sum w^2 over the path weights.
  double effective_sample_size = 0.0;
};

struct ValueEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::size_t n_samples = 0;
};

struct ControlEstimate {
  Vector control;
  Vector std_err;
  /// Finite-difference step actually used.
  double step = 0.0;
  std::size_t n_samples = 0;
};

/// Cost phi(X_T) + sum V dt of uncontrolled paths from each start state. Every
/// start sees the same noise on stream i (common random numbers). Row i holds
/// sample i, column j start j.
Matrix uncontrolled_costs(const ControlProblem& problem, double t, std::span<const Vector> starts,
                          const McOptions& options);

/// Per-path exponents -(1/lambda_theta) (phi(X_T) + sum V dt) from a single start.
std::vector<double> path_exponents(const ControlProblem& problem, const RiskParams& params,
                                   double t, const Vector& x, const McOptions& options);

/// Max-shifted log-mean-exp of the exponents with its delta-method error.
/// Throws DegenerateEstimate when every weight vanishes or one is infinite.
ZEstimate log_mean_exp_estimate(std::span<const double> exponents);

/// Requires non-special params and n_samples >= 2.
ZEstimate estimate_log_z(const ControlProblem& problem, const RiskParams& params, double t,
                         const Vector& x, const McOptions& options);

/// -lambda_theta log Z, or the plain mean cost of uncontrolled paths when theta = 1/lambda0.
ValueEstimate estimate_value(const ControlProblem& problem, const RiskParams& params, double t,
                             const Vector& x, const McOptions& options);

/// lambda_theta (R^T R)^{-1} B^T grad log Z by central differences with common
/// random numbers. The default step is 1e-2 * sigma * sqrt(T - t). In the special
/// case the gradient of the mean cost is used instead: u = -(R^T R)^{-1} B^T grad J.
ControlEstimate estimate_control(const ControlProblem& problem, const RiskParams& params,
                                 double t, const Vector& x, std::optional<double> step,
                                 const McOptions& options);

double default_fd_step(const ControlProblem& problem, double t);

struct BlowupDiagnostic {
  /// Share of the total weight carried by the largest 1% of weights.
  double top_share = 0.0;
  /// Largest single-weight share on the first half and on the full sample.
  double max_share_half = 0.0;
  double max_share_full = 0.0;
  bool empirical_flag = false;
  /// Set when a quadratic end-cost spec was supplied.
  std::optional<bool> analytic_divergent;
  double analytic_threshold = 0.0;
  std::string message;

  bool suspected_divergent() const noexcept {
    return empirical_flag || analytic_divergent.value_or(false);
  }
};

/// Heavy-tail check on path exponents (at least 100). With a LEQG spec the exact
/// well-posedness bound is evaluated as well.
BlowupDiagnostic detect_blowup(std::span<const double> exponents,
                               const LeqgSpec* quadratic = nullptr, double t = 0.0);

/// Feedback law that re-estimates the control by Monte Carlo at every call.
Policy mc_policy(const ControlProblem& problem, const RiskParams& params, McOptions options,
                 std::optional<double> step = std::nullopt);

}  // namespace rspi
