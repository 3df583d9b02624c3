#pragma once

#include "rspi/core_model.hpp"
#include "rspi/sde_sim.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rspi {

// ---------------------------------------------------------------------------
// Gaussian helpers
// ---------------------------------------------------------------------------

/// Standard normal density.
double normal_pdf(double z) noexcept;
/// Standard normal CDF via erfc, accurate in both tails.
double normal_cdf(double z) noexcept;
/// Phi(b) - Phi(a) for a <= b without cancellation when both lie in one tail.
double normal_interval_probability(double a, double b) noexcept;

// ---------------------------------------------------------------------------
// LEQG
// ---------------------------------------------------------------------------

/// 1-D linear problem (b = 0, B = 1, V = 0) with end cost (alpha^2/2)(x - mu)^2.
struct LeqgSpec {
  double alpha = 1.0;
  double mu = 0.0;
  double R = 1.0;
  double sigma = 1.0;
  double theta = 0.0;
  double horizon = 1.0;

  double lambda0() const noexcept { return sigma * sigma * R * R; }
};

/// 1/(alpha^2 sigma^2 (T - t)) + 1/(sigma^2 R^2); +inf when alpha == 0.
double leqg_theta_threshold(const LeqgSpec& spec, double t);

/// theta strictly below the threshold above.
bool leqg_wellposed(const LeqgSpec& spec, double t);

/// alpha^2 (mu - x) / (R^2 + (T - t) alpha^2 (1 - sigma^2 R^2 theta)).
/// Throws IllPosedError outside the well-posed range or on a zero denominator.
double leqg_control(const LeqgSpec& spec, double t, double x);

/// Closed-form log Z for the quadratic end cost (used as an oracle for the
/// Monte Carlo estimator); throws IllPosedError when the Gaussian integral diverges.
double leqg_log_z(double alpha, double mu, const RiskParams& params, double sigma, double tau,
                  double x);

// ---------------------------------------------------------------------------
// Piecewise-constant end costs
// ---------------------------------------------------------------------------

/// l(t, x | S): probability that the uncontrolled diffusion from (t, x) ends in S at T.
double hit_probability(double t, double x, const Region& region, double sigma, double horizon);

/// log l(t, x | S); falls back to the Gaussian tail asymptotic where l underflows.
double log_hit_probability(double t, double x, const Region& region, double sigma,
                           double horizon);

/// d/dx l(t, x | S), from the transition densities at the region edges.
double hit_probability_gradient(double t, double x, const Region& region, double sigma,
                                double horizon);

struct RegionControl {
  double control = 0.0;
  /// l underflowed; control is the tail asymptotic (edge - x)/(T - t).
  bool saturated = false;
  std::string diagnostic;
};

/// u0*(t, x | S) = lambda0 (R^T R)^{-1} (d l / d x) / l, the theta = 0 control for a
/// cost that is finite on S only. Independent of the region's cost level.
RegionControl single_region_control(double t, double x, const Region& region, double sigma,
                                    double horizon, double lambda0, double R);

/// log Z_theta(t, x) for b = 0, V = 0. Supports every EndCost variant; the
/// piecewise variants use the mixture formulas, the quadratic one the Gaussian integral.
double partition_log_z(double t, double x, const EndCost& end_cost, const RiskParams& params,
                       double sigma, double horizon);

struct MixtureWeights {
  std::vector<double> weights;
  /// lambda_theta / lambda0; 0 in the special case (weights are then unused).
  double prefactor = 0.0;
};

struct MixtureControl {
  double control = 0.0;
  MixtureWeights weights;
};

/// Weighted sum of single-region controls. Partition costs use weights over all
/// regions (summing to one); targets/threats use the background-relative weights,
/// which may be negative. Special params fall back to the gradient of the expected
/// end cost: u = -(sigma^2/lambda0) d/dx sum c_i l_i.
MixtureControl mixture_control(double t, double x, const EndCost& end_cost,
                               const RiskParams& params, double sigma, double horizon,
                               double lambda0, double R);

/// Two infinitesimal targets at +-1:
/// u = lambda_theta / (lambda0 (T - t)) * (tanh(x / (sigma^2 (T - t))) - x).
double delta_two_target_control(double t, double x, const RiskParams& params, double sigma,
                                double horizon, double lambda0);

/// Remaining horizon 1/sigma^2 at which the two-target control bifurcates.
double symmetry_breaking_time(double sigma);

/// Feedback policy applying leqg_control on a 1-D state.
Policy leqg_policy(const LeqgSpec& spec);

/// Feedback policy applying mixture_control on a 1-D state.
Policy mixture_policy(EndCost end_cost, const RiskParams& params, double sigma, double horizon,
                      double lambda0, double R);

/// Zeros of f on [lo, hi]: sign changes on a uniform grid refined by bisection,
/// plus grid points where f is exactly zero.
std::vector<double> find_zero_crossings(const std::function<double(double)>& f, double lo,
                                        double hi, double step = 1e-3, double tol = 1e-12);

}  // namespace rspi
