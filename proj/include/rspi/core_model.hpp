#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <variant>
#include <vector>

namespace rspi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Risk parameters
// ---------------------------------------------------------------------------

/// Risk sensitivity theta together with the noise/cost ratio lambda0 and the
/// derived effective temperature lambda_theta = lambda0 / (1 - lambda0 * theta).
///
/// At theta == 1/lambda0 the log transform degenerates; that point is carried
/// as a tag (is_special()) rather than an infinite lambda_theta.
class RiskParams {
 public:
  double theta() const noexcept { return theta_; }
  double lambda0() const noexcept { return lambda0_; }
  bool is_special() const noexcept { return special_; }

  /// Throws ConfigError when is_special().
  double lambda_theta() const;

  /// 1/lambda0 - theta; exactly zero in the special case.
  double inverse_lambda_theta() const noexcept { return inverse_lambda_theta_; }

  /// lambda_theta / lambda0, the prefactor of the mixture controls.
  double prefactor() const { return lambda_theta() / lambda0_; }

 private:
  friend RiskParams make_risk_params(double lambda0, double theta);
  RiskParams(double lambda0, double theta);

  double lambda0_;
  double theta_;
  double lambda_theta_;
  double inverse_lambda_theta_;
  bool special_;
};

/// Rejects lambda0 == 0 and non-finite inputs with ConfigError.
RiskParams make_risk_params(double lambda0, double theta);

/// Risk params from a target lambda_theta instead of theta (theta = 1/lambda0 - 1/lambda_theta).
RiskParams risk_params_from_lambda_theta(double lambda0, double lambda_theta);

/// Special-case params (theta = 1/lambda0).
RiskParams special_risk_params(double lambda0);

/// sigma sigma^T == lambda0 (R^T R)^{-1}, elementwise within 1e-10 relative to the
/// larger of the two matrices' max-norms. False when R is singular or shapes differ.
bool check_noise_cost_compatibility(const Matrix& sigma, const Matrix& control_penalty,
                                    double lambda0);
bool check_noise_cost_compatibility(double sigma, double control_penalty, double lambda0);

/// mean + (theta/2) variance: the value functional truncated after the variance term.
double small_theta_reference(double mean, double variance, double theta);

// ---------------------------------------------------------------------------
// End costs
// ---------------------------------------------------------------------------

/// One-dimensional interval [lower, upper) carrying an end-cost level.
/// Negative cost marks a target, positive a threat. Bounds may be infinite.
class Region {
 public:
  Region(double lower, double upper, double cost = 0.0);

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  double cost() const noexcept { return cost_; }

  bool contains(double x) const noexcept { return lower_ <= x && x < upper_; }
  bool bounded() const noexcept;
  double width() const noexcept { return upper_ - lower_; }
  double center() const noexcept { return 0.5 * (lower_ + upper_); }

  Region with_cost(double c) const { return Region(lower_, upper_, c); }

 private:
  double lower_;
  double upper_;
  double cost_;
};

/// phi(x) = (alpha^2 / 2) |x - mu|^2.
struct QuadraticCost {
  double alpha;
  Vector mu;
};

/// Piecewise-constant cost over ordered regions covering the whole line.
struct PartitionCost {
  std::vector<Region> regions;
};

/// Bounded disjoint targets/threats over a zero-cost background.
struct TargetsThreatsCost {
  std::vector<Region> regions;
};

/// Cost region.cost() inside the region and +infinity outside.
struct SingleRegionCost {
  Region region;
};

class EndCost {
 public:
  using Variant = std::variant<QuadraticCost, PartitionCost, TargetsThreatsCost, SingleRegionCost>;

  static EndCost quadratic(double alpha, double mu);
  static EndCost quadratic(double alpha, Vector mu);
  /// Regions are sorted by lower bound; they must tile (-inf, inf) without gaps.
  static EndCost partition(std::vector<Region> regions);
  /// Regions are sorted; each must be bounded and they must be pairwise disjoint.
  static EndCost targets_threats(std::vector<Region> regions);
  static EndCost single_region(Region region);
  /// phi == c everywhere, stored as a one-piece partition.
  static EndCost constant(double c);

  double operator()(const Vector& x) const;
  double operator()(double x) const;

  const Variant& variant() const noexcept { return variant_; }

  template <typename T>
  const T* get_if() const noexcept {
    return std::get_if<T>(&variant_);
  }

  /// Re-expresses a targets/threats cost as a partition with explicit zero-cost
  /// background pieces; returns partitions unchanged; throws for other variants.
  EndCost as_partition() const;

  /// True for the region-based variants, which are only defined on a 1-D state.
  bool is_piecewise() const noexcept;

 private:
  explicit EndCost(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

// ---------------------------------------------------------------------------
// Control problem
// ---------------------------------------------------------------------------

using DriftFn = std::function<Vector(double, const Vector&)>;
using GainFn = std::function<Matrix(double, const Vector&)>;
using PathCostFn = std::function<double(double, const Vector&)>;

/// Optional state-dependent terms. Empty functions mean b = 0, B = I, V = 0.
struct ProblemTerms {
  DriftFn drift;
  GainFn gain;
  PathCostFn path_cost;
};

/// dX = b dt + B (u dt + sigma dW), cost phi(X_T) + int (|R u|^2 / 2 + V) dt,
/// with sigma sigma^T = lambda0 (R^T R)^{-1} enforced on construction.
class ControlProblem {
 public:
  ControlProblem(Matrix sigma, Matrix control_penalty, double lambda0, EndCost end_cost,
                 double horizon, std::size_t state_dim, ProblemTerms terms = {});

  /// One-dimensional problem with lambda0 = sigma^2 R^2.
  static ControlProblem scalar(double sigma, double control_penalty, EndCost end_cost,
                               double horizon, ProblemTerms terms = {});

  std::size_t state_dim() const noexcept { return state_dim_; }
  std::size_t control_dim() const noexcept { return static_cast<std::size_t>(sigma_.rows()); }
  double horizon() const noexcept { return horizon_; }
  double lambda0() const noexcept { return lambda0_; }
  const Matrix& sigma() const noexcept { return sigma_; }
  const Matrix& control_penalty() const noexcept { return control_penalty_; }
  /// (R^T R)^{-1}, cached.
  const Matrix& inverse_control_metric() const noexcept { return inverse_metric_; }
  const EndCost& end_cost() const noexcept { return end_cost_; }

  bool has_drift() const noexcept { return static_cast<bool>(terms_.drift); }
  bool has_gain() const noexcept { return static_cast<bool>(terms_.gain); }
  bool has_path_cost() const noexcept { return static_cast<bool>(terms_.path_cost); }

  Vector drift(double t, const Vector& x) const;
  Matrix gain(double t, const Vector& x) const;
  double path_cost(double t, const Vector& x) const;
  double end_cost(const Vector& x) const { return end_cost_(x); }

  /// Scalar noise scale sqrt(max diag(sigma sigma^T)); the default finite-difference
  /// step is proportional to it.
  double noise_scale() const;

 private:
  Matrix sigma_;
  Matrix control_penalty_;
  Matrix inverse_metric_;
  double lambda0_;
  EndCost end_cost_;
  double horizon_;
  std::size_t state_dim_;
  ProblemTerms terms_;
};

}  // namespace rspi
