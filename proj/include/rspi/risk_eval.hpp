#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace rspi {

/// Realized total costs of a policy. Entries are finite or +infinity.
class CostSample {
 public:
  explicit CostSample(std::vector<double> costs, std::uint64_t seed = 0);

  const std::vector<double>& costs() const noexcept { return costs_; }
  std::size_t size() const noexcept { return costs_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t infinite_count() const noexcept { return infinite_; }
  /// The costs with +infinity entries removed.
  std::vector<double> finite_costs() const;
  bool is_constant() const noexcept;

 private:
  std::vector<double> costs_;
  std::uint64_t seed_;
  std::size_t infinite_ = 0;
};

/// theta == 0: the mean; otherwise (1/theta) log mean exp(theta C), evaluated
/// in the log domain. +infinity entries follow the exact limits: they force +inf
/// for theta >= 0 and carry zero weight for theta < 0.
double empirical_value(const CostSample& sample, double theta);

enum class Monotonicity { StrictlyIncreasing, Constant, Nondecreasing, Failed };

struct MonotonicityVerdict {
  Monotonicity verdict = Monotonicity::Failed;
  std::vector<double> values;
  /// values[i + 1] - values[i]
  std::vector<double> margins;
  /// Index i of the first pair (i, i + 1) that decreases by more than 1e-10.
  std::optional<std::size_t> offending_pair;
};

/// Evaluates empirical_value along a strictly increasing grid of at least 3 points.
MonotonicityVerdict monotonicity_scan(const CostSample& sample, const std::vector<double>& theta_grid);

/// (min, max) of the sample: the theta -> -inf and theta -> +inf limits.
std::pair<double, double> extremal_limits(const CostSample& sample);

struct ExpansionResidual {
  /// |J(theta) - (mean + theta/2 var)|
  double residual = 0.0;
  /// Third absolute central moment; the residual is O(scale * theta^2).
  double moment_scale = 0.0;
  bool within_bound = false;
};

/// Requires |theta| <= 0.1 and a finite sample.
ExpansionResidual expansion_check(const CostSample& sample, double theta);

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
  /// log10(count / n); absent for empty bins.
  std::optional<double> log10_prob;
};

struct CostSummary {
  double mean = 0.0;
  /// Population variance.
  double variance = 0.0;
  double median = 0.0;
  std::vector<std::pair<double, double>> quantiles;  // (p, value)
  std::vector<HistogramBin> histogram;
  std::size_t infinite_count = 0;
};

/// Type-7 quantile (linear interpolation of order statistics) of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Summary statistics and an equal-width histogram over [min, max] of the finite
/// costs. Needs at least 10 samples.
CostSummary cost_statistics(const CostSample& sample, const std::vector<double>& quantiles,
                            std::size_t n_bins = 30);

}  // namespace rspi
