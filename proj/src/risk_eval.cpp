#include "rspi/risk_eval.hpp"

#include "rspi/core_model.hpp"
#include "rspi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rspi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMonotonicityTolerance = 1e-10;

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

CostSample::CostSample(std::vector<double> costs, std::uint64_t seed)
    : costs_(std::move(costs)), seed_(seed) {
  if (costs_.empty()) {
    throw ConfigError("cost sample must not be empty");
  }
  for (double c : costs_) {
    if (std::isnan(c) || c == -kInf) {
      throw ConfigError("cost sample entries must be finite or +infinity");
    }
    if (c == kInf) ++infinite_;
  }
}

std::vector<double> CostSample::finite_costs() const {
  std::vector<double> out;
  out.reserve(costs_.size() - infinite_);
  for (double c : costs_) {
    if (std::isfinite(c)) out.push_back(c);
  }
  return out;
}

bool CostSample::is_constant() const noexcept {
  return std::all_of(costs_.begin(), costs_.end(), [&](double c) { return c == costs_.front(); });
}

double empirical_value(const CostSample& sample, double theta) {
  if (std::isnan(theta)) {
    throw ConfigError("theta must not be NaN");
  }
  if (sample.infinite_count() > 0 && theta >= 0.0) {
    return kInf;
  }
  const auto finite = sample.finite_costs();
  if (finite.empty()) {
    return kInf;  // theta < 0 and every cost infinite: log 0 / theta
  }
  const double n = static_cast<double>(sample.size());
  const double nf = static_cast<double>(finite.size());
  const double log_fraction = sample.infinite_count() == 0 ? 0.0 : std::log(nf / n);
  if (std::all_of(finite.begin(), finite.end(), [&](double c) { return c == finite.front(); })) {
    return log_fraction == 0.0 ? finite.front() : finite.front() + log_fraction / theta;
  }
  const double mean = mean_of(finite);
  if (theta == 0.0) {
    return mean;
  }

  double spread = 0.0;
  for (double c : finite) spread = std::max(spread, std::abs(c - mean));

  if (std::abs(theta) * spread <= 1.0 && sample.infinite_count() == 0) {
    // Expand around the mean: accurate as theta -> 0.
    double acc = 0.0;
    for (double c : finite) acc += std::expm1(theta * (c - mean));
    return mean + std::log1p(acc / nf) / theta;
  }

  // Shift by the dominant cost so constant samples return their value exactly.
  const double pivot = theta > 0.0 ? *std::max_element(finite.begin(), finite.end())
                                   : *std::min_element(finite.begin(), finite.end());
  double acc = 0.0;
  for (double c : finite) acc += std::exp(theta * (c - pivot));
  return pivot + (std::log(acc / nf) + log_fraction) / theta;
}

MonotonicityVerdict monotonicity_scan(const CostSample& sample, const std::vector<double>& theta_grid) {
  if (theta_grid.size() < 3) {
    throw ConfigError("monotonicity scan needs at least three grid points");
  }
  for (std::size_t i = 1; i < theta_grid.size(); ++i) {
    if (!(theta_grid[i - 1] < theta_grid[i])) {
      throw ConfigError("theta grid must be strictly increasing");
    }
  }
  MonotonicityVerdict out;
  for (double theta : theta_grid) out.values.push_back(empirical_value(sample, theta));
  bool all_positive = true;
  for (std::size_t i = 1; i < out.values.size(); ++i) {
    const double a = out.values[i - 1];
    const double b = out.values[i];
    const double margin = (a == b) ? 0.0 : b - a;
    out.margins.push_back(margin);
    if (margin < -kMonotonicityTolerance && !out.offending_pair) {
      out.offending_pair = i - 1;
    }
    if (!(margin > 0.0)) all_positive = false;
  }
  if (out.offending_pair) {
    out.verdict = Monotonicity::Failed;
  } else if (sample.is_constant()) {
    out.verdict = Monotonicity::Constant;
  } else if (all_positive) {
    out.verdict = Monotonicity::StrictlyIncreasing;
  } else {
    out.verdict = Monotonicity::Nondecreasing;
  }
  return out;
}

std::pair<double, double> extremal_limits(const CostSample& sample) {
  const auto [lo, hi] = std::minmax_element(sample.costs().begin(), sample.costs().end());
  return {*lo, *hi};
}

ExpansionResidual expansion_check(const CostSample& sample, double theta) {
  if (!(std::abs(theta) <= 0.1)) {
    throw ConfigError("expansion check is meant for |theta| <= 0.1");
  }
  if (sample.infinite_count() > 0) {
    throw ConfigError("expansion check needs a bounded sample");
  }
  const auto& c = sample.costs();
  const double n = static_cast<double>(c.size());
  const double mean = mean_of(c);
  double var = 0.0;
  double third = 0.0;
  for (double v : c) {
    const double d = v - mean;
    var += d * d;
    third += std::abs(d * d * d);
  }
  var /= n;
  third /= n;

  ExpansionResidual out;
  out.residual = std::abs(empirical_value(sample, theta) - small_theta_reference(mean, var, theta));
  out.moment_scale = third;
  const double rounding = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(mean) + var);
  out.within_bound = out.residual <= third * theta * theta + rounding;
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty() || !(p >= 0.0 && p <= 1.0)) {
    throw ConfigError("quantile needs a non-empty sample and p in [0, 1]");
  }
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || sorted[hi] == sorted[lo]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

CostSummary cost_statistics(const CostSample& sample, const std::vector<double>& quantiles,
                            std::size_t n_bins) {
  if (sample.size() < 10) {
    throw ConfigError("cost statistics need at least 10 samples");
  }
  if (n_bins == 0) {
    throw ConfigError("histogram needs at least one bin");
  }
  CostSummary out;
  out.infinite_count = sample.infinite_count();

  std::vector<double> sorted = sample.costs();
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  out.mean = mean_of(sorted);
  if (std::isfinite(out.mean)) {
    double var = 0.0;
    for (double c : sorted) var += (c - out.mean) * (c - out.mean);
    out.variance = var / n;
  } else {
    out.variance = kInf;
  }
  out.median = quantile_sorted(sorted, 0.5);
  for (double p : quantiles) out.quantiles.emplace_back(p, quantile_sorted(sorted, p));

  const auto finite = sample.finite_costs();
  if (finite.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(finite.begin(), finite.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const std::size_t bins = hi > lo ? n_bins : 1;
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 0.0;
  out.histogram.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out.histogram[b].left = lo + static_cast<double>(b) * width;
    out.histogram[b].right = b + 1 == bins ? hi : lo + static_cast<double>(b + 1) * width;
  }
  for (double c : finite) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((c - lo) / width) : 0;
    b = std::min(b, bins - 1);
    ++out.histogram[b].count;
  }
  for (auto& bin : out.histogram) {
    if (bin.count > 0) bin.log10_prob = std::log10(static_cast<double>(bin.count) / n);
  }
  return out;
}

}  // namespace rspi
