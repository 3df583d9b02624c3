#include "rspi/analytic_control.hpp"

#include "rspi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rspi {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Scaled {
  double z_lower;
  double z_upper;
  double scale;  // sigma * sqrt(T - t)
};

Scaled standardize(double t, double x, const Region& region, double sigma, double horizon) {
  const double tau = horizon - t;
  if (!(tau > 0.0)) {
    throw ConfigError("hit probability needs t < T");
  }
  if (!(sigma > 0.0)) {
    throw ConfigError("hit probability needs sigma > 0");
  }
  const double s = sigma * std::sqrt(tau);
  return {(region.lower() - x) / s, (region.upper() - x) / s, s};
}

// log of the upper tail 1 - Phi(z) for large positive z.
double log_upper_tail_asymptotic(double z) {
  const double z2 = z * z;
  return -0.5 * z2 - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

void check_compatible(double sigma, double lambda0, double R) {
  if (!check_noise_cost_compatibility(sigma, R, lambda0)) {
    throw ConfigError("sigma, R and lambda0 violate sigma^2 = lambda0 / R^2");
  }
}

const std::vector<Region>& regions_of(const EndCost& end_cost) {
  if (const auto* p = end_cost.get_if<PartitionCost>()) return p->regions;
  if (const auto* tt = end_cost.get_if<TargetsThreatsCost>()) return tt->regions;
  throw ConfigError("expected a partition or targets/threats end cost");
}

// exp(k) - 1 scaled by exp(-shift), without overflow for large k (k <= shift).
double scaled_excess(double k, double shift) {
  if (k <= 700.0) {
    return std::expm1(k) * std::exp(-shift);
  }
  return std::exp(k - shift) - std::exp(-shift);
}

struct PieceTerms {
  std::vector<double> log_hit;
  std::vector<double> hit;
  std::vector<double> base_control;  // u0*(t, x | S_i)
};

PieceTerms piece_terms(double t, double x, const std::vector<Region>& regions, double sigma,
                       double horizon, double lambda0, double R) {
  PieceTerms terms;
  terms.log_hit.reserve(regions.size());
  terms.hit.reserve(regions.size());
  terms.base_control.reserve(regions.size());
  for (const auto& r : regions) {
    terms.log_hit.push_back(log_hit_probability(t, x, r, sigma, horizon));
    terms.hit.push_back(hit_probability(t, x, r, sigma, horizon));
    terms.base_control.push_back(
        single_region_control(t, x, r, sigma, horizon, lambda0, R).control);
  }
  return terms;
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double e : v) acc += std::exp(e - m);
  return m + std::log(acc);
}

// Background-relative terms (exp(-c_i/lambda_theta) - 1) l_i, shared by the
// log partition function and the targets/threats control. Everything is scaled
// by exp(-shift); returns the scaled Z.
double targets_threats_terms(const std::vector<Region>& regions, const std::vector<double>& hit,
                             const RiskParams& params, std::vector<double>& scaled_terms,
                             double& shift) {
  const double inv = params.inverse_lambda_theta();
  shift = 0.0;
  for (const auto& r : regions) shift = std::max(shift, -r.cost() * inv);
  double z = std::exp(-shift);
  scaled_terms.clear();
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const double term = scaled_excess(-regions[i].cost() * inv, shift) * hit[i];
    scaled_terms.push_back(term);
    z += term;
  }
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw IllPosedError("partition function non-positive");
  }
  return z;
}

}  // namespace

// Gaussian ------------------------------------------------------------------

double normal_pdf(double z) noexcept {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z * kInvSqrt2); }

double normal_interval_probability(double a, double b) noexcept {
  if (!(a < b)) return 0.0;
  if (a >= 0.0) {
    return 0.5 * (std::erfc(a * kInvSqrt2) - std::erfc(b * kInvSqrt2));
  }
  if (b <= 0.0) {
    return 0.5 * (std::erfc(-b * kInvSqrt2) - std::erfc(-a * kInvSqrt2));
  }
  return 1.0 - 0.5 * std::erfc(b * kInvSqrt2) - 0.5 * std::erfc(-a * kInvSqrt2);
}

// LEQG ----------------------------------------------------------------------

double leqg_theta_threshold(const LeqgSpec& spec, double t) {
  const double tau = spec.horizon - t;
  if (!(tau > 0.0)) {
    throw ConfigError("LEQG well-posedness needs t < T");
  }
  const double s2 = spec.sigma * spec.sigma;
  const double noise_term = spec.alpha == 0.0 ? kInf : 1.0 / (spec.alpha * spec.alpha * s2 * tau);
  return noise_term + 1.0 / (s2 * spec.R * spec.R);
}

bool leqg_wellposed(const LeqgSpec& spec, double t) {
  return spec.theta < leqg_theta_threshold(spec, t);
}

double leqg_control(const LeqgSpec& spec, double t, double x) {
  if (!(spec.R > 0.0) || !(spec.sigma > 0.0) || !(spec.alpha >= 0.0)) {
    throw ConfigError("LEQG requires R > 0, sigma > 0, alpha >= 0");
  }
  if (!leqg_wellposed(spec, t)) {
    throw IllPosedError("theta violates the LEQG well-posedness bound; the path integral diverges");
  }
  const double a2 = spec.alpha * spec.alpha;
  const double tau = spec.horizon - t;
  const double denom =
      spec.R * spec.R + tau * a2 * (1.0 - spec.sigma * spec.sigma * spec.R * spec.R * spec.theta);
  if (denom == 0.0) {
    throw IllPosedError("LEQG control denominator vanishes");
  }
  return a2 * (spec.mu - x) / denom;
}

double leqg_log_z(double alpha, double mu, const RiskParams& params, double sigma, double tau,
                  double x) {
  if (params.is_special()) {
    throw ConfigError("log Z is undefined in the special case theta = 1/lambda0");
  }
  const double kappa = alpha * alpha * params.inverse_lambda_theta();
  const double s2 = sigma * sigma * tau;
  const double spread = 1.0 + kappa * s2;
  if (!(spread > 0.0)) {
    throw IllPosedError("quadratic end cost: path integral diverges for this theta");
  }
  const double d = x - mu;
  return -0.5 * std::log(spread) - 0.5 * kappa * d * d / spread;
}

// Hit probabilities -----------------------------------------------------------

double hit_probability(double t, double x, const Region& region, double sigma, double horizon) {
  const auto s = standardize(t, x, region, sigma, horizon);
  return normal_interval_probability(s.z_lower, s.z_upper);
}

double log_hit_probability(double t, double x, const Region& region, double sigma,
                           double horizon) {
  const auto s = standardize(t, x, region, sigma, horizon);
  const double l = normal_interval_probability(s.z_lower, s.z_upper);
  if (l >= std::numeric_limits<double>::min()) {
    return std::log(l);
  }
  // Far tail: the nearer edge dominates, the farther one is a relative correction.
  if (s.z_lower > 0.0) {
    const double near = log_upper_tail_asymptotic(s.z_lower);
    const double far = std::isinf(s.z_upper) ? -kInf : log_upper_tail_asymptotic(s.z_upper);
    return near + std::log1p(-std::exp(far - near));
  }
  if (s.z_upper < 0.0) {
    const double near = log_upper_tail_asymptotic(-s.z_upper);
    const double far = std::isinf(s.z_lower) ? -kInf : log_upper_tail_asymptotic(-s.z_lower);
    return near + std::log1p(-std::exp(far - near));
  }
  return std::log(l);
}

double hit_probability_gradient(double t, double x, const Region& region, double sigma,
                                double horizon) {
  const auto s = standardize(t, x, region, sigma, horizon);
  const double lower = std::isinf(s.z_lower) ? 0.0 : normal_pdf(s.z_lower);
  const double upper = std::isinf(s.z_upper) ? 0.0 : normal_pdf(s.z_upper);
  return (lower - upper) / s.scale;
}

RegionControl single_region_control(double t, double x, const Region& region, double sigma,
                                    double horizon, double lambda0, double R) {
  check_compatible(sigma, lambda0, R);
  const double gain = lambda0 / (R * R);
  const double l = hit_probability(t, x, region, sigma, horizon);
  RegionControl out;
  if (l >= std::numeric_limits<double>::min()) {
    out.control = gain * hit_probability_gradient(t, x, region, sigma, horizon) / l;
    return out;
  }
  const auto s = standardize(t, x, region, sigma, horizon);
  const double edge = x < region.lower() ? region.lower() : region.upper();
  out.control = gain * (edge - x) / (s.scale * s.scale);
  out.saturated = true;
  out.diagnostic = "hit probability underflows at x = " + std::to_string(x) +
                   "; returning the saturated tail control";
  return out;
}

// Partition functions and mixtures --------------------------------------------

double partition_log_z(double t, double x, const EndCost& end_cost, const RiskParams& params,
                       double sigma, double horizon) {
  if (params.is_special()) {
    throw ConfigError("partition function is undefined in the special case theta = 1/lambda0");
  }
  const double inv = params.inverse_lambda_theta();
  if (const auto* q = end_cost.get_if<QuadraticCost>()) {
    if (q->mu.size() != 1) throw ConfigError("closed-form partition function is one-dimensional");
    if (!(horizon - t > 0.0)) throw ConfigError("partition function needs t < T");
    return leqg_log_z(q->alpha, q->mu(0), params, sigma, horizon - t, x);
  }
  if (const auto* single = end_cost.get_if<SingleRegionCost>()) {
    if (inv <= 0.0) {
      throw IllPosedError("infinite end cost outside the region makes Z infinite for lambda_theta < 0");
    }
    return -single->region.cost() * inv +
           log_hit_probability(t, x, single->region, sigma, horizon);
  }
  if (const auto* p = end_cost.get_if<PartitionCost>()) {
    std::vector<double> g;
    g.reserve(p->regions.size());
    for (const auto& r : p->regions) {
      g.push_back(-r.cost() * inv + log_hit_probability(t, x, r, sigma, horizon));
    }
    return log_sum_exp(g);
  }
  const auto& regions = regions_of(end_cost);
  std::vector<double> hit;
  for (const auto& r : regions) hit.push_back(hit_probability(t, x, r, sigma, horizon));
  std::vector<double> terms;
  double shift = 0.0;
  const double z = targets_threats_terms(regions, hit, params, terms, shift);
  return shift + std::log(z);
}

MixtureControl mixture_control(double t, double x, const EndCost& end_cost,
                               const RiskParams& params, double sigma, double horizon,
                               double lambda0, double R) {
  check_compatible(sigma, lambda0, R);
  if (params.lambda0() != lambda0) {
    throw ConfigError("risk params were built for a different lambda0");
  }
  MixtureControl out;

  if (const auto* single = end_cost.get_if<SingleRegionCost>()) {
    if (params.is_special() || params.inverse_lambda_theta() <= 0.0) {
      throw IllPosedError("single-region cost with infinite exterior needs lambda_theta > 0");
    }
    out.weights.prefactor = params.prefactor();
    out.weights.weights = {1.0};
    out.control = out.weights.prefactor *
                  single_region_control(t, x, single->region, sigma, horizon, lambda0, R).control;
    return out;
  }

  const auto& regions = regions_of(end_cost);

  if (params.is_special()) {
    // Expected end cost under zero control; its gradient gives the control.
    double grad = 0.0;
    for (const auto& r : regions) {
      grad += r.cost() * hit_probability_gradient(t, x, r, sigma, horizon);
    }
    out.control = -grad / (R * R);
    return out;
  }

  const auto terms = piece_terms(t, x, regions, sigma, horizon, lambda0, R);
  out.weights.prefactor = params.prefactor();
  auto& w = out.weights.weights;

  if (end_cost.get_if<PartitionCost>() != nullptr) {
    std::vector<double> g;
    g.reserve(regions.size());
    for (std::size_t i = 0; i < regions.size(); ++i) {
      g.push_back(-regions[i].cost() * params.inverse_lambda_theta() + terms.log_hit[i]);
    }
    const double lse = log_sum_exp(g);
    for (double gi : g) w.push_back(std::exp(gi - lse));
  } else {
    double shift = 0.0;
    const double z = targets_threats_terms(regions, terms.hit, params, w, shift);
    for (double& wi : w) wi /= z;
  }

  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] != 0.0) acc += w[i] * terms.base_control[i];
  }
  out.control = out.weights.prefactor * acc;
  return out;
}

double delta_two_target_control(double t, double x, const RiskParams& params, double sigma,
                                double horizon, double lambda0) {
  if (params.is_special()) {
    throw ConfigError("delta-target control is defined for lambda_theta finite");
  }
  const double tau = horizon - t;
  if (!(tau > 0.0)) {
    throw ConfigError("delta-target control needs t < T");
  }
  return params.lambda_theta() / (lambda0 * tau) * (std::tanh(x / (sigma * sigma * tau)) - x);
}

double symmetry_breaking_time(double sigma) {
  if (!(sigma > 0.0)) {
    throw ConfigError("symmetry breaking time needs sigma > 0");
  }
  return 1.0 / (sigma * sigma);
}

Policy leqg_policy(const LeqgSpec& spec) {
  return Policy("leqg", [spec](double t, const Vector& x) {
    return Vector::Constant(1, leqg_control(spec, t, x(0)));
  });
}

Policy mixture_policy(EndCost end_cost, const RiskParams& params, double sigma, double horizon,
                      double lambda0, double R) {
  check_compatible(sigma, lambda0, R);
  return Policy("mixture", [end_cost = std::move(end_cost), params, sigma, horizon, lambda0,
                            R](double t, const Vector& x) {
    return Vector::Constant(
        1, mixture_control(t, x(0), end_cost, params, sigma, horizon, lambda0, R).control);
  });
}

std::vector<double> find_zero_crossings(const std::function<double(double)>& f, double lo,
                                        double hi, double step, double tol) {
  std::vector<double> roots;
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  double prev_x = lo;
  double prev_f = f(lo);
  if (prev_f == 0.0) roots.push_back(lo);
  for (std::size_t i = 1; i <= n; ++i) {
    const double x = i == n ? hi : lo + static_cast<double>(i) * step;
    const double fx = f(x);
    if (fx == 0.0) {
      roots.push_back(x);
    } else if (prev_f != 0.0 && std::signbit(fx) != std::signbit(prev_f)) {
      double a = prev_x;
      double b = x;
      double fa = prev_f;
      while (b - a > tol) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if (std::signbit(fm) == std::signbit(fa)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_f = fx;
  }
  return roots;
}

}  // namespace rspi
