#include "rspi/path_integral_mc.hpp"

#include "rspi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace rspi {

namespace {

void check_samples(const McOptions& options) {
  if (options.n_samples < 2) {
    throw ConfigError("Monte Carlo estimators need at least two samples");
  }
}

bool is_scalar_fast_path(const ControlProblem& problem) {
  return problem.state_dim() == 1 && problem.control_dim() == 1 && !problem.has_drift() &&
         !problem.has_gain() && !problem.has_path_cost();
}

// One uncontrolled path per start, all driven by the same noise draws.
void simulate_bundle(const ControlProblem& problem, const std::vector<double>& times,
                     std::span<const Vector> starts, RngStream& rng, double* out) {
  const std::size_t m = starts.size();
  if (is_scalar_fast_path(problem)) {
    const double sigma = problem.sigma()(0, 0);
    double x_small[8];
    std::vector<double> x_large;
    double* x = x_small;
    if (m > 8) {
      x_large.resize(m);
      x = x_large.data();
    }
    for (std::size_t j = 0; j < m; ++j) x[j] = starts[j](0);
    for (std::size_t n = 0; n + 1 < times.size(); ++n) {
      const double h = times[n + 1] - times[n];
      const double noise = sigma * (std::sqrt(h) * rng.normal());
      for (std::size_t j = 0; j < m; ++j) x[j] += noise;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (!std::isfinite(x[j])) {
        throw SimulationError("non-finite state", times.size() - 1);
      }
      out[j] = problem.end_cost().operator()(x[j]);
    }
    return;
  }

  const auto k = static_cast<Eigen::Index>(problem.control_dim());
  std::vector<Vector> x(starts.begin(), starts.end());
  std::vector<double> running(m, 0.0);
  Vector z(k);
  for (std::size_t n = 0; n + 1 < times.size(); ++n) {
    const double t = times[n];
    const double h = times[n + 1] - t;
    rng.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(k)));
    const Vector noise = problem.sigma() * (std::sqrt(h) * z);
    for (std::size_t j = 0; j < m; ++j) {
      if (problem.has_path_cost()) {
        running[j] += problem.path_cost(t, x[j]) * h;
      }
      Vector next = x[j];
      if (problem.has_drift()) next += problem.drift(t, x[j]) * h;
      if (problem.has_gain()) {
        next += problem.gain(t, x[j]) * noise;
      } else {
        next += noise;
      }
      if (!next.allFinite()) {
        throw SimulationError("non-finite state", n + 1);
      }
      x[j] = std::move(next);
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    out[j] = problem.end_cost(x[j]) + running[j];
  }
}

struct WeightSummary {
  double shift = 0.0;  // max exponent
  double mean = 0.0;   // mean of exp(e - shift)
};

WeightSummary summarize_weights(const double* exponents, std::size_t n, std::size_t stride) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double e = exponents[i * stride];
    if (e == std::numeric_limits<double>::infinity()) {
      throw DegenerateEstimate("degenerate estimate: infinite path weight, the path integral diverges");
    }
    if (std::isnan(e)) {
      throw DegenerateEstimate("degenerate estimate: NaN path exponent");
    }
    m = std::max(m, e);
  }
  if (m == -std::numeric_limits<double>::infinity()) {
    throw DegenerateEstimate("degenerate estimate: every path has zero weight");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(exponents[i * stride] - m);
  return {m, acc / static_cast<double>(n)};
}

double exponent_of(double cost, double inverse_lambda) {
  // -(1/lambda_theta) * cost with the IEEE sign conventions for infinite cost.
  return -inverse_lambda * cost;
}

}  // namespace

Matrix uncontrolled_costs(const ControlProblem& problem, double t, std::span<const Vector> starts,
                          const McOptions& options) {
  check_samples(options);
  if (starts.empty()) {
    throw ConfigError("at least one start state is required");
  }
  for (const auto& s : starts) {
    if (static_cast<std::size_t>(s.size()) != problem.state_dim()) {
      throw ConfigError("start state has the wrong dimension");
    }
  }
  const auto times = time_grid(t, problem.horizon(), options.dt);
  // Row-major storage so each sample writes one contiguous row.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> costs(
      static_cast<Eigen::Index>(options.n_samples), static_cast<Eigen::Index>(starts.size()));
  parallel_for(options.n_samples, options.workers, [&](std::size_t i) {
    RngStream rng(options.seed, i);
    simulate_bundle(problem, times, starts, rng, costs.row(static_cast<Eigen::Index>(i)).data());
  });
  return costs;
}

std::vector<double> path_exponents(const ControlProblem& problem, const RiskParams& params,
                                   double t, const Vector& x, const McOptions& options) {
  if (params.is_special()) {
    throw ConfigError("path exponents are undefined in the special case theta = 1/lambda0");
  }
  if (params.lambda0() != problem.lambda0()) {
    throw ConfigError("risk params were built for a different lambda0 than the problem");
  }
  const double inv = params.inverse_lambda_theta();
  if (!std::isfinite(inv)) {
    throw ConfigError("non-finite 1/lambda_theta");
  }
  const std::vector<Vector> starts{x};
  const Matrix costs = uncontrolled_costs(problem, t, starts, options);
  std::vector<double> e(options.n_samples);
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = exponent_of(costs(static_cast<Eigen::Index>(i), 0), inv);
  }
  return e;
}

ZEstimate log_mean_exp_estimate(std::span<const double> exponents) {
  const std::size_t n = exponents.size();
  if (n < 2) {
    throw ConfigError("need at least two exponents");
  }
  const auto summary = summarize_weights(exponents.data(), n, 1);
  double sum = 0.0;
  double sum_sq = 0.0;
  double dev_sq = 0.0;
  for (double e : exponents) {
    const double w = std::exp(e - summary.shift);
    sum += w;
    sum_sq += w * w;
    const double d = w - summary.mean;
    dev_sq += d * d;
  }
  const double nd = static_cast<double>(n);
  ZEstimate z;
  z.n_samples = n;
  z.log_z = summary.shift + std::log(sum) - std::log(nd);
  z.std_err_log_z = std::sqrt(dev_sq / (nd - 1.0) / nd) / summary.mean;
  z.effective_sample_size = sum * sum / sum_sq;
  return z;
}

ZEstimate estimate_log_z(const ControlProblem& problem, const RiskParams& params, double t,
                         const Vector& x, const McOptions& options) {
  const auto e = path_exponents(problem, params, t, x, options);
  return log_mean_exp_estimate(e);
}

ValueEstimate estimate_value(const ControlProblem& problem, const RiskParams& params, double t,
                             const Vector& x, const McOptions& options) {
  if (!params.is_special()) {
    const auto z = estimate_log_z(problem, params, t, x, options);
    const double inv = params.inverse_lambda_theta();
    return {-z.log_z / inv, z.std_err_log_z / std::abs(inv), z.n_samples};
  }
  if (params.lambda0() != problem.lambda0()) {
    throw ConfigError("risk params were built for a different lambda0 than the problem");
  }
  const std::vector<Vector> starts{x};
  const Matrix costs = uncontrolled_costs(problem, t, starts, options);
  const double nd = static_cast<double>(options.n_samples);
  const double mean = costs.col(0).sum() / nd;
  if (!std::isfinite(mean)) {
    return {mean, std::numeric_limits<double>::infinity(), options.n_samples};
  }
  const double var = (costs.col(0).array() - mean).square().sum() / (nd - 1.0);
  return {mean, std::sqrt(var / nd), options.n_samples};
}

double default_fd_step(const ControlProblem& problem, double t) {
  const double tau = problem.horizon() - t;
  if (!(tau > 0.0)) {
    throw ConfigError("finite-difference step needs t < T");
  }
  const double h = 1e-2 * problem.noise_scale() * std::sqrt(tau);
  return h > 0.0 ? h : 1e-2 * std::sqrt(tau);
}

ControlEstimate estimate_control(const ControlProblem& problem, const RiskParams& params,
                                 double t, const Vector& x, std::optional<double> step,
                                 const McOptions& options) {
  if (params.lambda0() != problem.lambda0()) {
    throw ConfigError("risk params were built for a different lambda0 than the problem");
  }
  const double h = step.value_or(default_fd_step(problem, t));
  if (!(h > 0.0)) {
    throw ConfigError("finite-difference step must be positive");
  }
  const auto d = static_cast<Eigen::Index>(problem.state_dim());
  std::vector<Vector> starts;
  starts.reserve(static_cast<std::size_t>(2 * d));
  for (Eigen::Index j = 0; j < d; ++j) {
    Vector plus = x;
    Vector minus = x;
    plus(j) += h;
    minus(j) -= h;
    starts.push_back(std::move(plus));
    starts.push_back(std::move(minus));
  }
  const Matrix costs = uncontrolled_costs(problem, t, starts, options);
  const auto n = static_cast<Eigen::Index>(options.n_samples);
  const double nd = static_cast<double>(n);

  Vector gradient(d);
  Matrix influence(n, d);  // per-sample contribution to each gradient coordinate
  if (params.is_special()) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto diff = (costs.col(2 * j) - costs.col(2 * j + 1)) / (2.0 * h);
      if (!diff.allFinite()) {
        throw DegenerateEstimate("degenerate estimate: infinite cost at a stencil point");
      }
      influence.col(j) = diff;
      gradient(j) = diff.mean();
    }
  } else {
    const double inv = params.inverse_lambda_theta();
    const Matrix exponents = (-inv) * costs;
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector ep = exponents.col(2 * j);
      Vector em = exponents.col(2 * j + 1);
      const auto sp = summarize_weights(ep.data(), static_cast<std::size_t>(n), 1);
      const auto sm = summarize_weights(em.data(), static_cast<std::size_t>(n), 1);
      gradient(j) = ((sp.shift + std::log(sp.mean)) - (sm.shift + std::log(sm.mean))) / (2.0 * h);
      for (Eigen::Index i = 0; i < n; ++i) {
        influence(i, j) = (std::exp(ep(i) - sp.shift) / sp.mean -
                           std::exp(em(i) - sm.shift) / sm.mean) /
                          (2.0 * h);
      }
    }
  }

  const Matrix gain_t = problem.gain(t, x).transpose();
  const Matrix map = params.is_special()
                         ? Matrix(-problem.inverse_control_metric() * gain_t)
                         : Matrix(params.lambda_theta() * problem.inverse_control_metric() * gain_t);

  const Matrix centered = influence.rowwise() - influence.colwise().mean();
  const Matrix cov_gradient = (centered.transpose() * centered) / ((nd - 1.0) * nd);
  const Matrix cov_control = map * cov_gradient * map.transpose();

  ControlEstimate out;
  out.control = map * gradient;
  out.std_err = cov_control.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.step = h;
  out.n_samples = options.n_samples;
  return out;
}

BlowupDiagnostic detect_blowup(std::span<const double> exponents, const LeqgSpec* quadratic,
                               double t) {
  const std::size_t n = exponents.size();
  if (n < 100) {
    throw ConfigError("blow-up detection needs at least 100 samples");
  }
  BlowupDiagnostic diag;

  const double shift = *std::max_element(exponents.begin(), exponents.end());
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::isfinite(shift) ? std::exp(exponents[i] - shift) : (exponents[i] == shift ? 1.0 : 0.0);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  const std::size_t half = n / 2;
  const double half_total = std::accumulate(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(half), 0.0);
  const double half_max = *std::max_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(half));

  std::vector<double> sorted = w;
  const std::size_t top = std::max<std::size_t>(1, (n + 99) / 100);
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(top), sorted.end(),
                    std::greater<>());
  const double top_sum = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(top), 0.0);

  if (total > 0.0) {
    diag.top_share = top_sum / total;
    diag.max_share_full = sorted.front() / total;
  }
  if (half_total > 0.0) {
    diag.max_share_half = half_max / half_total;
  }
  diag.empirical_flag = diag.top_share > 0.99 && diag.max_share_full > diag.max_share_half;

  std::ostringstream msg;
  if (quadratic != nullptr) {
    diag.analytic_threshold = leqg_theta_threshold(*quadratic, t);
    diag.analytic_divergent = !(quadratic->theta < diag.analytic_threshold);
  }
  if (diag.suspected_divergent()) {
    msg << "suspected divergent path integral";
  } else {
    msg << "no divergence detected";
  }
  msg << " (top 1% weight share " << diag.top_share << ", max share " << diag.max_share_half
      << " -> " << diag.max_share_full << " on doubling n";
  if (diag.analytic_divergent) {
    msg << "; analytic bound theta < " << diag.analytic_threshold << " is "
        << (*diag.analytic_divergent ? "violated" : "satisfied");
  }
  msg << ")";
  diag.message = msg.str();
  return diag;
}

Policy mc_policy(const ControlProblem& problem, const RiskParams& params, McOptions options,
                 std::optional<double> step) {
  return Policy("monte-carlo", [&problem, params, options, step](double t, const Vector& x) {
    return estimate_control(problem, params, t, x, step, options).control;
  });
}

}  // namespace rspi
