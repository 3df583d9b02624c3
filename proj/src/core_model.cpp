#include "rspi/core_model.hpp"

#include "rspi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rspi {

namespace {

constexpr double kCompatibilityTolerance = 1e-10;

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string describe(const Region& r) {
  std::ostringstream os;
  os << "[" << r.lower() << ", " << r.upper() << ")";
  return os.str();
}

}  // namespace

// RiskParams ----------------------------------------------------------------

RiskParams::RiskParams(double lambda0, double theta)
    : lambda0_(lambda0),
      theta_(theta),
      lambda_theta_(0.0),
      inverse_lambda_theta_(0.0),
      special_(false) {
  const double denom = 1.0 - lambda0 * theta;
  special_ = (theta == 1.0 / lambda0) || denom == 0.0;
  if (special_) {
    lambda_theta_ = std::numeric_limits<double>::infinity();
    inverse_lambda_theta_ = 0.0;
  } else {
    lambda_theta_ = lambda0 / denom;
    inverse_lambda_theta_ = 1.0 / lambda0 - theta;
  }
}

double RiskParams::lambda_theta() const {
  if (special_) {
    throw ConfigError("lambda_theta is undefined at theta = 1/lambda0 (special case)");
  }
  return lambda_theta_;
}

RiskParams make_risk_params(double lambda0, double theta) {
  if (lambda0 == 0.0 || !std::isfinite(lambda0)) {
    throw ConfigError("lambda0 must be finite and nonzero");
  }
  if (!std::isfinite(theta)) {
    throw ConfigError("theta must be finite");
  }
  return RiskParams(lambda0, theta);
}

RiskParams risk_params_from_lambda_theta(double lambda0, double lambda_theta) {
  if (lambda_theta == 0.0 || std::isnan(lambda_theta)) {
    throw ConfigError("lambda_theta must be nonzero");
  }
  if (std::isinf(lambda_theta)) {
    return special_risk_params(lambda0);
  }
  return make_risk_params(lambda0, 1.0 / lambda0 - 1.0 / lambda_theta);
}

RiskParams special_risk_params(double lambda0) { return make_risk_params(lambda0, 1.0 / lambda0); }

bool check_noise_cost_compatibility(const Matrix& sigma, const Matrix& control_penalty,
                                    double lambda0) {
  if (sigma.rows() != sigma.cols() || control_penalty.rows() != control_penalty.cols() ||
      sigma.rows() != control_penalty.rows()) {
    return false;
  }
  const Matrix metric = control_penalty.transpose() * control_penalty;
  Eigen::FullPivLU<Matrix> lu(metric);
  if (!lu.isInvertible()) {
    return false;
  }
  const Matrix lhs = sigma * sigma.transpose();
  const Matrix rhs = lambda0 * lu.inverse();
  const double scale = std::max(lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff());
  return ((lhs - rhs).cwiseAbs().array() <= kCompatibilityTolerance * scale).all();
}

bool check_noise_cost_compatibility(double sigma, double control_penalty, double lambda0) {
  return check_noise_cost_compatibility(Matrix::Constant(1, 1, sigma),
                                        Matrix::Constant(1, 1, control_penalty), lambda0);
}

double small_theta_reference(double mean, double variance, double theta) {
  if (variance < 0.0) {
    throw ConfigError("variance must be non-negative");
  }
  return mean + 0.5 * theta * variance;
}

// Region --------------------------------------------------------------------

Region::Region(double lower, double upper, double cost) : lower_(lower), upper_(upper), cost_(cost) {
  if (std::isnan(lower) || std::isnan(upper) || !(lower < upper)) {
    throw ConfigError("region requires lower < upper, got " + describe(*this));
  }
  if (!std::isfinite(cost)) {
    throw ConfigError("region cost must be finite");
  }
}

bool Region::bounded() const noexcept { return std::isfinite(lower_) && std::isfinite(upper_); }

// EndCost -------------------------------------------------------------------

EndCost EndCost::quadratic(double alpha, double mu) {
  return quadratic(alpha, Vector::Constant(1, mu));
}

EndCost EndCost::quadratic(double alpha, Vector mu) {
  if (!std::isfinite(alpha) || alpha < 0.0) {
    throw ConfigError("quadratic end cost requires alpha >= 0");
  }
  return EndCost(QuadraticCost{alpha, std::move(mu)});
}

EndCost EndCost::partition(std::vector<Region> regions) {
  if (regions.empty()) {
    throw ConfigError("partition needs at least one region");
  }
  std::sort(regions.begin(), regions.end(),
            [](const Region& a, const Region& b) { return a.lower() < b.lower(); });
  if (regions.front().lower() != -std::numeric_limits<double>::infinity() ||
      regions.back().upper() != std::numeric_limits<double>::infinity()) {
    throw ConfigError("partition regions must cover the whole line");
  }
  for (std::size_t i = 1; i < regions.size(); ++i) {
    if (regions[i - 1].upper() != regions[i].lower()) {
      throw ConfigError("partition regions " + describe(regions[i - 1]) + " and " +
                        describe(regions[i]) + " overlap or leave a gap");
    }
  }
  return EndCost(PartitionCost{std::move(regions)});
}

EndCost EndCost::targets_threats(std::vector<Region> regions) {
  std::sort(regions.begin(), regions.end(),
            [](const Region& a, const Region& b) { return a.lower() < b.lower(); });
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (!regions[i].bounded()) {
      throw ConfigError("target/threat region " + describe(regions[i]) + " must be bounded");
    }
    if (i > 0 && regions[i - 1].upper() > regions[i].lower()) {
      throw ConfigError("target/threat regions " + describe(regions[i - 1]) + " and " +
                        describe(regions[i]) + " overlap");
    }
  }
  return EndCost(TargetsThreatsCost{std::move(regions)});
}

EndCost EndCost::single_region(Region region) { return EndCost(SingleRegionCost{region}); }

EndCost EndCost::constant(double c) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return partition({Region(-inf, inf, c)});
}

double EndCost::operator()(double x) const {
  return std::visit(
      Overloaded{
          [x](const QuadraticCost& q) {
            const double d = x - q.mu(0);
            return 0.5 * q.alpha * q.alpha * d * d;
          },
          [x](const PartitionCost& p) {
            for (const auto& r : p.regions) {
              if (r.contains(x)) return r.cost();
            }
            return p.regions.back().cost();  // x == +inf
          },
          [x](const TargetsThreatsCost& p) {
            for (const auto& r : p.regions) {
              if (r.contains(x)) return r.cost();
            }
            return 0.0;
          },
          [x](const SingleRegionCost& s) {
            return s.region.contains(x) ? s.region.cost()
                                        : std::numeric_limits<double>::infinity();
          },
      },
      variant_);
}

double EndCost::operator()(const Vector& x) const {
  if (const auto* q = get_if<QuadraticCost>()) {
    if (q->mu.size() != x.size()) {
      throw ConfigError("quadratic end cost target dimension does not match the state");
    }
    return 0.5 * q->alpha * q->alpha * (x - q->mu).squaredNorm();
  }
  if (x.size() != 1) {
    throw ConfigError("region end costs are defined on a one-dimensional state");
  }
  return (*this)(x(0));
}

EndCost EndCost::as_partition() const {
  if (get_if<PartitionCost>() != nullptr) {
    return *this;
  }
  const auto* tt = get_if<TargetsThreatsCost>();
  if (tt == nullptr) {
    throw ConfigError("only targets/threats costs can be re-expressed as a partition");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<Region> pieces;
  double cursor = -inf;
  for (const auto& r : tt->regions) {
    if (cursor < r.lower()) {
      pieces.emplace_back(cursor, r.lower(), 0.0);
    }
    pieces.push_back(r);
    cursor = r.upper();
  }
  pieces.emplace_back(cursor, inf, 0.0);
  return partition(std::move(pieces));
}

bool EndCost::is_piecewise() const noexcept { return get_if<QuadraticCost>() == nullptr; }

// ControlProblem ------------------------------------------------------------

ControlProblem::ControlProblem(Matrix sigma, Matrix control_penalty, double lambda0,
                               EndCost end_cost, double horizon, std::size_t state_dim,
                               ProblemTerms terms)
    : sigma_(std::move(sigma)),
      control_penalty_(std::move(control_penalty)),
      lambda0_(lambda0),
      end_cost_(std::move(end_cost)),
      horizon_(horizon),
      state_dim_(state_dim),
      terms_(std::move(terms)) {
  const auto k = static_cast<std::size_t>(sigma_.rows());
  if (k == 0 || sigma_.cols() != sigma_.rows()) {
    throw ConfigError("sigma must be a non-empty square k x k matrix");
  }
  if (control_penalty_.rows() != sigma_.rows() || control_penalty_.cols() != sigma_.cols()) {
    throw ConfigError("control penalty R must be k x k like sigma");
  }
  if (state_dim_ < k) {
    throw ConfigError("state dimension must be at least the control dimension");
  }
  if (!terms_.gain && state_dim_ != k) {
    throw ConfigError("default gain B = I needs state_dim == control_dim");
  }
  if (!std::isfinite(horizon_)) {
    throw ConfigError("horizon must be finite");
  }
  const Matrix metric = control_penalty_.transpose() * control_penalty_;
  Eigen::FullPivLU<Matrix> lu(metric);
  if (!lu.isInvertible()) {
    throw ConfigError("control penalty R must be full rank");
  }
  inverse_metric_ = lu.inverse();
  if (!check_noise_cost_compatibility(sigma_, control_penalty_, lambda0_)) {
    throw ConfigError("noise and control cost violate sigma sigma^T = lambda0 (R^T R)^{-1}");
  }
  if (end_cost_.is_piecewise() && state_dim_ != 1) {
    throw ConfigError("region end costs require a one-dimensional state");
  }
  if (const auto* q = end_cost_.get_if<QuadraticCost>();
      q != nullptr && static_cast<std::size_t>(q->mu.size()) != state_dim_) {
    throw ConfigError("quadratic end cost target dimension does not match the state");
  }
}

ControlProblem ControlProblem::scalar(double sigma, double control_penalty, EndCost end_cost,
                                      double horizon, ProblemTerms terms) {
  return ControlProblem(Matrix::Constant(1, 1, sigma), Matrix::Constant(1, 1, control_penalty),
                        sigma * sigma * control_penalty * control_penalty, std::move(end_cost),
                        horizon, 1, std::move(terms));
}

Vector ControlProblem::drift(double t, const Vector& x) const {
  if (!terms_.drift) {
    return Vector::Zero(static_cast<Eigen::Index>(state_dim_));
  }
  Vector b = terms_.drift(t, x);
  if (static_cast<std::size_t>(b.size()) != state_dim_) {
    throw ConfigError("drift returned a vector of the wrong dimension");
  }
  return b;
}

Matrix ControlProblem::gain(double t, const Vector& x) const {
  if (!terms_.gain) {
    return Matrix::Identity(static_cast<Eigen::Index>(state_dim_), sigma_.rows());
  }
  Matrix g = terms_.gain(t, x);
  if (static_cast<std::size_t>(g.rows()) != state_dim_ || g.cols() != sigma_.rows()) {
    throw ConfigError("gain returned a matrix of the wrong shape");
  }
  return g;
}

double ControlProblem::path_cost(double t, const Vector& x) const {
  return terms_.path_cost ? terms_.path_cost(t, x) : 0.0;
}

double ControlProblem::noise_scale() const {
  return std::sqrt((sigma_ * sigma_.transpose()).diagonal().maxCoeff());
}

}  // namespace rspi
