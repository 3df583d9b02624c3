#include "rspi/experiments.hpp"

#include "rspi/errors.hpp"
#include "rspi/path_integral_mc.hpp"
#include "rspi/rng.hpp"
#include "rspi/sde_sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace rspi {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Tags mixed into the master seed so experiments never share noise.
std::uint64_t experiment_tag(ExperimentKind kind) { return static_cast<std::uint64_t>(kind) + 1; }

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError(where + " must be a JSON object");
  }
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

double as_number(const json& v, const std::string& what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw ConfigError(what + " must be a number");
}

std::vector<double> as_numbers(const json& v, const std::string& what) {
  if (!v.is_array()) throw ConfigError(what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_number(e, what));
  return out;
}

template <typename T>
void read_number(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const double v = as_number(j.at(key), key);
  if constexpr (std::is_integral_v<T>) {
    if (v < 0.0 || v != std::floor(v)) throw ConfigError(std::string(key) + " must be a non-negative integer");
    out = static_cast<T>(v);
  } else {
    out = v;
  }
}

std::vector<Region> parse_regions(const json& v) {
  if (!v.is_array()) throw ConfigError("regions must be an array");
  std::vector<Region> out;
  for (const auto& r : v) {
    reject_unknown(r, {"lower", "upper", "cost"}, "region");
    if (!r.contains("lower") || !r.contains("upper") || !r.contains("cost")) {
      throw ConfigError("region needs lower, upper and cost");
    }
    out.emplace_back(as_number(r.at("lower"), "lower"), as_number(r.at("upper"), "upper"),
                     as_number(r.at("cost"), "cost"));
  }
  return out;
}

XGrid parse_grid(const json& v) {
  XGrid g;
  reject_unknown(v, {"min", "max", "count"}, "x_grid");
  read_number(v, "min", g.min);
  read_number(v, "max", g.max);
  read_number(v, "count", g.count);
  if (g.count < 2 || !(g.min < g.max)) throw ConfigError("x_grid needs min < max and count >= 2");
  return g;
}

std::vector<RiskEntry> parse_risk(const json& v) {
  if (!v.is_array()) throw ConfigError("risk must be an array");
  std::vector<RiskEntry> out;
  for (const auto& e : v) {
    reject_unknown(e, {"theta", "lambda_theta"}, "risk entry");
    const bool has_theta = e.contains("theta");
    const bool has_lambda = e.contains("lambda_theta");
    if (has_theta == has_lambda) {
      throw ConfigError("each risk entry needs exactly one of theta or lambda_theta");
    }
    RiskEntry entry;
    if (has_theta) {
      entry.theta = as_number(e.at("theta"), "theta");
    } else if (e.at("lambda_theta").is_string() && e.at("lambda_theta").get<std::string>() == "special") {
      entry.special = true;
    } else {
      const double lt = as_number(e.at("lambda_theta"), "lambda_theta");
      if (std::isinf(lt)) {
        entry.special = true;
      } else {
        entry.lambda_theta = lt;
      }
    }
    out.push_back(entry);
  }
  return out;
}

void parse_model(const json& j, ModelParams& m) {
  read_number(j, "sigma", m.sigma);
  read_number(j, "R", m.R);
  read_number(j, "horizon", m.horizon);
  if (!(m.sigma > 0.0) || !(m.R > 0.0)) throw ConfigError("sigma and R must be positive");
  const double implied = m.sigma * m.sigma * m.R * m.R;
  if (j.contains("lambda0")) {
    m.lambda0 = as_number(j.at("lambda0"), "lambda0");
    if (!check_noise_cost_compatibility(m.sigma, m.R, m.lambda0)) {
      throw ConfigError("configuration violates sigma^2 = lambda0 / R^2 (sigma=" + format_number(m.sigma) +
                        ", R=" + format_number(m.R) + ", lambda0=" + format_number(m.lambda0) + ")");
    }
  } else {
    m.lambda0 = implied;
  }
}

std::vector<Region> two_regions(double epsilon, double cost) {
  return {Region(-1.0 - 0.5 * epsilon, -1.0 + 0.5 * epsilon, cost),
          Region(1.0 - 0.5 * epsilon, 1.0 + 0.5 * epsilon, cost)};
}

std::vector<Region> fig4_regions() { return {Region(-0.1, 0.0, -10.0), Region(0.0, 0.1, 10.0)}; }

RiskEntry lambda_entry(double lt) { return RiskEntry{std::nullopt, lt, false}; }
RiskEntry special_entry() { return RiskEntry{std::nullopt, std::nullopt, true}; }

EndCost curve_end_cost(const std::vector<Region>& regions) {
  const bool bounded = std::all_of(regions.begin(), regions.end(), [](const Region& r) { return r.bounded(); });
  return bounded ? EndCost::targets_threats(regions) : EndCost::partition(regions);
}

std::string describe_regions(const std::vector<Region>& regions) {
  std::ostringstream os;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (i) os << ' ';
    os << '[' << format_number(regions[i].lower()) << ',' << format_number(regions[i].upper())
       << ")c=" << format_number(regions[i].cost());
  }
  return os.str();
}

std::string model_comment(const ModelParams& m) {
  return "sigma=" + format_number(m.sigma) + " R=" + format_number(m.R) +
         " lambda0=" + format_number(m.lambda0) + " horizon=" + format_number(m.horizon);
}

ControlProblem scalar_problem(const ModelParams& m, EndCost end_cost) {
  return ControlProblem(Matrix::Constant(1, 1, m.sigma), Matrix::Constant(1, 1, m.R), m.lambda0,
                        std::move(end_cost), m.horizon, 1);
}

}  // namespace

// Names -----------------------------------------------------------------------

ExperimentKind parse_experiment_kind(std::string_view name) {
  if (name == "fig1") return ExperimentKind::Fig1;
  if (name == "fig2") return ExperimentKind::Fig2;
  if (name == "fig3") return ExperimentKind::Fig3;
  if (name == "fig4") return ExperimentKind::Fig4;
  if (name == "leqg-sweep") return ExperimentKind::LeqgSweep;
  if (name == "validate-mc") return ExperimentKind::ValidateMc;
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

std::string_view experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Fig1: return "fig1";
    case ExperimentKind::Fig2: return "fig2";
    case ExperimentKind::Fig3: return "fig3";
    case ExperimentKind::Fig4: return "fig4";
    case ExperimentKind::LeqgSweep: return "leqg-sweep";
    case ExperimentKind::ValidateMc: return "validate-mc";
  }
  return "unknown";
}

RiskParams RiskEntry::resolve(double lambda0) const {
  if (special) return special_risk_params(lambda0);
  if (theta) return make_risk_params(lambda0, *theta);
  if (lambda_theta) return risk_params_from_lambda_theta(lambda0, *lambda_theta);
  throw ConfigError("empty risk entry");
}

std::vector<double> XGrid::points() const {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = i + 1 == count ? max : min + (max - min) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

// Configuration -----------------------------------------------------------------

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case ExperimentKind::Fig1: {
      CurveConfig c;
      c.times = {0.0};
      c.risk = {lambda_entry(-1.0 / 3.0), lambda_entry(-0.5), lambda_entry(-1.0), special_entry(),
                lambda_entry(1.0),        lambda_entry(0.5),  lambda_entry(1.0 / 3.0)};
      c.regions = {Region(-0.05, 0.05, -10.0)};
      c.notes = {"fig1 defaults (region width 0.1, |c|=10, sigma=1, T-t=1) are assumed values"};
      cfg.body = c;
      break;
    }
    case ExperimentKind::Fig2:
    case ExperimentKind::Fig3: {
      CurveConfig c;
      c.times = {0.0, 0.5};
      c.risk = {lambda_entry(-0.5), special_entry(), lambda_entry(1.0), lambda_entry(0.5)};
      c.regions = two_regions(0.02, kind == ExperimentKind::Fig2 ? -10.0 : 10.0);
      cfg.body = c;
      break;
    }
    case ExperimentKind::Fig4: {
      Fig4Config c;
      c.thetas = {-1.0, 0.0, 1.0, 3.0};
      c.regions = fig4_regions();
      cfg.body = c;
      break;
    }
    case ExperimentKind::LeqgSweep: {
      LeqgSweepConfig c;
      c.thetas = {-1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0};
      c.times = {0.0, 0.25, 0.5, 0.75, 0.9};
      c.x_grid = XGrid{-2.0, 2.0, 5};
      cfg.body = c;
      break;
    }
    case ExperimentKind::ValidateMc: {
      ValidateConfig c;
      c.leqg = ValidateConfig::Leqg{1.0, 0.0, 0.0, 1e-2, {-1.0, 0.0, 0.5}, {-2.0, -1.0, 0.0, 1.0, 2.0}};
      c.partition = ValidateConfig::Partition{fig4_regions(), 0.0, {-1.0, 0.5}, {-0.5, 0.0, 0.5}};
      c.blowup = ValidateConfig::Blowup{1.0, 0.0, 0.0, 0.0, {3.0}};
      cfg.body = c;
      break;
    }
  }
  return cfg;
}

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("experiment") || !j.at("experiment").is_string()) {
    throw ConfigError("config needs a string \"experiment\" field");
  }
  const auto kind = parse_experiment_kind(j.at("experiment").get<std::string>());
  ExperimentConfig cfg = default_config(kind);

  const std::set<std::string> common{"experiment", "seed", "workers", "sigma", "R", "lambda0", "horizon"};
  auto allowed = [&](std::initializer_list<std::string> extra) {
    std::set<std::string> s = common;
    s.insert(extra.begin(), extra.end());
    return s;
  };

  try {
    read_number(j, "seed", cfg.seed);
    read_number(j, "workers", cfg.workers);

    switch (kind) {
      case ExperimentKind::Fig1:
      case ExperimentKind::Fig2:
      case ExperimentKind::Fig3: {
        auto keys = allowed({"times", "risk", "regions", "x_grid", "epsilon", "cost"});
        if (kind == ExperimentKind::Fig1) keys.insert("panel");
        reject_unknown(j, keys, "config");
        auto& c = std::get<CurveConfig>(cfg.body);
        parse_model(j, c.model);
        if (j.contains("times")) c.times = as_numbers(j.at("times"), "times");
        if (j.contains("risk")) c.risk = parse_risk(j.at("risk"));
        if (j.contains("x_grid")) c.x_grid = parse_grid(j.at("x_grid"));
        const bool shaped = j.contains("epsilon") || j.contains("cost") || j.contains("panel");
        if (j.contains("regions")) {
          if (shaped) throw ConfigError("give either regions or epsilon/cost/panel, not both");
          c.regions = parse_regions(j.at("regions"));
          c.notes.clear();
        } else if (shaped) {
          double epsilon = kind == ExperimentKind::Fig1 ? 0.1 : 0.02;
          double cost = kind == ExperimentKind::Fig3 ? 10.0 : -10.0;
          if (j.contains("panel")) {
            const auto panel = j.at("panel").get<std::string>();
            if (panel == "threat") {
              cost = 10.0;
            } else if (panel != "target") {
              throw ConfigError("panel must be \"target\" or \"threat\"");
            }
          }
          read_number(j, "epsilon", epsilon);
          read_number(j, "cost", cost);
          if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
          c.regions = kind == ExperimentKind::Fig1
                          ? std::vector<Region>{Region(-0.5 * epsilon, 0.5 * epsilon, cost)}
                          : two_regions(epsilon, cost);
        }
        if (c.risk.empty() || c.times.empty()) throw ConfigError("risk and times must be non-empty");
        for (double t : c.times) {
          if (!(t < c.model.horizon)) throw ConfigError("every time must be before the horizon");
        }
        break;
      }
      case ExperimentKind::Fig4: {
        reject_unknown(j, allowed({"thetas", "n_runs", "dt", "x0", "t0", "regions", "n_bins"}), "config");
        auto& c = std::get<Fig4Config>(cfg.body);
        parse_model(j, c.model);
        if (j.contains("thetas")) c.thetas = as_numbers(j.at("thetas"), "thetas");
        read_number(j, "n_runs", c.n_runs);
        read_number(j, "dt", c.dt);
        read_number(j, "x0", c.x0);
        read_number(j, "t0", c.t0);
        read_number(j, "n_bins", c.n_bins);
        if (j.contains("regions")) c.regions = parse_regions(j.at("regions"));
        if (c.n_runs < 10) throw ConfigError("fig4 needs at least 10 runs per theta");
        if (c.thetas.empty()) throw ConfigError("thetas must be non-empty");
        break;
      }
      case ExperimentKind::LeqgSweep: {
        reject_unknown(j, allowed({"alpha", "mu", "thetas", "times", "x_grid"}), "config");
        auto& c = std::get<LeqgSweepConfig>(cfg.body);
        parse_model(j, c.model);
        read_number(j, "alpha", c.alpha);
        read_number(j, "mu", c.mu);
        if (j.contains("thetas")) c.thetas = as_numbers(j.at("thetas"), "thetas");
        if (j.contains("times")) c.times = as_numbers(j.at("times"), "times");
        if (j.contains("x_grid")) c.x_grid = parse_grid(j.at("x_grid"));
        for (double t : c.times) {
          if (!(t < c.model.horizon)) throw ConfigError("every time must be before the horizon");
        }
        break;
      }
      case ExperimentKind::ValidateMc: {
        reject_unknown(j, allowed({"dt", "n_samples", "leqg", "partition", "blowup"}), "config");
        auto& c = std::get<ValidateConfig>(cfg.body);
        parse_model(j, c.model);
        read_number(j, "dt", c.dt);
        read_number(j, "n_samples", c.n_samples);
        if (j.contains("leqg")) {
          const auto& s = j.at("leqg");
          if (s.is_null()) {
            c.leqg.reset();
          } else {
            reject_unknown(s, {"alpha", "mu", "t", "h", "thetas", "x"}, "leqg");
            auto& l = *c.leqg;
            read_number(s, "alpha", l.alpha);
            read_number(s, "mu", l.mu);
            read_number(s, "t", l.t);
            read_number(s, "h", l.h);
            if (s.contains("thetas")) l.thetas = as_numbers(s.at("thetas"), "thetas");
            if (s.contains("x")) l.x = as_numbers(s.at("x"), "x");
          }
        }
        if (j.contains("partition")) {
          const auto& s = j.at("partition");
          if (s.is_null()) {
            c.partition.reset();
          } else {
            reject_unknown(s, {"regions", "t", "thetas", "x"}, "partition");
            auto& p = *c.partition;
            if (s.contains("regions")) p.regions = parse_regions(s.at("regions"));
            read_number(s, "t", p.t);
            if (s.contains("thetas")) p.thetas = as_numbers(s.at("thetas"), "thetas");
            if (s.contains("x")) p.x = as_numbers(s.at("x"), "x");
          }
        }
        if (j.contains("blowup")) {
          const auto& s = j.at("blowup");
          if (s.is_null()) {
            c.blowup.reset();
          } else {
            reject_unknown(s, {"alpha", "mu", "t", "x", "thetas"}, "blowup");
            auto& b = *c.blowup;
            read_number(s, "alpha", b.alpha);
            read_number(s, "mu", b.mu);
            read_number(s, "t", b.t);
            read_number(s, "x", b.x);
            if (s.contains("thetas")) b.thetas = as_numbers(s.at("thetas"), "thetas");
          }
        }
        if (c.n_samples < 100) throw ConfigError("validate-mc needs at least 100 samples");
        break;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// CSV -----------------------------------------------------------------------------

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void CsvTable::write(std::ostream& os) const {
  for (const auto& c : comments) os << "# " << c << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << '\n';
  }
}

std::string CsvTable::str() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

// Runners -------------------------------------------------------------------------

CsvTable run_fig_curves(const ExperimentConfig& config) {
  const auto* c = std::get_if<CurveConfig>(&config.body);
  if (c == nullptr) throw ConfigError("run_fig_curves needs a fig1/fig2/fig3 config");
  const auto& m = c->model;
  if (!check_noise_cost_compatibility(m.sigma, m.R, m.lambda0)) {
    throw ConfigError("configuration violates sigma^2 = lambda0 / R^2");
  }
  const EndCost end_cost = curve_end_cost(c->regions);

  CsvTable table;
  table.comments.push_back("experiment=" + std::string(experiment_name(config.kind)));
  table.comments.push_back(model_comment(m));
  table.comments.push_back("regions=" + describe_regions(c->regions));
  for (const auto& n : c->notes) table.comments.push_back(n);
  table.header = {"x", "lambda_theta", "t", "control"};

  const auto xs = c->x_grid.points();
  for (double t : c->times) {
    for (const auto& entry : c->risk) {
      const RiskParams params = entry.resolve(m.lambda0);
      const std::string lt = params.is_special() ? "inf" : format_number(params.lambda_theta());
      for (double x : xs) {
        const double u = mixture_control(t, x, end_cost, params, m.sigma, m.horizon, m.lambda0, m.R).control;
        table.rows.push_back({format_number(x), lt, format_number(t), format_number(u)});
      }
    }
  }
  return table;
}

Fig4Result run_fig4(const ExperimentConfig& config) {
  const auto* c = std::get_if<Fig4Config>(&config.body);
  if (c == nullptr) throw ConfigError("run_fig4 needs a fig4 config");
  const auto& m = c->model;
  const EndCost end_cost = curve_end_cost(c->regions);
  const ControlProblem problem = scalar_problem(m, end_cost);
  const std::uint64_t seed = mix_seed(config.seed, experiment_tag(config.kind));

  Fig4Result result;
  result.runs.comments = {"experiment=fig4", model_comment(m), "regions=" + describe_regions(c->regions),
                          "seed=" + std::to_string(config.seed) + " dt=" + format_number(c->dt) +
                              " x0=" + format_number(c->x0) + " t0=" + format_number(c->t0)};
  result.runs.header = {"theta", "run_index", "cost"};
  result.summary.comments = result.runs.comments;
  result.summary.header = {"theta", "mean", "var", "median", "q90", "q99",
                           "bin_left", "bin_right", "count", "log10_prob"};

  const Vector x0 = Vector::Constant(1, c->x0);
  for (double theta : c->thetas) {
    const RiskParams params = make_risk_params(m.lambda0, theta);
    const Policy policy = mixture_policy(end_cost, params, m.sigma, m.horizon, m.lambda0, m.R);
    // Same seed for every theta: run i sees identical noise across the risk settings.
    const auto costs = batch_costs(problem, policy, x0, c->t0, c->dt,
                                   BatchOptions{c->n_runs, seed, config.workers});
    for (std::size_t i = 0; i < costs.size(); ++i) {
      result.runs.rows.push_back({format_number(theta), std::to_string(i), format_number(costs[i])});
    }
    const auto stats = cost_statistics(CostSample(costs, config.seed), {0.9, 0.99}, c->n_bins);
    for (const auto& bin : stats.histogram) {
      result.summary.rows.push_back(
          {format_number(theta), format_number(stats.mean), format_number(stats.variance),
           format_number(stats.median), format_number(stats.quantiles[0].second),
           format_number(stats.quantiles[1].second), format_number(bin.left), format_number(bin.right),
           std::to_string(bin.count), bin.log10_prob ? format_number(*bin.log10_prob) : ""});
    }
    result.thetas.push_back(theta);
    result.stats.push_back(stats);
  }
  return result;
}

CsvTable run_leqg_sweep(const ExperimentConfig& config) {
  const auto* c = std::get_if<LeqgSweepConfig>(&config.body);
  if (c == nullptr) throw ConfigError("run_leqg_sweep needs a leqg-sweep config");
  const auto& m = c->model;
  CsvTable table;
  table.comments = {"experiment=leqg-sweep", model_comment(m),
                    "alpha=" + format_number(c->alpha) + " mu=" + format_number(c->mu)};
  table.header = {"x", "t", "theta", "wellposed", "control"};
  const auto xs = c->x_grid.points();
  for (double theta : c->thetas) {
    const LeqgSpec spec{c->alpha, c->mu, m.R, m.sigma, theta, m.horizon};
    for (double t : c->times) {
      const bool ok = leqg_wellposed(spec, t);
      for (double x : xs) {
        table.rows.push_back({format_number(x), format_number(t), format_number(theta), ok ? "1" : "0",
                              ok ? format_number(leqg_control(spec, t, x)) : ""});
      }
    }
  }
  return table;
}

std::string ValidationReport::summary() const {
  std::size_t gated = 0;
  std::size_t failed = 0;
  for (const auto& row : points.rows) {
    if (row[7] == "1" || row[7] == "0") ++gated;
    if (row[7] == "0") ++failed;
  }
  std::ostringstream os;
  os << "validate-mc: " << gated << " gated points, " << failed << " failed; gate "
     << (passed ? "PASS" : "FAIL") << '\n';
  for (const auto& d : diagnostics) os << "  " << d << '\n';
  return os.str();
}

ValidationReport run_validate_mc(const ExperimentConfig& config) {
  const auto* c = std::get_if<ValidateConfig>(&config.body);
  if (c == nullptr) throw ConfigError("run_validate_mc needs a validate-mc config");
  const auto& m = c->model;
  const McOptions options{c->n_samples, c->dt, mix_seed(config.seed, experiment_tag(config.kind)), config.workers};

  ValidationReport report;
  report.points.comments = {"experiment=validate-mc", model_comment(m),
                            "n_samples=" + std::to_string(c->n_samples) + " dt=" + format_number(c->dt) +
                                " seed=" + std::to_string(config.seed)};
  report.points.header = {"suite", "theta", "x", "estimate", "std_err", "reference", "z_score", "pass", "note"};

  auto add_row = [&](const std::string& suite, double theta, double x, double est, double se, double ref,
                     const std::string& pass, const std::string& note) {
    const double z = pass != "n/a" && se > 0.0 ? (est - ref) / se : std::numeric_limits<double>::quiet_NaN();
    report.points.rows.push_back({suite, format_number(theta), format_number(x), format_number(est),
                                  format_number(se), format_number(ref), format_number(z), pass, note});
    if (pass == "0") report.passed = false;
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto divergence_row = [&](const std::string& suite, const ControlProblem& problem, const LeqgSpec& spec,
                            double t, double x) {
    const RiskParams params = make_risk_params(problem.lambda0(), spec.theta);
    const auto e = path_exponents(problem, params, t, Vector::Constant(1, x), options);
    const auto diag = detect_blowup(e, &spec, t);
    double est = nan;
    double se = nan;
    try {
      const auto z = log_mean_exp_estimate(e);
      est = z.log_z;
      se = z.std_err_log_z;
    } catch (const DegenerateEstimate& err) {
      report.diagnostics.push_back(err.what());
    }
    report.diagnostics.push_back(suite + " theta=" + format_number(spec.theta) + ": " + diag.message);
    add_row(suite, spec.theta, x, est, se, diag.analytic_threshold, "n/a", diag.message);
  };

  if (c->leqg) {
    const auto& s = *c->leqg;
    const ControlProblem problem =
        ControlProblem::scalar(m.sigma, m.R, EndCost::quadratic(s.alpha, s.mu), m.horizon);
    for (double theta : s.thetas) {
      const LeqgSpec spec{s.alpha, s.mu, m.R, m.sigma, theta, m.horizon};
      for (double x : s.x) {
        if (!leqg_wellposed(spec, s.t)) {
          divergence_row("leqg", problem, spec, s.t, x);
          continue;
        }
        try {
          const RiskParams params = make_risk_params(problem.lambda0(), theta);
          const auto est = estimate_control(problem, params, s.t, Vector::Constant(1, x), s.h, options);
          const double ref = leqg_control(spec, s.t, x);
          const double u = est.control(0);
          const double se = est.std_err(0);
          const bool ok = std::abs(u - ref) <= std::max(3.0 * se, 0.03 * std::abs(ref));
          add_row("leqg", theta, x, u, se, ref, ok ? "1" : "0", "");
        } catch (const DegenerateEstimate& err) {
          report.diagnostics.push_back(std::string("leqg: ") + err.what());
          add_row("leqg", theta, x, nan, nan, nan, "0", err.what());
        }
      }
    }
  }

  if (c->partition) {
    const auto& s = *c->partition;
    const EndCost end_cost = curve_end_cost(s.regions);
    const ControlProblem problem = scalar_problem(m, end_cost);
    for (double theta : s.thetas) {
      const RiskParams params = make_risk_params(m.lambda0, theta);
      for (double x : s.x) {
        try {
          const auto z = estimate_log_z(problem, params, s.t, Vector::Constant(1, x), options);
          const double ref = partition_log_z(s.t, x, end_cost, params, m.sigma, m.horizon);
          const bool ok = std::abs(z.log_z - ref) <= 3.0 * z.std_err_log_z;
          add_row("partition", theta, x, z.log_z, z.std_err_log_z, ref, ok ? "1" : "0",
                  "ess=" + format_number(z.effective_sample_size));
        } catch (const DegenerateEstimate& err) {
          report.diagnostics.push_back(std::string("partition: ") + err.what());
          add_row("partition", theta, x, nan, nan, nan, "0", err.what());
        }
      }
    }
  }

  if (c->blowup) {
    const auto& s = *c->blowup;
    const ControlProblem problem =
        ControlProblem::scalar(m.sigma, m.R, EndCost::quadratic(s.alpha, s.mu), m.horizon);
    for (double theta : s.thetas) {
      const LeqgSpec spec{s.alpha, s.mu, m.R, m.sigma, theta, m.horizon};
      divergence_row("blowup", problem, spec, s.t, s.x);
    }
  }
  return report;
}

}  // namespace rspi
