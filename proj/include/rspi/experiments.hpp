#pragma once

#include "rspi/analytic_control.hpp"
#include "rspi/core_model.hpp"
#include "rspi/risk_eval.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rspi {

enum class ExperimentKind { Fig1, Fig2, Fig3, Fig4, LeqgSweep, ValidateMc };

ExperimentKind parse_experiment_kind(std::string_view name);
std::string_view experiment_name(ExperimentKind kind);

/// One risk setting: exactly one of theta or lambda_theta; lambda_theta may be
/// the special value (theta = 1/lambda0).
struct RiskEntry {
  std::optional<double> theta;
  std::optional<double> lambda_theta;
  bool special = false;

  RiskParams resolve(double lambda0) const;
};

struct XGrid {
  double min = -3.0;
  double max = 3.0;
  std::size_t count = 601;

  std::vector<double> points() const;
};

/// Shared 1-D model parameters; lambda0 = sigma^2 R^2 unless given explicitly.
struct ModelParams {
  double sigma = 1.0;
  double R = 1.0;
  double lambda0 = 1.0;
  double horizon = 1.0;
};

struct CurveConfig {
  ModelParams model;
  std::vector<double> times;
  std::vector<RiskEntry> risk;
  std::vector<Region> regions;
  XGrid x_grid;
  std::vector<std::string> notes;  // emitted as '#' metadata lines
};

struct Fig4Config {
  ModelParams model;
  std::vector<double> thetas;
  std::size_t n_runs = 1000;
  double dt = 1e-3;
  double x0 = 0.0;
  double t0 = 0.0;
  std::vector<Region> regions;
  std::size_t n_bins = 30;
};

struct LeqgSweepConfig {
  ModelParams model;
  double alpha = 1.0;
  double mu = 0.0;
  std::vector<double> thetas;
  std::vector<double> times;
  XGrid x_grid;
};

struct ValidateConfig {
  ModelParams model;
  double dt = 1e-3;
  std::size_t n_samples = 100000;

  struct Leqg {
    double alpha = 1.0;
    double mu = 0.0;
    double t = 0.0;
    double h = 1e-2;
    std::vector<double> thetas;
    std::vector<double> x;
  };
  struct Partition {
    std::vector<Region> regions;
    double t = 0.0;
    std::vector<double> thetas;
    std::vector<double> x;
  };
  struct Blowup {
    double alpha = 1.0;
    double mu = 0.0;
    double t = 0.0;
    double x = 0.0;
    std::vector<double> thetas;
  };

  std::optional<Leqg> leqg;
  std::optional<Partition> partition;
  std::optional<Blowup> blowup;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Fig2;
  std::uint64_t seed = 42;
  unsigned workers = 0;
  std::variant<CurveConfig, Fig4Config, LeqgSweepConfig, ValidateConfig> body;
};

/// Built-in configuration reproducing the experiment at desk scale.
ExperimentConfig default_config(ExperimentKind kind);

/// Parses a JSON document with a top-level "experiment" discriminator. Missing
/// keys take the defaults of that experiment; unknown keys, mixed theta and
/// lambda_theta entries, and noise/cost incompatibility raise ConfigError.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::string& path);

struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(std::ostream& os) const;
  std::string str() const;
};

/// %.17g with a '.' decimal separator; infinities as "inf"/"-inf".
std::string format_number(double v);

/// Columns x, lambda_theta, t, control (lambda_theta is "inf" in the special case).
CsvTable run_fig_curves(const ExperimentConfig& config);

struct Fig4Result {
  CsvTable runs;     // theta, run_index, cost
  CsvTable summary;  // theta, mean, var, median, q90, q99, bin_left, bin_right, count, log10_prob
  std::vector<double> thetas;
  std::vector<CostSummary> stats;
};

Fig4Result run_fig4(const ExperimentConfig& config);

/// Columns x, t, theta, wellposed, control (empty where ill-posed).
CsvTable run_leqg_sweep(const ExperimentConfig& config);

struct ValidationReport {
  /// suite, theta, x, estimate, std_err, reference, z_score, pass, note
  CsvTable points;
  bool passed = true;
  std::vector<std::string> diagnostics;

  std::string summary() const;
};

ValidationReport run_validate_mc(const ExperimentConfig& config);

}  // namespace rspi
