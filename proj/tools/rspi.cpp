// rspi command-line entry point.
#include "rspi/errors.hpp"
#include "rspi/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kGateFailed = 2;
constexpr int kRuntimeError = 3;

void emit(const rspi::CsvTable& table, const std::string& path) {
  if (path.empty()) {
    table.write(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rspi::ConfigError("cannot open output file '" + path + "'");
  table.write(out);
}

std::string summary_path(const std::string& out) {
  std::filesystem::path p(out);
  auto name = p.stem().string() + "_summary" + p.extension().string();
  return (p.parent_path() / name).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-sensitive path integral control experiments"};
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out;
  app.add_option("experiment", experiment, "fig1 | fig2 | fig3 | fig4 | leqg-sweep | validate-mc")->required();
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out, "output CSV path (default: stdout)");
  app.add_option("--workers", workers, "worker threads (0 = hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const auto kind = rspi::parse_experiment_kind(experiment);
    auto config = config_path.empty() ? rspi::default_config(kind) : rspi::load_config(config_path);
    if (config.kind != kind) {
      throw rspi::ConfigError("config is for '" + std::string(rspi::experiment_name(config.kind)) +
                              "' but '" + experiment + "' was requested");
    }
    if (seed) config.seed = *seed;
    if (workers) config.workers = *workers;

    switch (kind) {
      case rspi::ExperimentKind::Fig1:
      case rspi::ExperimentKind::Fig2:
      case rspi::ExperimentKind::Fig3:
        emit(rspi::run_fig_curves(config), out);
        break;
      case rspi::ExperimentKind::Fig4: {
        const auto result = rspi::run_fig4(config);
        if (out.empty()) {
          result.summary.write(std::cout);
        } else {
          emit(result.runs, out);
          emit(result.summary, summary_path(out));
        }
        break;
      }
      case rspi::ExperimentKind::LeqgSweep:
        emit(rspi::run_leqg_sweep(config), out);
        break;
      case rspi::ExperimentKind::ValidateMc: {
        const auto report = rspi::run_validate_mc(config);
        emit(report.points, out);
        std::cerr << report.summary();
        return report.passed ? kOk : kGateFailed;
      }
    }
  } catch (const rspi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const rspi::IllPosedError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
