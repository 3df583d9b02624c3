#include "rspi/analytic_control.hpp"
#include "rspi/core_model.hpp"
#include "rspi/errors.hpp"
#include "rspi/experiments.hpp"
#include "rspi/path_integral_mc.hpp"
#include "rspi/risk_eval.hpp"
#include "rspi/sde_sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace rspi;

namespace {

McOptions mc_options(std::size_t n_samples, double dt, std::uint64_t seed, unsigned workers) {
  return McOptions{n_samples, dt, seed, workers};
}

}  // namespace

PYBIND11_MODULE(_rspi, m) {
  m.doc() = "Risk-sensitive path integral control";

  auto config_error = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IllPosedError>(m, "IllPosedError", PyExc_ValueError);
  py::register_exception<DegenerateEstimate>(m, "DegenerateEstimate", PyExc_RuntimeError);
  py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);
  py::register_exception<BatchError>(m, "BatchError", PyExc_RuntimeError);
  (void)config_error;

  // core model
  py::class_<RiskParams>(m, "RiskParams")
      .def_property_readonly("theta", &RiskParams::theta)
      .def_property_readonly("lambda0", &RiskParams::lambda0)
      .def_property_readonly("is_special", &RiskParams::is_special)
      .def_property_readonly("lambda_theta", &RiskParams::lambda_theta)
      .def_property_readonly("inverse_lambda_theta", &RiskParams::inverse_lambda_theta)
      .def("__repr__", [](const RiskParams& p) {
        return "RiskParams(lambda0=" + format_number(p.lambda0()) + ", theta=" + format_number(p.theta()) + ")";
      });
  m.def("make_risk_params", &make_risk_params, py::arg("lambda0"), py::arg("theta"));
  m.def("risk_params_from_lambda_theta", &risk_params_from_lambda_theta, py::arg("lambda0"),
        py::arg("lambda_theta"));
  m.def("special_risk_params", &special_risk_params, py::arg("lambda0"));
  m.def("check_noise_cost_compatibility",
        py::overload_cast<double, double, double>(&check_noise_cost_compatibility), py::arg("sigma"),
        py::arg("R"), py::arg("lambda0"));
  m.def("small_theta_reference", &small_theta_reference, py::arg("mean"), py::arg("variance"),
        py::arg("theta"));

  py::class_<Region>(m, "Region")
      .def(py::init<double, double, double>(), py::arg("lower"), py::arg("upper"), py::arg("cost"))
      .def_property_readonly("lower", &Region::lower)
      .def_property_readonly("upper", &Region::upper)
      .def_property_readonly("cost", &Region::cost)
      .def("contains", &Region::contains);

  py::class_<EndCost>(m, "EndCost")
      .def_static("quadratic", py::overload_cast<double, double>(&EndCost::quadratic), py::arg("alpha"),
                  py::arg("mu"))
      .def_static("partition", &EndCost::partition, py::arg("regions"))
      .def_static("targets_threats", &EndCost::targets_threats, py::arg("regions"))
      .def_static("single_region", &EndCost::single_region, py::arg("region"))
      .def_static("constant", &EndCost::constant, py::arg("c"))
      .def("__call__", py::overload_cast<double>(&EndCost::operator(), py::const_));

  py::class_<ControlProblem>(m, "ControlProblem")
      .def_static(
          "scalar",
          [](double sigma, double R, const EndCost& end_cost, double horizon) {
            return ControlProblem::scalar(sigma, R, end_cost, horizon);
          },
          py::arg("sigma"), py::arg("R"), py::arg("end_cost"), py::arg("horizon"))
      .def_property_readonly("lambda0", &ControlProblem::lambda0)
      .def_property_readonly("horizon", &ControlProblem::horizon);

  // simulation
  m.def(
      "batch_costs_mixture",
      [](const ControlProblem& problem, const RiskParams& params, double x0, double t0, double dt,
         std::size_t n, std::uint64_t seed, unsigned workers) {
        const double sigma = problem.sigma()(0, 0);
        const double R = problem.control_penalty()(0, 0);
        const Policy policy =
            mixture_policy(problem.end_cost(), params, sigma, problem.horizon(), problem.lambda0(), R);
        py::gil_scoped_release release;
        return batch_costs(problem, policy, Vector::Constant(1, x0), t0, dt, BatchOptions{n, seed, workers});
      },
      py::arg("problem"), py::arg("params"), py::arg("x0"), py::arg("t0"), py::arg("dt"), py::arg("n"),
      py::arg("seed") = 42, py::arg("workers") = 0);
  m.def("time_grid", &time_grid, py::arg("t0"), py::arg("horizon"), py::arg("dt"));

  // closed forms
  py::class_<LeqgSpec>(m, "LeqgSpec")
      .def(py::init([](double alpha, double mu, double R, double sigma, double theta, double horizon) {
             return LeqgSpec{alpha, mu, R, sigma, theta, horizon};
           }),
           py::arg("alpha") = 1.0, py::arg("mu") = 0.0, py::arg("R") = 1.0, py::arg("sigma") = 1.0,
           py::arg("theta") = 0.0, py::arg("horizon") = 1.0)
      .def_readwrite("alpha", &LeqgSpec::alpha)
      .def_readwrite("mu", &LeqgSpec::mu)
      .def_readwrite("R", &LeqgSpec::R)
      .def_readwrite("sigma", &LeqgSpec::sigma)
      .def_readwrite("theta", &LeqgSpec::theta)
      .def_readwrite("horizon", &LeqgSpec::horizon);
  m.def("leqg_theta_threshold", &leqg_theta_threshold, py::arg("spec"), py::arg("t"));
  m.def("leqg_wellposed", &leqg_wellposed, py::arg("spec"), py::arg("t"));
  m.def("leqg_control", &leqg_control, py::arg("spec"), py::arg("t"), py::arg("x"));
  m.def("hit_probability", &hit_probability, py::arg("t"), py::arg("x"), py::arg("region"), py::arg("sigma"),
        py::arg("horizon"));
  m.def(
      "single_region_control",
      [](double t, double x, const Region& region, double sigma, double horizon, double lambda0, double R) {
        return single_region_control(t, x, region, sigma, horizon, lambda0, R).control;
      },
      py::arg("t"), py::arg("x"), py::arg("region"), py::arg("sigma"), py::arg("horizon"), py::arg("lambda0"),
      py::arg("R"));
  m.def("partition_log_z", &partition_log_z, py::arg("t"), py::arg("x"), py::arg("end_cost"), py::arg("params"),
        py::arg("sigma"), py::arg("horizon"));
  m.def(
      "mixture_control",
      [](double t, double x, const EndCost& end_cost, const RiskParams& params, double sigma, double horizon,
         double lambda0, double R) {
        return mixture_control(t, x, end_cost, params, sigma, horizon, lambda0, R).control;
      },
      py::arg("t"), py::arg("x"), py::arg("end_cost"), py::arg("params"), py::arg("sigma"), py::arg("horizon"),
      py::arg("lambda0"), py::arg("R"));
  m.def("delta_two_target_control", &delta_two_target_control, py::arg("t"), py::arg("x"), py::arg("params"),
        py::arg("sigma"), py::arg("horizon"), py::arg("lambda0"));
  m.def("symmetry_breaking_time", &symmetry_breaking_time, py::arg("sigma"));
  m.def(
      "find_zero_crossings",
      [](const std::function<double(double)>& f, double lo, double hi, double step) {
        return find_zero_crossings(f, lo, hi, step);
      },
      py::arg("f"), py::arg("lo"), py::arg("hi"), py::arg("step") = 1e-3);

  // Monte Carlo
  py::class_<ZEstimate>(m, "ZEstimate")
      .def_readonly("log_z", &ZEstimate::log_z)
      .def_readonly("std_err_log_z", &ZEstimate::std_err_log_z)
      .def_readonly("n_samples", &ZEstimate::n_samples)
      .def_readonly("effective_sample_size", &ZEstimate::effective_sample_size);
  py::class_<ValueEstimate>(m, "ValueEstimate")
      .def_readonly("value", &ValueEstimate::value)
      .def_readonly("std_err", &ValueEstimate::std_err)
      .def_readonly("n_samples", &ValueEstimate::n_samples);
  py::class_<ControlEstimate>(m, "ControlEstimate")
      .def_readonly("control", &ControlEstimate::control)
      .def_readonly("std_err", &ControlEstimate::std_err)
      .def_readonly("step", &ControlEstimate::step)
      .def_readonly("n_samples", &ControlEstimate::n_samples);
  py::class_<BlowupDiagnostic>(m, "BlowupDiagnostic")
      .def_readonly("top_share", &BlowupDiagnostic::top_share)
      .def_readonly("empirical_flag", &BlowupDiagnostic::empirical_flag)
      .def_readonly("analytic_divergent", &BlowupDiagnostic::analytic_divergent)
      .def_readonly("analytic_threshold", &BlowupDiagnostic::analytic_threshold)
      .def_readonly("message", &BlowupDiagnostic::message)
      .def_property_readonly("suspected_divergent", &BlowupDiagnostic::suspected_divergent);

  m.def(
      "estimate_log_z",
      [](const ControlProblem& problem, const RiskParams& params, double t, double x, std::size_t n_samples,
         double dt, std::uint64_t seed, unsigned workers) {
        py::gil_scoped_release release;
        return estimate_log_z(problem, params, t, Vector::Constant(1, x), mc_options(n_samples, dt, seed, workers));
      },
      py::arg("problem"), py::arg("params"), py::arg("t"), py::arg("x"), py::arg("n_samples") = 100000,
      py::arg("dt") = 1e-3, py::arg("seed") = 42, py::arg("workers") = 0);
  m.def(
      "estimate_value",
      [](const ControlProblem& problem, const RiskParams& params, double t, double x, std::size_t n_samples,
         double dt, std::uint64_t seed, unsigned workers) {
        py::gil_scoped_release release;
        return estimate_value(problem, params, t, Vector::Constant(1, x), mc_options(n_samples, dt, seed, workers));
      },
      py::arg("problem"), py::arg("params"), py::arg("t"), py::arg("x"), py::arg("n_samples") = 100000,
      py::arg("dt") = 1e-3, py::arg("seed") = 42, py::arg("workers") = 0);
  m.def(
      "estimate_control",
      [](const ControlProblem& problem, const RiskParams& params, double t, double x, std::optional<double> step,
         std::size_t n_samples, double dt, std::uint64_t seed, unsigned workers) {
        py::gil_scoped_release release;
        return estimate_control(problem, params, t, Vector::Constant(1, x), step,
                                mc_options(n_samples, dt, seed, workers));
      },
      py::arg("problem"), py::arg("params"), py::arg("t"), py::arg("x"), py::arg("step") = py::none(),
      py::arg("n_samples") = 100000, py::arg("dt") = 1e-3, py::arg("seed") = 42, py::arg("workers") = 0);
  m.def(
      "detect_blowup",
      [](const std::vector<double>& exponents, std::optional<LeqgSpec> spec, double t) {
        return detect_blowup(exponents, spec ? &*spec : nullptr, t);
      },
      py::arg("exponents"), py::arg("spec") = py::none(), py::arg("t") = 0.0);
  m.def(
      "path_exponents",
      [](const ControlProblem& problem, const RiskParams& params, double t, double x, std::size_t n_samples,
         double dt, std::uint64_t seed, unsigned workers) {
        py::gil_scoped_release release;
        return path_exponents(problem, params, t, Vector::Constant(1, x), mc_options(n_samples, dt, seed, workers));
      },
      py::arg("problem"), py::arg("params"), py::arg("t"), py::arg("x"), py::arg("n_samples") = 100000,
      py::arg("dt") = 1e-3, py::arg("seed") = 42, py::arg("workers") = 0);

  // risk evaluation
  m.def(
      "empirical_value",
      [](const std::vector<double>& costs, double theta) { return empirical_value(CostSample(costs), theta); },
      py::arg("costs"), py::arg("theta"));
  m.def(
      "monotonicity_scan",
      [](const std::vector<double>& costs, const std::vector<double>& grid) {
        const auto v = monotonicity_scan(CostSample(costs), grid);
        const char* names[] = {"strictly_increasing", "constant", "nondecreasing", "failed"};
        return py::make_tuple(names[static_cast<int>(v.verdict)], v.values, v.margins);
      },
      py::arg("costs"), py::arg("theta_grid"));
  m.def(
      "extremal_limits", [](const std::vector<double>& costs) { return extremal_limits(CostSample(costs)); },
      py::arg("costs"));
  m.def(
      "expansion_residual",
      [](const std::vector<double>& costs, double theta) { return expansion_check(CostSample(costs), theta).residual; },
      py::arg("costs"), py::arg("theta"));
  m.def(
      "cost_statistics",
      [](const std::vector<double>& costs, const std::vector<double>& quantiles, std::size_t n_bins) {
        const auto s = cost_statistics(CostSample(costs), quantiles, n_bins);
        py::dict d;
        d["mean"] = s.mean;
        d["var"] = s.variance;
        d["median"] = s.median;
        d["quantiles"] = s.quantiles;
        py::list bins;
        for (const auto& b : s.histogram) bins.append(py::make_tuple(b.left, b.right, b.count, b.log10_prob));
        d["histogram"] = bins;
        d["infinite_count"] = s.infinite_count;
        return d;
      },
      py::arg("costs"), py::arg("quantiles") = std::vector<double>{0.9, 0.99}, py::arg("n_bins") = 30);

  // experiments
  m.def(
      "run_experiment",
      [](const std::string& config_json, std::optional<std::uint64_t> seed, unsigned workers) {
        auto config = parse_config(config_json);
        if (seed) config.seed = *seed;
        config.workers = workers;
        py::gil_scoped_release release;
        switch (config.kind) {
          case ExperimentKind::Fig4: {
            const auto r = run_fig4(config);
            return std::vector<std::string>{r.runs.str(), r.summary.str()};
          }
          case ExperimentKind::LeqgSweep:
            return std::vector<std::string>{run_leqg_sweep(config).str()};
          case ExperimentKind::ValidateMc: {
            const auto r = run_validate_mc(config);
            return std::vector<std::string>{r.points.str(), r.summary()};
          }
          default:
            return std::vector<std::string>{run_fig_curves(config).str()};
        }
      },
      py::arg("config_json"), py::arg("seed") = py::none(), py::arg("workers") = 0,
      "Runs an experiment from a JSON config; returns the CSV text(s).");
}
