#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "spdesync/besov.hpp"
#include "spdesync/error.hpp"
#include "spdesync/experiments.hpp"
#include "spdesync/noise.hpp"
#include "spdesync/philox.hpp"
#include "spdesync/solver.hpp"

namespace py = pybind11;
using namespace spdesync;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Field to_field(const Array& a, double length) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) {
    throw ConfigError("expected a square 2-d array, got shape with ndim " +
                      std::to_string(a.ndim()));
  }
  const TorusGrid g(length, static_cast<int>(a.shape(0)));
  return Field(g, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Field& f) {
  const auto n = static_cast<py::ssize_t>(f.grid().points());
  Array out({n, n});
  std::memcpy(out.mutable_data(), f.values().data(), f.values().size() * sizeof(double));
  return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& kind) {
  if (kind.empty()) return ExperimentConfig::from_ini(text);
  return ExperimentConfig::from_ini(text, experiment_kind_from_string(kind));
}

py::dict result_dict(const ExperimentResult& r) {
  py::dict metrics;
  for (const auto& [k, v] : r.metrics) metrics[py::str(k)] = v;
  py::list checks;
  for (const auto& c : r.checks) {
    py::dict d;
    d["name"] = c.name;
    d["passed"] = c.passed;
    d["observed"] = c.observed;
    d["threshold"] = c.threshold;
    d["detail"] = c.detail;
    d["failing_seeds"] = c.failing_seeds;
    checks.append(d);
  }
  py::dict out;
  out["kind"] = to_string(r.config.kind);
  out["passed"] = r.passed();
  out["seeds"] = r.member_seeds;
  out["metrics"] = metrics;
  out["checks"] = checks;
  out["csv"] = to_csv(r);
  out["summary_json"] = summary_json(r);
  return out;
}

}  // namespace

PYBIND11_MODULE(_spdesync, m) {
  m.doc() = "Spectral solver and synchronization experiments for the stochastic Allen-Cahn equation";

  auto base = py::register_exception<Error>(m, "SpdeSyncError");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DegenerateFit>(m, "DegenerateFit", base.ptr());
  py::register_exception<BlowUpError>(m, "BlowUpError", base.ptr());

  m.def("experiments", [] {
    std::vector<std::string> names;
    for (auto k : all_experiment_kinds()) names.emplace_back(to_string(k));
    return names;
  });

  m.def(
      "default_config",
      [](const std::string& kind) {
        return ExperimentConfig::defaults(experiment_kind_from_string(kind)).to_ini();
      },
      py::arg("kind"), "Default INI text for an experiment.");

  m.def(
      "run_experiment",
      [](const std::string& config, const std::string& kind, int threads) {
        const ExperimentConfig cfg = parse_config(config, kind);
        RunOptions options;
        options.threads = threads;
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg, options);
        }
        return result_dict(r);
      },
      py::arg("config") = "", py::arg("kind") = "", py::arg("threads") = 0,
      "Runs one experiment from INI text; `kind` overrides [experiment] kind.");

  m.def(
      "evolve",
      [](const Array& u0, double t, const std::string& config, double s) {
        const ExperimentConfig cfg = ExperimentConfig::from_ini(config);
        const Field f = to_field(u0, cfg.length);
        if (!(f.grid() == cfg.grid())) throw ConfigError("initial field does not match [solver] points");
        const SolverConfig solver = cfg.solver();
        Field end(f.grid());
        {
          py::gil_scoped_release release;
          const NoiseRealization noise(cfg.seed, f.grid(), cfg.dt, solver.step_index(s),
                                       solver.step_index(t), cfg.truncation, cfg.amplitude);
          end = evolve(f, s, t, solver, noise).final_state;
        }
        return to_array(end);
      },
      py::arg("u0"), py::arg("t"), py::arg("config") = "", py::arg("s") = 0.0,
      "u(t; s; u0) for the noise seeded by [noise] seed.");

  m.def(
      "besov_norm_sup",
      [](const Array& u, double length, double alpha, int s_points) {
        const Field f = to_field(u, length);
        return besov_norm_sup(f, alpha, SGrid::for_grid(f.grid(), s_points));
      },
      py::arg("u"), py::arg("length"), py::arg("alpha"), py::arg("s_points") = 64);

  m.def(
      "besov_norm_p",
      [](const Array& u, double length, double alpha, int p, int s_points) {
        const Field f = to_field(u, length);
        return besov_norm_p(f, BesovParams(alpha, p, SGrid::for_grid(f.grid(), s_points)));
      },
      py::arg("u"), py::arg("length"), py::arg("alpha"), py::arg("p"), py::arg("s_points") = 64);

  m.def(
      "phi_besov",
      [](const Array& u, double length, double alpha, int p, int s_points) {
        const Field f = to_field(u, length);
        return phi_besov(f, BesovParams(alpha, p, SGrid::for_grid(f.grid(), s_points)));
      },
      py::arg("u"), py::arg("length"), py::arg("alpha"), py::arg("p"), py::arg("s_points") = 64);

  m.def(
      "member_seed", [](std::uint64_t b, std::uint64_t i) { return member_seed(b, i); },
      py::arg("base"), py::arg("index"));
}
