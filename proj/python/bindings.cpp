#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "bteflow/cli.hpp"
#include "bteflow/config.hpp"
#include "bteflow/error.hpp"

namespace py = pybind11;
using namespace bteflow;

namespace {

py::array_t<double> to_array(std::span<const double> v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

// A run's final state and report, detached from the pipeline that made it.
struct PyRun {
  RunResult result;
  std::shared_ptr<const Pipeline> pipeline;

  py::dict fields() const {
    py::dict d;
    for (const FieldInfo& f : result.state.layout().all()) d[py::str(f.name)] = to_array(result.state.field(f.name));
    return d;
  }
  py::dict timing() const {
    const TimingBreakdown& t = result.timing;
    py::dict d;
    d["intensity_solve"] = t.intensity_solve;
    d["temperature_update"] = t.temperature_update;
    d["communication"] = t.communication;
    d["total_wall"] = t.total_wall;
    d["bytes_per_step"] = t.bytes_per_step;
    d["bytes_total"] = t.bytes_total;
    return d;
  }
};

PyRun run_pipeline(const std::shared_ptr<const Pipeline>& p, std::optional<int> nsteps,
                   std::optional<std::string> backend, std::optional<int> workers) {
  BackendConfig be = p->config.backend;
  if (backend) be.kind = parse_backend_kind(*backend);
  if (workers) be.workers = *workers;
  const FieldStore init = initial_state(*p);
  py::gil_scoped_release release;
  return {run_simulation(p->sim, init, be, nsteps.value_or(p->nsteps)), p};
}

py::tuple cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_bteflow, m) {
  m.doc() = "Finite-volume phonon transport pipeline";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<RuntimeFailure>(m, "RuntimeFailure", base.ptr());

  py::class_<ScenarioConfig>(m, "Config")
      .def_static("load", &load_config, py::arg("path"))
      .def_static("parse", &parse_config, py::arg("text"), py::arg("base_dir") = ".")
      .def("to_text", &write_config)
      .def_property(
          "nx", [](const ScenarioConfig& c) { return c.mesh.nx; },
          [](ScenarioConfig& c, int v) { c.mesh.nx = v; })
      .def_property(
          "ny", [](const ScenarioConfig& c) { return c.mesh.ny; },
          [](ScenarioConfig& c, int v) { c.mesh.ny = v; })
      .def_property(
          "T_peak", [](const ScenarioConfig& c) { return c.scenario.T_peak; },
          [](ScenarioConfig& c, double v) { c.scenario.T_peak = v; })
      .def_property(
          "center", [](const ScenarioConfig& c) { return c.center; },
          [](ScenarioConfig& c, std::optional<double> v) { c.center = v; })
      .def_property(
          "backend", [](const ScenarioConfig& c) { return std::string(backend_name(c.backend.kind)); },
          [](ScenarioConfig& c, const std::string& v) { c.backend.kind = parse_backend_kind(v); })
      .def_property(
          "workers", [](const ScenarioConfig& c) { return c.backend.workers; },
          [](ScenarioConfig& c, int v) { c.backend.workers = v; })
      .def_readwrite("nsteps", &ScenarioConfig::nsteps)
      .def_readwrite("dt", &ScenarioConfig::dt)
      .def_readwrite("equation", &ScenarioConfig::equation)
      .def_readwrite("entities", &ScenarioConfig::entity_lines);

  py::class_<Pipeline, std::shared_ptr<Pipeline>>(m, "Pipeline")
      .def(py::init([](const ScenarioConfig& c) { return std::shared_ptr<Pipeline>(build_pipeline(c)); }),
           py::arg("config"))
      .def_static(
          "load",
          [](const std::filesystem::path& path) {
            return std::shared_ptr<Pipeline>(build_pipeline(load_config(path)));
          },
          py::arg("path"))
      .def_property_readonly("ncells", [](const Pipeline& p) { return p.mesh->num_cells(); })
      .def_property_readonly("dt", [](const Pipeline& p) { return p.dt; })
      .def_property_readonly("nsteps", [](const Pipeline& p) { return p.nsteps; })
      .def_property_readonly("dof_per_cell",
                             [](const Pipeline& p) {
                               return p.sim.layout->info(p.sim.compiled->unknown_field()).per_cell_size;
                             })
      .def_property_readonly("nbands",
                             [](const Pipeline& p) { return p.physics ? p.physics->material.num_bands() : 0; })
      .def_property_readonly("ndirections",
                             [](const Pipeline& p) { return p.physics ? p.physics->directions.count : 0; })
      .def("term_table", [](const Pipeline& p) { return render_term_table(p.equation.terms); })
      .def("plan", [](const Pipeline& p) { return render_plan(p.sim.offload); })
      .def("transfers", [](const Pipeline& p) { return render_transfers(p.sim.offload); })
      .def("predicted_bytes_per_step",
           [](const Pipeline& p) { return predicted_bytes_per_step(p.sim.offload, *p.sim.layout); })
      .def("run", &run_pipeline, py::arg("nsteps") = py::none(), py::arg("backend") = py::none(),
           py::arg("workers") = py::none());

  py::class_<PyRun>(m, "RunResult")
      .def_property_readonly("steps", [](const PyRun& r) { return r.result.steps; })
      .def_property_readonly("completed",
                             [](const PyRun& r) { return r.result.status == RunStatus::Completed; })
      .def_property_readonly("cause", [](const PyRun& r) { return r.result.cause; })
      .def_property_readonly("fields", &PyRun::fields)
      .def_property_readonly("timing", &PyRun::timing)
      .def("field", [](const PyRun& r, const std::string& name) { return to_array(r.result.state.field(name)); })
      .def("fields_csv", [](const PyRun& r) { return render_fields_csv(*r.pipeline, r.result.state); })
      .def("total_energy", [](const PyRun& r) {
        const Pipeline& p = *r.pipeline;
        if (!p.physics) throw ValidationError("scenario has no phonon physics");
        return total_energy(r.result.state, p.config.unknown, *p.entities, *p.physics, *p.mesh);
      });

  m.def("cli", &cli, py::arg("args"), "Run a command-line invocation; returns (code, stdout, stderr).");
  m.def(
      "generate_material_table",
      [](int n_freq, double T_ref, const std::string& path) {
        write_material_table(generate_material_table(n_freq, T_ref), path);
      },
      py::arg("n_freq"), py::arg("T_ref") = 300.0, py::arg("path"));
  m.def("band_count", [](int n_freq) { return n_freq + transverse_band_count(n_freq); },
        py::arg("n_freq"));
  m.def(
      "directions",
      [](int n) {
        const DirectionSet s = build_directions(n);
        py::dict d;
        d["sx"] = s.sx;
        d["sy"] = s.sy;
        d["weight"] = s.weight;
        d["reflect_x"] = s.reflect_x;
        d["reflect_y"] = s.reflect_y;
        return d;
      },
      py::arg("n"));
}
