#include "bteflow/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "bteflow/config.hpp"
#include "bteflow/error.hpp"

namespace bteflow {

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write '" + path.string() + "'");
  f << text;
}

// Output paths: config-relative unless an output directory overrides them.
fs::path output_path(const ScenarioConfig& c, const std::string& configured,
                     const std::string& fallback, const std::string& out_dir) {
  if (!out_dir.empty())
    return fs::path(out_dir) / (configured.empty() ? fs::path(fallback) : fs::path(configured).filename());
  return configured.empty() ? fs::path() : c.resolve(configured);
}

struct CheckReport {
  std::ostream& out;
  bool ok = true;
  void line(bool pass, const std::string& name, const std::string& detail) {
    out << (pass ? "PASS  " : "FAIL  ") << name << ": " << detail << '\n';
    ok = ok && pass;
  }
};

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << v;
  return os.str();
}

int cmd_check(const std::string& path, std::ostream& out) {
  CheckReport r{out};
  ScenarioConfig c;
  try {
    c = load_config(path);
    r.line(true, "config", "parsed " + path);
  } catch (const Error& e) {
    r.line(false, "config", e.what());
    return kExitInvalid;
  }

  std::optional<Mesh> mesh;
  try {
    mesh = build_mesh(c);
    double closure = 0.0, normal_err = 0.0;
    for (int cell = 0; cell < mesh->num_cells(); ++cell)
      closure = std::max(closure, mesh->closure_residual(cell));
    for (const Face& f : mesh->faces())
      normal_err = std::max(normal_err, std::abs(std::hypot(f.normal.x, f.normal.y) - 1.0));
    r.line(closure <= 1e-12, "mesh closure",
           "max |sum A n| = " + sci(closure) + " over " + std::to_string(mesh->num_cells()) + " cells");
    r.line(normal_err <= 1e-14, "face normals", "max ||n| - 1| = " + sci(normal_err));
  } catch (const Error& e) {
    r.line(false, "mesh", e.what());
  }

  int ndir = c.directions;
  int nbands = 0;
  for (const std::string& line : c.entity_lines) {
    try {
      const EntityDecl d = parse_entity_line(line);
      if (d.kind == EntityKind::Index && d.role == IndexRole::Direction) ndir = d.range.second;
      if (d.kind == EntityKind::Index && d.role == IndexRole::Band) nbands = d.range.second;
    } catch (const Error&) {
    }
  }
  std::optional<DirectionSet> dirs;
  if (ndir > 0) {
    double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0;
    for (int d = 0; d < ndir; ++d) {
      const double th = 2.0 * std::numbers::pi * (d + 0.5) / ndir;
      const double w = 2.0 * std::numbers::pi / ndir;
      sw += w;
      swx += w * std::cos(th);
      swy += w * std::sin(th);
      swxx += w * std::cos(th) * std::cos(th);
    }
    const double err = std::max({std::abs(sw - 2.0 * std::numbers::pi), std::abs(swx),
                                 std::abs(swy), std::abs(swxx - std::numbers::pi)});
    r.line(err <= 1e-12, "quadrature closure",
           std::to_string(ndir) + " directions, max moment error " + sci(err));
    try {
      dirs = build_directions(ndir);
      r.line(true, "reflection closure", "both axis reflections map onto the direction set");
    } catch (const Error& e) {
      r.line(false, "reflection closure", e.what());
    }
  }

  if (mesh && dirs && (c.has_material || nbands > 0)) {
    try {
      Physics ph;
      ph.directions = *dirs;
      ph.material = build_material(c, nbands > 0 ? nbands : std::max(1, c.material.n_freq));
      const double dt = c.dt ? *c.dt : default_time_step(*mesh, ph);
      const double cfl = cfl_number(*mesh, ph, dt);
      std::ostringstream os;
      os << "max vg*dt/dx = " << std::setprecision(4) << cfl << " (dt = " << sci(dt) << " s)";
      if (cfl > 1.0) os << " exceeds 1";
      r.line(cfl <= 1.0, "CFL", os.str());
    } catch (const Error& e) {
      r.line(false, "material", e.what());
    }
  }

  try {
    const auto p = build_pipeline(c);
    r.line(true, "pipeline",
           "entities, callbacks and regions resolve; " +
               std::to_string(p->sim.kernel.nodes.size()) + " kernel nodes");
  } catch (const Error& e) {
    r.line(false, "pipeline", e.what());
  }
  return r.ok ? kExitOk : kExitInvalid;
}

int cmd_run(const std::string& path, const std::string& out_dir, int nsteps_override,
            const std::string& backend_override, int workers_override, std::ostream& out,
            std::ostream& err) {
  ScenarioConfig c = load_config(path);
  if (nsteps_override >= 0) c.nsteps = nsteps_override;
  if (!backend_override.empty()) c.backend.kind = parse_backend_kind(backend_override);
  if (workers_override > 0) c.backend.workers = workers_override;
  const auto p = build_pipeline(c);
  const FieldStore init = initial_state(*p);
  const RunResult res = run_simulation(p->sim, init, p->config.backend, p->nsteps);

  out << "backend: " << backend_name(p->config.backend.kind) << '\n';
  out << "cells: " << p->mesh->num_cells() << ", dof per cell: "
      << p->sim.layout->info(p->sim.compiled->unknown_field()).per_cell_size
      << ", dt: " << sci(p->dt) << " s\n";
  out << "steps: " << res.steps << '/' << p->nsteps << '\n';
  out << res.timing.render_text();

  const fs::path fields = output_path(p->config, p->config.output.fields, "fields.csv", out_dir);
  const fs::path timing = output_path(p->config, p->config.output.timing, "timing.txt", out_dir);
  const fs::path timing_csv =
      output_path(p->config, p->config.output.timing_csv, "timing.csv", out_dir);
  if (!fields.empty()) write_file(fields, render_fields_csv(*p, res.state));
  if (!timing.empty()) write_file(timing, res.timing.render_text());
  if (!timing_csv.empty()) write_file(timing_csv, res.timing.render_csv());

  if (res.status == RunStatus::Aborted) {
    err << "error: run aborted: " << res.cause << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_dump(const std::string& path, const std::string& what, const std::string& output,
             std::ostream& out) {
  const auto p = build_pipeline(load_config(path));
  std::string text;
  if (what == "terms") text = render_term_table(p->equation.terms);
  else if (what == "plan") text = render_plan(p->sim.offload);
  else if (what == "transfers") text = render_transfers(p->sim.offload);
  else throw ValidationError("dump: --what must be terms, plan or transfers");
  if (output.empty()) out << text;
  else write_file(output, text);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite-volume phonon transport pipeline"};
  app.require_subcommand(1);

  std::string config, out_dir, backend, what, output;
  int nsteps = -1, workers = 0, n_freq = 0;
  double t_ref = 300.0;

  CLI::App* run = app.add_subcommand("run", "Run a scenario and write its outputs");
  run->add_option("config", config, "Scenario config")->required();
  run->add_option("--out-dir", out_dir, "Directory for the output files");
  run->add_option("--nsteps", nsteps, "Override the step count");
  run->add_option("--backend", backend, "Override the backend kind");
  run->add_option("--workers", workers, "Override the worker count");

  CLI::App* check = app.add_subcommand("check", "Validate a scenario");
  check->add_option("config", config, "Scenario config")->required();

  CLI::App* dump = app.add_subcommand("dump", "Print the term table, kernel plan or transfer sets");
  dump->add_option("config", config, "Scenario config")->required();
  dump->add_option("--what", what, "terms, plan or transfers")->required();
  dump->add_option("-o,--output", output, "Write to a file instead of stdout");

  CLI::App* normalize = app.add_subcommand("normalize", "Print the config in canonical form");
  normalize->add_option("config", config, "Scenario config")->required();

  CLI::App* gen = app.add_subcommand("gen-table", "Write a generated material table");
  gen->add_option("--n-freq", n_freq, "Longitudinal frequency bands")->required();
  gen->add_option("--tref", t_ref, "Reference temperature for the linear model");
  gen->add_option("-o,--output", output, "Output path")->required();

  std::vector<const char*> argv{"bteflow"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(config, out_dir, nsteps, backend, workers, out, err);
    if (*check) return cmd_check(config, out);
    if (*dump) return cmd_dump(config, what, output, out);
    if (*normalize) {
      out << write_config(load_config(config));
      return kExitOk;
    }
    if (*gen) {
      write_material_table(generate_material_table(n_freq, t_ref), output);
      out << "wrote " << n_freq + transverse_band_count(n_freq) << " bands to " << output << '\n';
      return kExitOk;
    }
  } catch (const RuntimeFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInvalid;
}

}  // namespace bteflow
