#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bteflow/callbacks.hpp"
#include "bteflow/entities.hpp"
#include "bteflow/frontend.hpp"
#include "bteflow/hooks.hpp"
#include "bteflow/mesh.hpp"
#include "bteflow/physics.hpp"
#include "bteflow/runtime.hpp"

namespace bteflow {

struct MeshSpec {
  bool from_file = false;
  std::string file;
  int nx = 32;
  int ny = 32;
  double Lx = 525e-6;
  double Ly = 525e-6;
  Periodicity periodic;
};

struct MaterialSpec {
  MaterialMode mode = MaterialMode::Linear;
  std::string table;  // empty: generated from the dispersion model
  int n_freq = 0;     // 0: inferred from the band index extent
  double T_ref = 300.0;
};

struct InitialSpec {
  /// equilibrium T | constant v | random seed lo hi | random_temperature seed Tlo Thi | table v...
  std::string kind = "constant";
  std::vector<double> params{0.0};
};

struct OutputSpec {
  std::string fields;
  std::string timing;
  std::string timing_csv;
};

/// Declarative scenario: everything the pipeline needs, read from an INI-style file.
struct ScenarioConfig {
  std::filesystem::path base_dir;
  MeshSpec mesh;
  bool has_material = false;
  MaterialSpec material;
  ScenarioParams scenario;
  std::optional<double> center;  // hot-spot center along the hot wall; Lx/2 when absent
  int directions = 0;            // only used when no direction index is declared
  std::optional<double> dt;
  int nsteps = 0;
  std::vector<std::string> entity_lines;
  std::string unknown;
  std::string equation;
  InitialSpec initial;
  std::vector<std::pair<int, std::string>> boundaries;
  std::vector<HookDecl> hooks;
  BackendConfig backend;
  std::vector<std::string> loops;
  OutputSpec output;

  /// Resolves a path from the config against its directory.
  [[nodiscard]] std::filesystem::path resolve(const std::string& p) const;
};

/// Throws ParseError on syntax errors and unknown sections or keys.
[[nodiscard]] ScenarioConfig parse_config(const std::string& text,
                                          const std::filesystem::path& base_dir = ".");
[[nodiscard]] ScenarioConfig load_config(const std::filesystem::path& path);

/// Canonical rendering; parse_config(write_config(c)) reproduces c.
[[nodiscard]] std::string write_config(const ScenarioConfig& config);

/// `index d 1 8 direction`, `variable I cell d,b`, `coefficient vg b from bands.vg`,
/// `coefficient k = 0.5`, `coefficient b vector = 1, 0.5`.
[[nodiscard]] EntityDecl parse_entity_line(const std::string& line);
[[nodiscard]] std::string render_entity(const EntityDecl& decl);

/// `temperature_update reads=I writes=T,Io,beta weighting=energy [concurrent]`.
[[nodiscard]] HookDecl parse_hook_line(const std::string& line);
[[nodiscard]] std::string render_hook(const HookDecl& decl);

/// Built products of a scenario, ready to run.
struct Pipeline {
  ScenarioConfig config;
  std::shared_ptr<const EntityTable> entities;
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const Physics> physics;  // null for scenarios without bands/directions
  CallbackLibrary library;
  CallbackRegistry registry;
  EquationSpec equation;
  LoopPlan loops;
  Simulation sim;
  double dt = 0.0;
  int nsteps = 0;
};

/// Resolves every cross-reference; throws ParseError or ValidationError.
[[nodiscard]] std::unique_ptr<Pipeline> build_pipeline(const ScenarioConfig& config);

[[nodiscard]] Mesh build_mesh(const ScenarioConfig& config);
[[nodiscard]] Material build_material(const ScenarioConfig& config, int nbands);

/// Coefficients filled, initial condition applied, hook outputs primed.
[[nodiscard]] FieldStore initial_state(const Pipeline& p);

/// Per-cell export: `x,y,T,E` for intensity scenarios, `x,y,<unknown>` otherwise.
[[nodiscard]] std::string render_fields_csv(const Pipeline& p, const FieldStore& state);

}  // namespace bteflow
