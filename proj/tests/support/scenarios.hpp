#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "bteflow/config.hpp"

namespace bteflow::testing {

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(BTEFLOW_SOURCE_DIR) / rel;
}

/// The shipped hot-spot scenario resized; bands beyond the shipped 3-frequency
/// table come from the generated dispersion model.
inline ScenarioConfig bte_scenario(int n, int ndirs, int nfreq, int nsteps, double T_peak = 350.0) {
  ScenarioConfig c = load_config(source_path("scenarios/bte_desk.cfg"));
  c.mesh.nx = c.mesh.ny = n;
  const int nb = nfreq + transverse_band_count(nfreq);
  c.entity_lines[0] = "index d 1 " + std::to_string(ndirs) + " direction";
  c.entity_lines[1] = "index b 1 " + std::to_string(nb) + " band";
  if (nfreq != 3) c.material.table.clear();
  c.material.n_freq = nfreq;
  c.scenario.T_peak = T_peak;
  c.nsteps = nsteps;
  c.output = {};
  return c;
}

/// Hot spot wide enough to be felt across a coarse wall.
inline ScenarioConfig hot_scenario(int n, int ndirs, int nfreq, int nsteps) {
  ScenarioConfig c = bte_scenario(n, ndirs, nfreq, nsteps);
  c.scenario.width = 0.3 * c.mesh.Lx;
  return c;
}

inline ScenarioConfig closed_box(int n, int nsteps) {
  ScenarioConfig c = load_config(source_path("scenarios/closed_box.cfg"));
  c.mesh.nx = c.mesh.ny = n;
  c.nsteps = nsteps;
  c.output = {};
  return c;
}

inline double max_rel_diff(std::span<const double> a, std::span<const double> b) {
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(a[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

/// Largest per-DOF relative difference |a-b| / max(|a|,|b|).
inline double max_pointwise_rel(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double s = std::max(std::abs(a[i]), std::abs(b[i]));
    if (s > 0.0) worst = std::max(worst, std::abs(a[i] - b[i]) / s);
  }
  return worst;
}

}  // namespace bteflow::testing
