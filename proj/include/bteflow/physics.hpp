#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bteflow/fields.hpp"
#include "bteflow/hooks.hpp"
#include "bteflow/mesh.hpp"

namespace bteflow {

/// Discrete ordinates on the unit circle: θ_d = 2π(d-½)/N, w_d = 2π/N.
///
/// Quadrant partners are built from the same cos/sin pair, so axis
/// reflections map every direction exactly onto another one.
struct DirectionSet {
  int count = 0;
  std::vector<double> sx;
  std::vector<double> sy;
  std::vector<double> weight;
  /// 0-based partner after flipping sx (wall normal along x) or sy.
  std::vector<int> reflect_x;
  std::vector<int> reflect_y;

  [[nodiscard]] double total_weight() const;
  /// Partner of d across a wall with the given axis-aligned normal.
  [[nodiscard]] int reflect(int d, Vec2 normal) const;
};

/// Throws ValidationError unless N >= 4 and N % 4 == 0.
[[nodiscard]] DirectionSet build_directions(int n);

enum class Polarization { Longitudinal, Transverse };
enum class MaterialMode { Linear, Quadrature };

struct Band {
  Polarization polarization = Polarization::Longitudinal;
  double vg = 0.0;     // m/s
  double tau = 0.0;    // s
  double slope = 0.0;  // dI0/dT in linear mode
  double I_ref = 0.0;  // I0(T_ref) in linear mode
  double omega_lo = 0.0;
  double omega_hi = 0.0;
};

/// Per-band material data and the equilibrium-intensity model.
class Material {
 public:
  Material() = default;
  Material(MaterialMode mode, double T_ref, std::vector<Band> bands);

  [[nodiscard]] MaterialMode mode() const noexcept { return mode_; }
  [[nodiscard]] double T_ref() const noexcept { return T_ref_; }
  [[nodiscard]] int num_bands() const noexcept { return static_cast<int>(bands_.size()); }
  [[nodiscard]] const Band& band(int b) const { return bands_.at(b); }  // 0-based
  [[nodiscard]] const std::vector<Band>& bands() const noexcept { return bands_; }

  /// I0_b(T) for a 0-based band.
  [[nodiscard]] double equilibrium_intensity(double T, int b) const;
  [[nodiscard]] double equilibrium_slope(double T, int b) const;

  [[nodiscard]] Material with_mode(MaterialMode mode) const;

 private:
  MaterialMode mode_ = MaterialMode::Linear;
  double T_ref_ = 300.0;
  std::vector<Band> bands_;
};

/// Transverse bands accompanying n_freq longitudinal ones: ceil(3n/8), and
/// none for a single gray band.
[[nodiscard]] int transverse_band_count(int n_freq);

/// Rows `band polarization vg tau a_b I_ref [omega_lo omega_hi]`, optional `tref T`.
[[nodiscard]] Material read_material_table(const std::string& path, MaterialMode mode);
void write_material_table(const Material& material, const std::string& path);

/// Silicon-like placeholder table from a quadratic dispersion model.
[[nodiscard]] Material generate_material_table(int n_freq, double T_ref = 300.0);

/// Checks the table against the band rule and returns it; throws when rows are
/// missing or polarizations do not match.
[[nodiscard]] Material build_bands(int n_freq, const Material& table);

struct ScenarioParams {
  double T_cold = 300.0;
  double T_peak = 350.0;
  double width = 10e-6;  // 1/e² half-width
  double Lx = 525e-6;
  double Ly = 525e-6;
  double dt = 0.0;
  int nsteps = 0;
};

/// Hot-wall temperature: T_cold + (T_peak - T_cold) exp(-2 s² / w²).
[[nodiscard]] double gaussian_wall_temperature(double s, double T_cold, double T_peak,
                                               double width);

enum class TemperatureWeighting {
  Energy,      // c_b = 1/(vg_b τ_b): conserves Σ V Σ_b Σ_d w_d I / vg
  Relaxation,  // c_b = 1/τ_b
};

struct TemperatureSolve {
  double T = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// Solves Σ_b c_b W I0_b(T) = rhs by Newton with bisection fallback,
/// |residual| <= 1e-12 |rhs|, at most 50 iterations.
[[nodiscard]] TemperatureSolve solve_temperature(const Material& material,
                                                 const std::vector<double>& c, double W,
                                                 double rhs, double T_guess);

[[nodiscard]] std::vector<double> temperature_weights(const Material& material,
                                                      TemperatureWeighting weighting);

struct Physics {
  DirectionSet directions;
  Material material;
  ScenarioParams scenario;
};

/// dt = min(0.9 / (max vg · max_d(|sx|/dx + |sy|/dy)), min τ).
[[nodiscard]] double default_time_step(const Mesh& mesh, const Physics& physics);
/// max_b vg_b · dt / min(dx, dy).
[[nodiscard]] double cfl_number(const Mesh& mesh, const Physics& physics, double dt);

/// Per-cell band-summed energy density Σ_b (1/vg_b) Σ_d w_d I[d,b].
[[nodiscard]] std::vector<double> energy_density(const FieldStore& state, const std::string& field,
                                                 const EntityTable& entities,
                                                 const Physics& physics);
[[nodiscard]] double total_energy(const FieldStore& state, const std::string& field,
                                  const EntityTable& entities, const Physics& physics,
                                  const Mesh& mesh);

/// isothermal, isothermal_gaussian, symmetric and the temperature_update hook.
void register_bte_callbacks(CallbackLibrary& library, std::shared_ptr<const Physics> physics);

/// Value providers for coefficients: directions.x|y|w, bands.vg|tau|beta.
[[nodiscard]] std::vector<double> provider_values(const std::string& source,
                                                  const Physics& physics);

}  // namespace bteflow
