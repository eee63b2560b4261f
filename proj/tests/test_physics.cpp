#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <random>

#include "bteflow/config.hpp"
#include "bteflow/error.hpp"
#include "support/scenarios.hpp"

using namespace bteflow;
using bteflow::testing::bte_scenario;
using bteflow::testing::hot_scenario;
using bteflow::testing::source_path;

namespace {

constexpr double kPi = std::numbers::pi;

Band linear_band(double slope, double I_ref, double vg = 1e3, double tau = 1e-10) {
  Band b;
  b.vg = vg;
  b.tau = tau;
  b.slope = slope;
  b.I_ref = I_ref;
  return b;
}

// Equilibrium intensity from the dispersion model, by composite Simpson.
double simpson_intensity(const Band& band, double T) {
  const bool longitudinal = band.polarization == Polarization::Longitudinal;
  const double vs = longitudinal ? 9.01e3 : 5.23e3;
  const double c = longitudinal ? -2.0e-7 : -2.26e-7;
  const double deg = longitudinal ? 1.0 : 2.0;
  const double hbar = 1.054571817e-34, kb = 1.380649e-23;
  auto f = [&](double w) {
    if (w <= 0.0) return 0.0;
    const double disc = vs * vs + 4.0 * c * w;
    const double k = disc <= 0.0 ? -vs / (2.0 * c) : (-vs + std::sqrt(disc)) / (2.0 * c);
    return hbar * w * k * k / (2.0 * kPi * kPi) / std::expm1(hbar * w / (kb * T));
  };
  const int n = 20000;
  const double h = (band.omega_hi - band.omega_lo) / n;
  double s = f(band.omega_lo) + f(band.omega_hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(band.omega_lo + i * h);
  return deg * s * h / 3.0 / (4.0 * kPi);
}

// Slot of direction d and band b in a cell's I block.
std::size_t slot(const FieldStore& s, int cell, int d, int b) {
  const std::array<int, 2> idx{d, b};
  return s.layout().offset(s.layout().id("I"), cell, idx);
}

}  // namespace

TEST(Directions, EightDirectionReflections) {
  const DirectionSet s = build_directions(8);
  EXPECT_EQ(s.count, 8);
  EXPECT_EQ(s.reflect_x[0], 3);
  EXPECT_EQ(s.reflect_y[0], 7);
  EXPECT_NEAR(s.sx[0], std::cos(kPi / 8), 1e-15);
  EXPECT_NEAR(s.sy[0], std::sin(kPi / 8), 1e-15);
  EXPECT_EQ(s.reflect(0, {1.0, 0.0}), 3);
  EXPECT_EQ(s.reflect(0, {0.0, -1.0}), 7);
  EXPECT_THROW((void)s.reflect(0, {0.6, 0.8}), ValidationError);
}

TEST(Directions, QuadratureMomentsClose) {
  const DirectionSet s = build_directions(4);
  double sx = 0, sy = 0, sxx = 0;
  for (int d = 0; d < 4; ++d) {
    sx += s.weight[d] * s.sx[d];
    sy += s.weight[d] * s.sy[d];
    sxx += s.weight[d] * s.sx[d] * s.sx[d];
  }
  EXPECT_EQ(sx, 0.0);
  EXPECT_EQ(sy, 0.0);
  EXPECT_NEAR(sxx, kPi, 1e-14);
  EXPECT_NEAR(s.total_weight(), 2.0 * kPi, 1e-14);
}

TEST(Directions, TwentyDirectionWeights) {
  const DirectionSet s = build_directions(20);
  for (double w : s.weight) EXPECT_NEAR(w, kPi / 10, 1e-16);
  for (int d = 0; d < 20; ++d) {
    const double theta = 2.0 * kPi * (d + 0.5) / 20;
    EXPECT_NEAR(s.sx[d], std::cos(theta), 1e-15);
    EXPECT_NEAR(s.sy[d], std::sin(theta), 1e-15);
  }
}

// Reflections are involutions that land exactly on the mirrored vector.
TEST(Directions, ReflectionProperties) {
  for (int n = 4; n <= 64; n += 4) {
    const DirectionSet s = build_directions(n);
    for (int d = 0; d < n; ++d) {
      EXPECT_EQ(s.reflect_x[s.reflect_x[d]], d);
      EXPECT_EQ(s.reflect_y[s.reflect_y[d]], d);
      EXPECT_EQ(s.sx[s.reflect_x[d]], -s.sx[d]);
      EXPECT_EQ(s.sy[s.reflect_x[d]], s.sy[d]);
      EXPECT_EQ(s.sx[s.reflect_y[d]], s.sx[d]);
      EXPECT_EQ(s.sy[s.reflect_y[d]], -s.sy[d]);
    }
  }
}

TEST(Directions, RejectsCountsWithoutReflectionClosure) {
  EXPECT_THROW((void)build_directions(6), ValidationError);
  EXPECT_THROW((void)build_directions(2), ValidationError);
  EXPECT_THROW((void)build_directions(0), ValidationError);
}

TEST(Bands, TransverseCountRule) {
  EXPECT_EQ(40 + transverse_band_count(40), 55);
  EXPECT_EQ(8 + transverse_band_count(8), 11);
  EXPECT_EQ(3 + transverse_band_count(3), 5);
  EXPECT_EQ(1 + transverse_band_count(1), 1);
  EXPECT_THROW((void)transverse_band_count(0), ValidationError);
}

TEST(Bands, GeneratedTablePassesTheRule) {
  const Material m = generate_material_table(40);
  EXPECT_EQ(m.num_bands(), 55);
  EXPECT_NO_THROW((void)build_bands(40, m));
  EXPECT_THROW((void)build_bands(8, m), ValidationError);
  for (const Band& b : m.bands()) {
    EXPECT_GT(b.vg, 0.0);
    EXPECT_GE(b.tau, 1e-11);
    EXPECT_LE(b.tau, 1e-8);
    EXPECT_GT(b.slope, 0.0);
  }
}

TEST(Bands, PolarizationMismatchIsRejected) {
  std::vector<Band> bands(5, linear_band(1.0, 1.0));
  EXPECT_THROW((void)build_bands(3, Material(MaterialMode::Linear, 300, bands)), ValidationError);
  for (int b = 3; b < 5; ++b) bands[b].polarization = Polarization::Transverse;
  EXPECT_NO_THROW((void)build_bands(3, Material(MaterialMode::Linear, 300, bands)));
}

TEST(Bands, TableRoundTrip) {
  const Material m = generate_material_table(8, 310.0);
  const auto path = std::filesystem::temp_directory_path() / "bteflow_bands.txt";
  write_material_table(m, path.string());
  const Material r = read_material_table(path.string(), MaterialMode::Quadrature);
  std::filesystem::remove(path);
  EXPECT_EQ(r.T_ref(), 310.0);
  ASSERT_EQ(r.num_bands(), m.num_bands());
  for (int b = 0; b < m.num_bands(); ++b) {
    EXPECT_EQ(r.band(b).vg, m.band(b).vg);
    EXPECT_EQ(r.band(b).tau, m.band(b).tau);
    EXPECT_EQ(r.band(b).slope, m.band(b).slope);
    EXPECT_EQ(r.band(b).I_ref, m.band(b).I_ref);
    EXPECT_EQ(r.band(b).omega_hi, m.band(b).omega_hi);
    EXPECT_EQ(r.band(b).polarization, m.band(b).polarization);
  }
}

TEST(Bands, InvalidRowsAreRejected) {
  EXPECT_THROW(Material(MaterialMode::Linear, 300, {linear_band(1.0, 1.0, -1.0)}), ValidationError);
  EXPECT_THROW(Material(MaterialMode::Linear, 300, {linear_band(0.0, 1.0)}), ValidationError);
  EXPECT_THROW(Material(MaterialMode::Quadrature, 300, {linear_band(1.0, 1.0)}), ValidationError);
  EXPECT_THROW((void)read_material_table("/nonexistent/bands.txt", MaterialMode::Linear),
               ValidationError);
}

TEST(Equilibrium, LinearModel) {
  const Material m(MaterialMode::Linear, 300.0, {linear_band(2.0, 10.0)});
  EXPECT_EQ(m.equilibrium_intensity(300.0, 0), 10.0);
  EXPECT_EQ(m.equilibrium_intensity(310.0, 0), 30.0);
  EXPECT_EQ(m.equilibrium_slope(123.0, 0), 2.0);
}

TEST(Equilibrium, QuadratureMatchesSimpsonOracle) {
  const Material m = generate_material_table(8).with_mode(MaterialMode::Quadrature);
  for (double T : {50.0, 300.0, 900.0})
    for (int b = 0; b < m.num_bands(); ++b) {
      const double oracle = simpson_intensity(m.band(b), T);
      EXPECT_NEAR(m.equilibrium_intensity(T, b), oracle, 1e-6 * oracle) << "band " << b << " T " << T;
    }
}

TEST(Equilibrium, QuadratureIsMonotoneWithConsistentSlope) {
  const Material m = generate_material_table(3).with_mode(MaterialMode::Quadrature);
  for (int b = 0; b < m.num_bands(); ++b) {
    double prev = 0.0;
    for (double T = 20.0; T <= 1000.0; T += 20.0) {
      const double I = m.equilibrium_intensity(T, b);
      EXPECT_GT(I, prev);
      prev = I;
      const double h = 1e-5 * T;
      const double fd = (m.equilibrium_intensity(T + h, b) - m.equilibrium_intensity(T - h, b)) / (2 * h);
      EXPECT_NEAR(m.equilibrium_slope(T, b), fd, 1e-6 * fd);
    }
  }
}

TEST(Equilibrium, LinearTableAgreesWithQuadratureAtReference) {
  const Material lin = generate_material_table(3, 300.0);
  const Material quad = lin.with_mode(MaterialMode::Quadrature);
  for (int b = 0; b < lin.num_bands(); ++b) {
    EXPECT_DOUBLE_EQ(lin.equilibrium_intensity(300.0, b), quad.equilibrium_intensity(300.0, b));
    EXPECT_DOUBLE_EQ(lin.equilibrium_slope(300.0, b), quad.equilibrium_slope(300.0, b));
  }
}

// Linear mode has a closed-form inverse.
TEST(TemperatureSolve, LinearClosedForm) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Band> bands;
    std::vector<double> c;
    for (int b = 0; b < 5; ++b) {
      bands.push_back(linear_band(u(rng), 10.0 * u(rng)));
      c.push_back(u(rng));
    }
    const Material m(MaterialMode::Linear, 300.0, bands);
    const double W = 2.0 * kPi;
    const double T_true = 250.0 + 100.0 * u(rng);
    double rhs = 0.0, num = 0.0, den = 0.0;
    for (int b = 0; b < 5; ++b) {
      rhs += c[b] * W * m.equilibrium_intensity(T_true, b);
      num += c[b] * W * bands[b].I_ref;
      den += c[b] * W * bands[b].slope;
    }
    const double closed = 300.0 + (rhs - num) / den;
    const TemperatureSolve s = solve_temperature(m, c, W, rhs, 300.0);
    ASSERT_TRUE(s.converged);
    EXPECT_NEAR(s.T, closed, 1e-12 * closed);
  }
}

TEST(TemperatureSolve, EquilibriumNeedsNoIteration) {
  const Material m = generate_material_table(3).with_mode(MaterialMode::Quadrature);
  const std::vector<double> c = temperature_weights(m, TemperatureWeighting::Energy);
  double rhs = 0.0;
  for (int b = 0; b < m.num_bands(); ++b) rhs += c[b] * (2.0 * kPi * m.equilibrium_intensity(310.0, b));
  const TemperatureSolve s = solve_temperature(m, c, 2.0 * kPi, rhs, 310.0);
  EXPECT_TRUE(s.converged);
  EXPECT_EQ(s.iterations, 0);
  EXPECT_EQ(s.T, 310.0);
}

TEST(TemperatureSolve, QuadratureRecoversTemperature) {
  const Material m = generate_material_table(8).with_mode(MaterialMode::Quadrature);
  const std::vector<double> c = temperature_weights(m, TemperatureWeighting::Relaxation);
  for (double T : {5.0, 77.0, 300.0, 1500.0}) {
    double rhs = 0.0;
    for (int b = 0; b < m.num_bands(); ++b) rhs += c[b] * (2.0 * kPi * m.equilibrium_intensity(T, b));
    const TemperatureSolve s = solve_temperature(m, c, 2.0 * kPi, rhs, 300.0);
    ASSERT_TRUE(s.converged) << T;
    EXPECT_NEAR(s.T, T, 1e-9 * T);
  }
}

TEST(TemperatureSolve, WeightingsDiffer) {
  const Material m = generate_material_table(3);
  const auto e = temperature_weights(m, TemperatureWeighting::Energy);
  const auto r = temperature_weights(m, TemperatureWeighting::Relaxation);
  for (int b = 0; b < m.num_bands(); ++b) {
    EXPECT_DOUBLE_EQ(r[b], 1.0 / m.band(b).tau);
    EXPECT_DOUBLE_EQ(e[b], r[b] / m.band(b).vg);
  }
}

TEST(WallTemperature, GaussianProfile) {
  EXPECT_EQ(gaussian_wall_temperature(0.0, 300, 350, 1e-5), 350.0);
  EXPECT_NEAR(gaussian_wall_temperature(1e-5, 300, 350, 1e-5), 300 + 50 * std::exp(-2.0), 1e-12);
  EXPECT_EQ(gaussian_wall_temperature(-3e-6, 300, 350, 1e-5),
            gaussian_wall_temperature(3e-6, 300, 350, 1e-5));
  EXPECT_NEAR(gaussian_wall_temperature(1.0, 300, 350, 1e-5), 300.0, 1e-12);
}

TEST(TimeStep, DefaultStepIsStable) {
  for (int n : {8, 32, 120}) {
    const auto p = build_pipeline(bte_scenario(n, 8, 3, 1));
    const double dt = default_time_step(*p->mesh, *p->physics);
    EXPECT_EQ(p->dt, dt);
    EXPECT_LE(cfl_number(*p->mesh, *p->physics, dt), 0.9);
    double tau_min = 1.0;
    for (const Band& b : p->physics->material.bands()) tau_min = std::min(tau_min, b.tau);
    EXPECT_LE(dt, tau_min);
  }
}

TEST(TemperatureHook, NonFiniteIntensityThrows) {
  const auto p = build_pipeline(bte_scenario(4, 8, 3, 1));
  FieldStore s = initial_state(*p);
  s.field("I")[slot(s, 5, 2, 1)] = std::nan("");
  const std::vector<int> cells{5};
  EXPECT_THROW(p->sim.hooks[0]->apply(s, cells), RuntimeFailure);
}

// Relaxation weighting makes the relaxation source sum to zero in every cell.
TEST(TemperatureHook, RelaxationSourceIsNeutral) {
  ScenarioConfig c = bte_scenario(4, 8, 3, 1);
  c.hooks[0].options["weighting"] = "relaxation";
  const auto p = build_pipeline(c);
  FieldStore s = initial_state(*p);
  std::mt19937 rng(5);
  const Material& m = p->physics->material;
  std::uniform_real_distribution<double> T(280.0, 330.0);
  const int nd = 8, nb = m.num_bands();
  for (int cell = 0; cell < 16; ++cell)
    for (int d = 0; d < nd; ++d)
      for (int b = 0; b < nb; ++b) s.field("I")[slot(s, cell, d, b)] = m.equilibrium_intensity(T(rng), b);
  std::vector<int> cells(16);
  std::iota(cells.begin(), cells.end(), 0);
  p->sim.hooks[0]->apply(s, cells);
  const auto& w = p->physics->directions.weight;
  for (int cell = 0; cell < 16; ++cell) {
    double net = 0.0, scale = 0.0;
    for (int b = 0; b < nb; ++b)
      for (int d = 0; d < nd; ++d) {
        const double I0 = s.field("Io")[cell * nb + b];
        const double I = s.field("I")[slot(s, cell, d, b)];
        net += w[d] * (I0 - I) / m.band(b).tau;
        scale += w[d] * std::abs(I) / m.band(b).tau;
      }
    EXPECT_LE(std::abs(net), 1e-12 * scale) << "cell " << cell;
  }
}

TEST(BoundaryConditions, HotWallHeatsOnlyAdjacentCells) {
  ScenarioConfig c = hot_scenario(6, 8, 3, 1);
  const auto p = build_pipeline(c);
  const RunResult r = run_simulation(p->sim, initial_state(*p), p->config.backend, 1);
  ASSERT_EQ(r.status, RunStatus::Completed);
  const auto T = r.state.field("T");
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 6; ++i) {
      const double t = T[j * 6 + i];
      if (j == 5) EXPECT_GT(t, 300.0 + 1e-9) << i;  // top wall is the hot one
      else EXPECT_NEAR(t, 300.0, 300.0 * 1e-12) << i << "," << j;
    }
}

TEST(BoundaryConditions, IsothermalWallsAtBodyTemperatureKeepEquilibrium) {
  const auto p = build_pipeline(bte_scenario(5, 8, 3, 20, 300.0));
  const FieldStore init = initial_state(*p);
  const RunResult r = run_simulation(p->sim, init, p->config.backend, 20);
  EXPECT_LE(bteflow::testing::max_pointwise_rel(init.field("I"), r.state.field("I")), 1e-14);
}

// Intensities stay between the cold and hottest equilibrium values per band.
TEST(BoundaryConditions, IntensityStaysWithinWallBounds) {
  const auto p = build_pipeline(hot_scenario(10, 8, 3, 60));
  const RunResult r = run_simulation(p->sim, initial_state(*p), p->config.backend, 60);
  ASSERT_EQ(r.status, RunStatus::Completed);
  const Material& m = p->physics->material;
  const FieldStore& s = r.state;
  for (int cell = 0; cell < 100; ++cell)
    for (int d = 0; d < 8; ++d)
      for (int b = 0; b < m.num_bands(); ++b) {
        const double I = s.field("I")[slot(s, cell, d, b)];
        EXPECT_GE(I, m.equilibrium_intensity(300.0, b) * (1 - 1e-13));
        EXPECT_LE(I, m.equilibrium_intensity(350.0, b) * (1 + 1e-13));
      }
}

TEST(BoundaryConditions, SymmetricWallReflectsIntensity) {
  // Closed box stays closed: symmetric walls pass no energy.
  ScenarioConfig c = bteflow::testing::closed_box(5, 30);
  const auto p = build_pipeline(c);
  const FieldStore init = initial_state(*p);
  const double e0 = total_energy(init, "I", *p->entities, *p->physics, *p->mesh);
  const RunResult r = run_simulation(p->sim, init, p->config.backend, 30);
  const double e1 = total_energy(r.state, "I", *p->entities, *p->physics, *p->mesh);
  EXPECT_NEAR(e1, e0, 1e-12 * e0);
}

// Hot spots mirrored about the wall center give mirrored fields.
TEST(Symmetry, MirroredHotSpotGivesMirroredFields) {
  const int n = 12;
  ScenarioConfig left = hot_scenario(n, 8, 3, 40);
  left.scenario.width = 0.15 * left.mesh.Lx;
  ScenarioConfig right = left;
  const double delta = 0.17 * left.mesh.Lx;
  left.center = 0.5 * left.mesh.Lx - delta;
  right.center = 0.5 * right.mesh.Lx + delta;
  const auto pl = build_pipeline(left);
  const auto pr = build_pipeline(right);
  const RunResult a = run_simulation(pl->sim, initial_state(*pl), pl->config.backend, 40);
  const RunResult b = run_simulation(pr->sim, initial_state(*pr), pr->config.backend, 40);
  const DirectionSet& dirs = pl->physics->directions;
  const int nb = pl->physics->material.num_bands();
  double worst = 0.0, scale = 0.0, worst_T = 0.0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int c = j * n + i, mc = j * n + (n - 1 - i);
      worst_T = std::max(worst_T, std::abs(a.state.field("T")[c] - b.state.field("T")[mc]) / 300.0);
      for (int d = 0; d < 8; ++d)
        for (int band = 0; band < nb; ++band) {
          const double x = a.state.field("I")[slot(a.state, c, d, band)];
          const double y = b.state.field("I")[slot(b.state, mc, dirs.reflect_x[d], band)];
          worst = std::max(worst, std::abs(x - y));
          scale = std::max(scale, std::abs(x));
        }
    }
  EXPECT_LE(worst / scale, 1e-13);
  EXPECT_LE(worst_T, 1e-13);
}

TEST(Energy, DensityMatchesDefinition) {
  const auto p = build_pipeline(bte_scenario(3, 8, 3, 1));
  const FieldStore s = initial_state(*p);
  const auto e = energy_density(s, "I", *p->entities, *p->physics);
  const Material& m = p->physics->material;
  double expect = 0.0;
  for (int b = 0; b < m.num_bands(); ++b)
    expect += 2.0 * kPi * m.equilibrium_intensity(300.0, b) / m.band(b).vg;
  for (double v : e) EXPECT_NEAR(v, expect, 1e-13 * expect);
}

TEST(Providers, ValuesComeFromPhysics) {
  const auto p = build_pipeline(bte_scenario(3, 8, 3, 1));
  EXPECT_EQ(provider_values("directions.x", *p->physics), p->physics->directions.sx);
  EXPECT_EQ(provider_values("bands.vg", *p->physics).size(), 5u);
  EXPECT_THROW((void)provider_values("bands.color", *p->physics), Error);
}
