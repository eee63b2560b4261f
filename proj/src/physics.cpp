#include "bteflow/physics.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "bteflow/error.hpp"

namespace bteflow {

namespace {

constexpr double kHbar = 1.054571817e-34;
constexpr double kBoltzmann = 1.380649e-23;
constexpr double kLattice = 5.43e-10;

struct Dispersion {
  double vs;  // sound speed
  double c;   // quadratic coefficient (negative)
  int degeneracy;
};

constexpr Dispersion kLongitudinal{9.01e3, -2.0e-7, 1};
constexpr Dispersion kTransverse{5.23e3, -2.26e-7, 2};

const Dispersion& dispersion(Polarization p) {
  return p == Polarization::Longitudinal ? kLongitudinal : kTransverse;
}

double max_wavenumber() { return 2.0 * std::numbers::pi / kLattice; }

double max_frequency(const Dispersion& d) {
  const double k = std::min(max_wavenumber(), -d.vs / (2.0 * d.c));
  return d.vs * k + d.c * k * k;
}

double wavenumber(const Dispersion& d, double omega) {
  const double disc = d.vs * d.vs + 4.0 * d.c * omega;
  if (disc <= 0.0) return -d.vs / (2.0 * d.c);
  return (-d.vs + std::sqrt(disc)) / (2.0 * d.c);
}

double group_speed(const Dispersion& d, double omega) {
  return d.vs + 2.0 * d.c * wavenumber(d, omega);
}

// (1/4π) ∫ ħω · k²/(2π²) · f(ω, T) dω over the band, times the branch degeneracy.
template <class Weight>
double band_integral(const Band& band, double T, Weight&& weight) {
  const Dispersion& d = dispersion(band.polarization);
  auto integrand = [&](double omega) {
    const double k = wavenumber(d, omega);
    const double x = kHbar * omega / (kBoltzmann * T);
    return kHbar * omega * k * k / (2.0 * std::numbers::pi * std::numbers::pi) * weight(x);
  };
  const double value =
      boost::math::quadrature::gauss<double, 16>::integrate(integrand, band.omega_lo, band.omega_hi);
  return d.degeneracy * value / (4.0 * std::numbers::pi);
}

double quadrature_intensity(const Band& band, double T) {
  return band_integral(band, T, [](double x) { return 1.0 / std::expm1(x); });
}

double quadrature_slope(const Band& band, double T) {
  return band_integral(band, T, [T](double x) {
    const double em1 = std::expm1(x);
    return x / T * (em1 + 1.0) / (em1 * em1);
  });
}

Polarization parse_polarization(const std::string& s) {
  if (s == "L" || s == "longitudinal" || s == "LA") return Polarization::Longitudinal;
  if (s == "T" || s == "transverse" || s == "TA") return Polarization::Transverse;
  throw ParseError("unknown polarization '" + s + "'");
}

}  // namespace

double DirectionSet::total_weight() const {
  double s = 0.0;
  for (double w : weight) s += w;
  return s;
}

int DirectionSet::reflect(int d, Vec2 normal) const {
  if (normal.y == 0.0 && std::abs(normal.x) == 1.0) return reflect_x[d];
  if (normal.x == 0.0 && std::abs(normal.y) == 1.0) return reflect_y[d];
  throw ValidationError("reflection needs an axis-aligned wall normal");
}

DirectionSet build_directions(int n) {
  if (n < 4 || n % 4 != 0)
    throw ValidationError("reflection closure fails: " + std::to_string(n) +
                          " directions is not a positive multiple of 4");
  DirectionSet s;
  s.count = n;
  s.sx.assign(n, 0.0);
  s.sy.assign(n, 0.0);
  s.weight.assign(n, 2.0 * std::numbers::pi / n);
  const int q = n / 4;
  for (int k = 0; k < q; ++k) {
    const double theta = 2.0 * std::numbers::pi * (k + 0.5) / n;
    const double c = std::cos(theta);
    const double sn = std::sin(theta);
    const int d1 = k, d2 = n / 2 - 1 - k, d3 = n / 2 + k, d4 = n - 1 - k;
    s.sx[d1] = c, s.sy[d1] = sn;
    s.sx[d2] = -c, s.sy[d2] = sn;
    s.sx[d3] = -c, s.sy[d3] = -sn;
    s.sx[d4] = c, s.sy[d4] = -sn;
  }
  s.reflect_x.resize(n);
  s.reflect_y.resize(n);
  for (int d = 0; d < n; ++d) {
    s.reflect_x[d] = ((n / 2 - 1 - d) % n + n) % n;
    s.reflect_y[d] = n - 1 - d;
  }
  for (int d = 0; d < n; ++d) {
    const int rx = s.reflect_x[d], ry = s.reflect_y[d];
    if (s.sx[rx] != -s.sx[d] || s.sy[rx] != s.sy[d] || s.sx[ry] != s.sx[d] ||
        s.sy[ry] != -s.sy[d])
      throw ValidationError("reflection table does not land on quadrature directions");
  }
  return s;
}

Material::Material(MaterialMode mode, double T_ref, std::vector<Band> bands)
    : mode_(mode), T_ref_(T_ref), bands_(std::move(bands)) {
  for (std::size_t b = 0; b < bands_.size(); ++b) {
    const Band& band = bands_[b];
    const std::string where = "material band " + std::to_string(b + 1);
    if (!(band.vg > 0.0)) throw ValidationError(where + ": group speed must be positive");
    if (!(band.tau > 0.0)) throw ValidationError(where + ": relaxation time must be positive");
    if (mode_ == MaterialMode::Linear && !(band.slope > 0.0))
      throw ValidationError(where + ": slope a_b must be positive");
    if (mode_ == MaterialMode::Quadrature && !(band.omega_hi > band.omega_lo))
      throw ValidationError(where + ": quadrature mode needs omega_lo < omega_hi");
  }
}

double Material::equilibrium_intensity(double T, int b) const {
  const Band& band = bands_.at(b);
  if (mode_ == MaterialMode::Linear) return band.I_ref + band.slope * (T - T_ref_);
  return quadrature_intensity(band, T);
}

double Material::equilibrium_slope(double T, int b) const {
  const Band& band = bands_.at(b);
  if (mode_ == MaterialMode::Linear) return band.slope;
  return quadrature_slope(band, T);
}

Material Material::with_mode(MaterialMode mode) const { return Material(mode, T_ref_, bands_); }

int transverse_band_count(int n_freq) {
  if (n_freq < 1) throw ValidationError("n_freq must be at least 1");
  if (n_freq == 1) return 0;
  return (3 * n_freq + 7) / 8;
}

Material read_material_table(const std::string& path, MaterialMode mode) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open material table '" + path + "'");
  std::vector<Band> bands;
  double T_ref = 300.0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (first == "tref") {
      if (!(ls >> T_ref)) throw ParseError(where + ": malformed tref line");
      continue;
    }
    int index = 0;
    try {
      index = std::stoi(first);
    } catch (const std::exception&) {
      throw ParseError(where + ": expected a band number, got '" + first + "'");
    }
    if (index != static_cast<int>(bands.size()) + 1)
      throw ParseError(where + ": band rows must be numbered 1, 2, ... in order");
    Band band;
    std::string pol;
    if (!(ls >> pol >> band.vg >> band.tau >> band.slope >> band.I_ref))
      throw ParseError(where + ": expected 'band polarization vg tau a_b I_ref'");
    band.polarization = parse_polarization(pol);
    if (ls >> band.omega_lo) {
      if (!(ls >> band.omega_hi)) throw ParseError(where + ": omega_lo without omega_hi");
    }
    bands.push_back(band);
  }
  if (bands.empty()) throw ValidationError("material table '" + path + "' has no band rows");
  return Material(mode, T_ref, std::move(bands));
}

void write_material_table(const Material& material, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write material table '" + path + "'");
  out << "# band polarization vg tau a_b I_ref omega_lo omega_hi\n";
  out << std::setprecision(17) << "tref " << material.T_ref() << '\n';
  for (int b = 0; b < material.num_bands(); ++b) {
    const Band& band = material.band(b);
    out << b + 1 << ' ' << (band.polarization == Polarization::Longitudinal ? 'L' : 'T') << ' '
        << band.vg << ' ' << band.tau << ' ' << band.slope << ' ' << band.I_ref << ' '
        << band.omega_lo << ' ' << band.omega_hi << '\n';
  }
}

Material generate_material_table(int n_freq, double T_ref) {
  const int n_trans = transverse_band_count(n_freq);
  const double w_la = max_frequency(kLongitudinal);
  const double w_ta = max_frequency(kTransverse);
  const double width = w_la / n_freq;
  std::vector<Band> bands;
  auto make = [&](Polarization p, double lo, double hi) {
    Band band;
    band.polarization = p;
    band.omega_lo = lo;
    band.omega_hi = hi;
    const double center = 0.5 * (lo + hi);
    band.vg = group_speed(dispersion(p), center);
    const double ratio = 1e13 / center;
    band.tau = std::clamp(5e-10 * ratio * ratio, 1e-11, 1e-8);
    band.I_ref = quadrature_intensity(band, T_ref);
    band.slope = quadrature_slope(band, T_ref);
    bands.push_back(band);
  };
  for (int i = 0; i < n_freq; ++i)
    make(Polarization::Longitudinal, i * width, (i + 1) * width);
  for (int j = 0; j < n_trans; ++j)
    make(Polarization::Transverse, j * width, std::min((j + 1) * width, w_ta));
  return Material(MaterialMode::Linear, T_ref, std::move(bands));
}

Material build_bands(int n_freq, const Material& table) {
  const int n_trans = transverse_band_count(n_freq);
  const int expected = n_freq + n_trans;
  if (table.num_bands() != expected)
    throw ValidationError("material table has " + std::to_string(table.num_bands()) +
                          " band rows; n_freq=" + std::to_string(n_freq) + " needs " +
                          std::to_string(expected) + " (" + std::to_string(n_freq) +
                          " longitudinal + " + std::to_string(n_trans) + " transverse)");
  for (int b = 0; b < expected; ++b) {
    const Polarization want = b < n_freq ? Polarization::Longitudinal : Polarization::Transverse;
    if (table.band(b).polarization != want)
      throw ValidationError("material band " + std::to_string(b + 1) + " should be " +
                            (want == Polarization::Longitudinal ? "longitudinal" : "transverse"));
  }
  return table;
}

double gaussian_wall_temperature(double s, double T_cold, double T_peak, double width) {
  return T_cold + (T_peak - T_cold) * std::exp(-2.0 * s * s / (width * width));
}

std::vector<double> temperature_weights(const Material& material, TemperatureWeighting weighting) {
  std::vector<double> c;
  for (const Band& band : material.bands())
    c.push_back(weighting == TemperatureWeighting::Energy ? 1.0 / (band.vg * band.tau)
                                                          : 1.0 / band.tau);
  return c;
}

TemperatureSolve solve_temperature(const Material& material, const std::vector<double>& c,
                                   double W, double rhs, double T_guess) {
  const int nb = material.num_bands();
  auto F = [&](double T) {
    double s = 0.0;
    for (int b = 0; b < nb; ++b) s += c[b] * (W * material.equilibrium_intensity(T, b));
    return s - rhs;
  };
  auto dF = [&](double T) {
    double s = 0.0;
    for (int b = 0; b < nb; ++b) s += c[b] * (W * material.equilibrium_slope(T, b));
    return s;
  };
  const double inf = std::numeric_limits<double>::infinity();
  double lo = material.mode() == MaterialMode::Quadrature ? 0.0 : -inf;
  double hi = inf;
  const double tol = 1e-12 * std::abs(rhs);
  TemperatureSolve out;
  double T = T_guess;
  for (int it = 0; it <= 50; ++it) {
    const double f = F(T);
    out.T = T;
    out.iterations = it;
    out.residual = f;
    if (!std::isfinite(f)) return out;
    if (std::abs(f) <= tol) {
      out.converged = true;
      return out;
    }
    if (it == 50) break;
    if (f > 0) hi = std::min(hi, T);
    else lo = std::max(lo, T);
    const double slope = dF(T);
    double next = T - f / slope;
    if (!std::isfinite(next) || !(slope > 0.0) || next <= lo || next >= hi) {
      if (std::isfinite(lo) && std::isfinite(hi)) next = 0.5 * (lo + hi);
      else if (!std::isfinite(hi)) next = T + std::max(std::abs(T), 1.0);
      else next = std::isfinite(lo) ? 0.5 * (lo + T) : T - std::max(std::abs(T), 1.0);
    }
    T = next;
  }
  return out;
}

double default_time_step(const Mesh& mesh, const Physics& physics) {
  const auto [dx, dy] = mesh.min_spacing();
  double vmax = 0.0;
  double tau_min = std::numeric_limits<double>::infinity();
  for (const Band& b : physics.material.bands()) {
    vmax = std::max(vmax, b.vg);
    tau_min = std::min(tau_min, b.tau);
  }
  double smax = 0.0;
  for (int d = 0; d < physics.directions.count; ++d)
    smax = std::max(smax, std::abs(physics.directions.sx[d]) / dx +
                              std::abs(physics.directions.sy[d]) / dy);
  return std::min(0.9 / (vmax * smax), tau_min);
}

double cfl_number(const Mesh& mesh, const Physics& physics, double dt) {
  const auto [dx, dy] = mesh.min_spacing();
  double vmax = 0.0;
  for (const Band& b : physics.material.bands()) vmax = std::max(vmax, b.vg);
  return vmax * dt / std::min(dx, dy);
}

namespace {

struct IntensityAccess {
  int field = -1;
  std::size_t cell_stride = 0;
  std::size_t d_stride = 0;
  std::size_t b_stride = 0;
  int nd = 0;
  int nb = 0;
};

IntensityAccess intensity_access(const FieldLayout& layout, const std::string& name,
                                 const EntityTable& entities) {
  IntensityAccess a;
  a.field = layout.id(name);
  const FieldInfo& f = layout.info(a.field);
  if (!f.per_cell || f.indices.size() != 2)
    throw ValidationError("'" + name + "' must be a cell variable indexed by direction and band");
  for (std::size_t k = 0; k < 2; ++k) {
    const EntityDecl& idx = entities.at(f.indices[k]);
    if (idx.role == IndexRole::Direction) {
      a.d_stride = f.index_strides[k];
      a.nd = f.extents[k];
    } else if (idx.role == IndexRole::Band) {
      a.b_stride = f.index_strides[k];
      a.nb = f.extents[k];
    }
  }
  if (a.nd == 0 || a.nb == 0)
    throw ValidationError("'" + name + "' needs one direction index and one band index");
  a.cell_stride = f.per_cell_size;
  return a;
}

void check_counts(const IntensityAccess& a, const Physics& physics) {
  if (a.nd != physics.directions.count)
    throw ValidationError("direction index has " + std::to_string(a.nd) +
                          " values but the quadrature has " +
                          std::to_string(physics.directions.count));
  if (a.nb != physics.material.num_bands())
    throw ValidationError("band index has " + std::to_string(a.nb) +
                          " values but the material table has " +
                          std::to_string(physics.material.num_bands()) + " bands");
}

struct BandField {
  int field = -1;
  std::size_t cell_stride = 0;
  std::size_t b_stride = 0;
};

BandField band_field(const FieldLayout& layout, const std::string& name, int nb) {
  BandField bf;
  bf.field = layout.id(name);
  const FieldInfo& f = layout.info(bf.field);
  if (!f.per_cell || f.indices.size() != 1 || f.extents[0] != nb)
    throw ValidationError("'" + name + "' must be a cell variable indexed by band");
  bf.cell_stride = f.per_cell_size;
  bf.b_stride = f.index_strides[0];
  return bf;
}

class TemperatureHook final : public PostStepHook {
 public:
  TemperatureHook(HookDecl decl, const BindContext& ctx, std::shared_ptr<const Physics> physics)
      : PostStepHook(std::move(decl)), physics_(std::move(physics)) {
    const HookDecl& d = this->decl();
    if (d.reads.size() != 1 || d.writes.size() != 3)
      throw ValidationError(
          "temperature_update declares reads=<intensity> writes=<T>,<Io>,<beta>");
    I_ = intensity_access(*ctx.layout, d.reads[0], *ctx.entities);
    check_counts(I_, *physics_);
    T_ = ctx.layout->id(d.writes[0]);
    if (ctx.layout->info(T_).per_cell_size != 1 || !ctx.layout->info(T_).per_cell)
      throw ValidationError("'" + d.writes[0] + "' must be a scalar cell variable");
    Io_ = band_field(*ctx.layout, d.writes[1], I_.nb);
    beta_ = band_field(*ctx.layout, d.writes[2], I_.nb);
    TemperatureWeighting w = TemperatureWeighting::Energy;
    if (auto it = d.options.find("weighting"); it != d.options.end()) {
      if (it->second == "relaxation") w = TemperatureWeighting::Relaxation;
      else if (it->second != "energy")
        throw ValidationError("temperature_update: weighting must be energy or relaxation");
    }
    c_ = temperature_weights(physics_->material, w);
    W_ = physics_->directions.total_weight();
  }

  void apply(FieldStore& state, std::span<const int> cells) const override {
    const int nb = I_.nb;
    std::vector<double> contrib(cells.size() * static_cast<std::size_t>(nb));
    band_contributions(state, cells, 1, nb, contrib.data());
    std::vector<double> reduced(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i)
      reduced[i] = sum_bands(contrib.data() + i * nb, nb);
    finish_cells(state, cells, reduced.data());
    refresh_bands(state, cells, 1, nb);
  }

  bool band_reducible() const override { return true; }
  int band_count() const override { return I_.nb; }

  void band_contributions(const FieldStore& state, std::span<const int> cells, int b_lo, int b_hi,
                          double* out) const override {
    const std::span<const double> I = state.field(I_.field);
    const std::vector<double>& w = physics_->directions.weight;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::size_t base = static_cast<std::size_t>(cells[i]) * I_.cell_stride;
      for (int b = b_lo; b <= b_hi; ++b) {
        double s = 0.0;
        for (int d = 0; d < I_.nd; ++d)
          s += w[d] * I[base + d * I_.d_stride + (b - 1) * I_.b_stride];
        if (!std::isfinite(s))
          throw RuntimeFailure("temperature_update: non-finite intensity in cell " +
                               std::to_string(cells[i]));
        out[i * I_.nb + (b - 1)] = c_[b - 1] * s;
      }
    }
  }

  void finish_cells(FieldStore& state, std::span<const int> cells,
                    const double* reduced) const override {
    std::span<double> T = state.field(T_);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const int c = cells[i];
      const double guess = std::isfinite(T[c]) && T[c] > 0.0 ? T[c] : physics_->material.T_ref();
      const TemperatureSolve sol = solve_temperature(physics_->material, c_, W_, reduced[i], guess);
      if (!sol.converged) {
        std::ostringstream os;
        os << "temperature_update did not converge in cell " << c << " (residual "
           << sol.residual << " after " << sol.iterations << " iterations)";
        throw RuntimeFailure(os.str());
      }
      T[c] = sol.T;
    }
  }

  void refresh_bands(FieldStore& state, std::span<const int> cells, int b_lo,
                     int b_hi) const override {
    std::span<const double> T = state.field(T_);
    std::span<double> Io = state.field(Io_.field);
    std::span<double> beta = state.field(beta_.field);
    for (int c : cells)
      for (int b = b_lo; b <= b_hi; ++b) {
        Io[c * Io_.cell_stride + (b - 1) * Io_.b_stride] =
            physics_->material.equilibrium_intensity(T[c], b - 1);
        beta[c * beta_.cell_stride + (b - 1) * beta_.b_stride] =
            1.0 / physics_->material.band(b - 1).tau;
      }
  }

 private:
  std::shared_ptr<const Physics> physics_;
  IntensityAccess I_;
  int T_ = -1;
  BandField Io_;
  BandField beta_;
  std::vector<double> c_;
  double W_ = 0.0;
};

struct WallBinding {
  SlotLoad I;
  SlotLoad vg;
  SlotLoad sx;
  SlotLoad sy;
  int b_slot = 0;
  int d_slot = 0;
  int nb = 0;
};

WallBinding bind_wall(const Expr& call, const BindContext& ctx, const Physics& physics) {
  WallBinding w;
  w.I = ctx.bind_field(binding_arg(call, 0));
  w.vg = ctx.bind_field(binding_arg(call, 1));
  w.sx = ctx.bind_field(binding_arg(call, 2));
  w.sy = ctx.bind_field(binding_arg(call, 3));
  w.b_slot = ctx.slot_of(binding_arg(call, 4));
  w.d_slot = ctx.slot_of(binding_arg(call, 5));
  if (binding_arg(call, 6) != "normal")
    throw ValidationError(call.name() + ": seventh argument must be 'normal'");
  const IntensityAccess a = intensity_access(*ctx.layout, binding_arg(call, 0), *ctx.entities);
  check_counts(a, physics);
  w.nb = a.nb;
  return w;
}

class WallFlux : public BoundaryFlux {
 public:
  explicit WallFlux(WallBinding w) : w_(w) {}

 protected:
  double upwind(const double* const* fields, const BoundaryPoint& p, double ghost) const {
    const double vn = w_.sx.at(fields, p.cell, p.idx) * p.normal.x +
                      w_.sy.at(fields, p.cell, p.idx) * p.normal.y;
    const double v = w_.vg.at(fields, p.cell, p.idx);
    return v * (vn > 0 ? vn * w_.I.at(fields, p.cell, p.idx) : vn * ghost);
  }
  WallBinding w_;
};

// Ghost intensities per (face, band), precomputed for the faces of one region.
class IsothermalFlux final : public WallFlux {
 public:
  IsothermalFlux(WallBinding w, std::vector<double> ghost) : WallFlux(w), ghost_(std::move(ghost)) {}
  double value(const double* const* fields, const BoundaryPoint& p) const override {
    const double g = ghost_[static_cast<std::size_t>(p.face) * w_.nb + p.idx[w_.b_slot]];
    return upwind(fields, p, g);
  }

 private:
  std::vector<double> ghost_;
};

class SymmetricFlux final : public WallFlux {
 public:
  SymmetricFlux(WallBinding w, const DirectionSet& dirs) : WallFlux(w), dirs_(dirs) {}
  double value(const double* const* fields, const BoundaryPoint& p) const override {
    std::array<int, kMaxSlots> mirrored = p.idx;
    mirrored[w_.d_slot] = dirs_.reflect(p.idx[w_.d_slot], p.normal);
    return upwind(fields, p, w_.I.at(fields, p.cell, mirrored));
  }

 private:
  const DirectionSet& dirs_;
};

std::vector<double> wall_ghosts(const BindContext& ctx, const Physics& physics, int nb,
                                const std::function<double(const Face&)>& wall_T) {
  std::vector<double> ghost(static_cast<std::size_t>(ctx.mesh->num_faces()) * nb, 0.0);
  for (int f = 0; f < ctx.mesh->num_faces(); ++f) {
    const Face& face = ctx.mesh->face(f);
    if (!face.is_boundary() || face.region != ctx.region) continue;
    const double T = wall_T(face);
    if (!(T > 0.0)) throw ValidationError("wall temperature must be positive");
    for (int b = 0; b < nb; ++b)
      ghost[static_cast<std::size_t>(f) * nb + b] = physics.material.equilibrium_intensity(T, b);
  }
  return ghost;
}

}  // namespace

void register_bte_callbacks(CallbackLibrary& library, std::shared_ptr<const Physics> physics) {
  library.add_boundary("isothermal", 8, [physics](const Expr& call, const BindContext& ctx) {
    const WallBinding w = bind_wall(call, ctx, *physics);
    const double Tw = number_arg(call, 7);
    return std::make_unique<IsothermalFlux>(
        w, wall_ghosts(ctx, *physics, w.nb, [Tw](const Face&) { return Tw; }));
  });
  library.add_boundary(
      "isothermal_gaussian", 11, [physics](const Expr& call, const BindContext& ctx) {
        const WallBinding w = bind_wall(call, ctx, *physics);
        const double T_cold = number_arg(call, 7);
        const double T_peak = number_arg(call, 8);
        const double width = number_arg(call, 9);
        const double center = number_arg(call, 10);
        if (T_peak < T_cold) throw ValidationError("isothermal_gaussian: T_peak < T_cold");
        if (!(width > 0.0)) throw ValidationError("isothermal_gaussian: width must be positive");
        auto wall_T = [=](const Face& face) {
          // Distance along the wall from its center point.
          const double s = face.normal.x == 0.0 ? face.centroid.x - center
                                                : face.centroid.y - center;
          return gaussian_wall_temperature(s, T_cold, T_peak, width);
        };
        return std::make_unique<IsothermalFlux>(w, wall_ghosts(ctx, *physics, w.nb, wall_T));
      });
  library.add_boundary("symmetric", 7, [physics](const Expr& call, const BindContext& ctx) {
    const WallBinding w = bind_wall(call, ctx, *physics);
    for (const Face& face : ctx.mesh->faces())
      if (face.is_boundary() && face.region == ctx.region)
        (void)physics->directions.reflect(0, face.normal);
    return std::make_unique<SymmetricFlux>(w, physics->directions);
  });
  library.add_hook("temperature_update", [physics](const HookDecl& decl, const BindContext& ctx) {
    return std::make_unique<TemperatureHook>(decl, ctx, physics);
  });
}

std::vector<double> provider_values(const std::string& source, const Physics& physics) {
  if (source == "directions.x") return physics.directions.sx;
  if (source == "directions.y") return physics.directions.sy;
  if (source == "directions.w") return physics.directions.weight;
  std::vector<double> out;
  if (source == "bands.vg" || source == "bands.tau" || source == "bands.beta") {
    for (const Band& b : physics.material.bands())
      out.push_back(source == "bands.vg" ? b.vg : source == "bands.tau" ? b.tau : 1.0 / b.tau);
    return out;
  }
  throw ValidationError("unknown value provider '" + source + "'");
}

std::vector<double> energy_density(const FieldStore& state, const std::string& field,
                                   const EntityTable& entities, const Physics& physics) {
  const IntensityAccess a = intensity_access(state.layout(), field, entities);
  check_counts(a, physics);
  const std::span<const double> I = state.field(a.field);
  std::vector<double> E(static_cast<std::size_t>(state.layout().num_cells()), 0.0);
  for (std::size_t c = 0; c < E.size(); ++c) {
    double e = 0.0;
    for (int b = 0; b < a.nb; ++b) {
      double s = 0.0;
      for (int d = 0; d < a.nd; ++d)
        s += physics.directions.weight[d] * I[c * a.cell_stride + d * a.d_stride + b * a.b_stride];
      e += s / physics.material.band(b).vg;
    }
    E[c] = e;
  }
  return E;
}

double total_energy(const FieldStore& state, const std::string& field, const EntityTable& entities,
                    const Physics& physics, const Mesh& mesh) {
  const std::vector<double> E = energy_density(state, field, entities, physics);
  double total = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) total += mesh.volume(c) * E[c];
  return total;
}

}  // namespace bteflow
