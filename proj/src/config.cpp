#include "bteflow/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "bteflow/error.hpp"

namespace bteflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

double to_number(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ParseError(what + ": '" + text + "' is not a number");
  return v;
}

int to_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  int v = 0;
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end)
    throw ParseError(what + ": '" + text + "' is not an integer");
  return v;
}

bool to_bool(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw ParseError(what + ": '" + text + "' is not a boolean");
}

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct RawConfig {
  std::map<std::string, KeyValues> keyed;
  std::map<std::string, std::vector<std::string>> lines;
};

const std::set<std::string> kKeyedSections = {"mesh",    "material", "scenario",
                                              "equation", "backend", "output"};
const std::set<std::string> kLineSections = {"entities", "boundaries", "hooks"};

RawConfig read_raw(const std::string& text) {
  RawConfig raw;
  std::string section;
  std::istringstream is(text);
  int lineno = 0;
  std::set<std::string> seen;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    const std::string where = "line " + std::to_string(lineno);
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      if (!kKeyedSections.count(section) && !kLineSections.count(section))
        throw ParseError(where + ": unknown section [" + section + "]");
      if (!seen.insert(section).second)
        throw ParseError(where + ": section [" + section + "] appears twice");
      raw.keyed[section];
      raw.lines[section];
      continue;
    }
    if (section.empty()) throw ParseError(where + ": content before the first section");
    if (kLineSections.count(section)) {
      raw.lines[section].push_back(line);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    raw.keyed[section].emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return raw;
}

class Keys {
 public:
  Keys(const RawConfig& raw, const std::string& section) : section_(section) {
    if (auto it = raw.keyed.find(section); it != raw.keyed.end())
      for (const auto& [k, v] : it->second) {
        if (!values_.emplace(k, v).second)
          throw ParseError("[" + section + "] key '" + k + "' given twice");
      }
  }
  const std::string* get(const std::string& key) {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }
  std::string what(const std::string& key) const { return "[" + section_ + "] " + key; }
  void finish() const {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) throw ParseError("unknown key '" + k + "' in [" + section_ + "]");
  }

 private:
  std::string section_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

Periodicity parse_periodic(const std::string& s) {
  if (s == "none") return {};
  if (s == "x") return {true, false};
  if (s == "y") return {false, true};
  if (s == "xy" || s == "both") return {true, true};
  throw ParseError("[mesh] periodic must be none, x, y or xy");
}

std::string periodic_name(Periodicity p) {
  if (p.x && p.y) return "xy";
  if (p.x) return "x";
  if (p.y) return "y";
  return "none";
}

// `$name` references in boundary text resolved from scenario values.
std::string substitute(const std::string& text, const std::map<std::string, double>& vars) {
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] != '$') {
      out += text[i++];
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
      ++j;
    const std::string name = text.substr(i + 1, j - i - 1);
    auto it = vars.find(name);
    if (it == vars.end()) throw ValidationError("unknown scenario value '$" + name + "'");
    out += num(it->second);
    i = j;
  }
  return out;
}

}  // namespace

std::filesystem::path ScenarioConfig::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

EntityDecl parse_entity_line(const std::string& line) {
  std::string head = line;
  std::string tail;
  bool has_values = false;
  if (auto eq = line.find('='); eq != std::string::npos) {
    head = line.substr(0, eq);
    tail = line.substr(eq + 1);
    has_values = true;
  }
  const std::vector<std::string> w = words(head);
  if (w.size() < 2) throw ParseError("entity line '" + line + "' needs a kind and a name");
  EntityDecl d;
  d.name = w[1];
  const std::string& kind = w[0];
  if (kind == "index") {
    d.kind = EntityKind::Index;
    if (w.size() < 4 || w.size() > 5 || has_values)
      throw ParseError("index line expects: index <name> <lo> <hi> [direction|band]");
    d.range = {to_int(w[2], "index " + d.name), to_int(w[3], "index " + d.name)};
    if (w.size() == 5) {
      if (w[4] == "direction") d.role = IndexRole::Direction;
      else if (w[4] == "band") d.role = IndexRole::Band;
      else throw ParseError("index role must be direction or band, got '" + w[4] + "'");
    }
    return d;
  }
  if (kind == "variable") d.kind = EntityKind::Variable;
  else if (kind == "coefficient") d.kind = EntityKind::Coefficient;
  else throw ParseError("unknown entity kind '" + kind + "'");

  for (std::size_t i = 2; i < w.size(); ++i) {
    if (w[i] == "cell") d.location = Location::Cell;
    else if (w[i] == "face") d.location = Location::Face;
    else if (w[i] == "vector") d.components = 2;
    else if (w[i] == "from" && d.kind == EntityKind::Coefficient) {
      if (i + 2 != w.size()) throw ParseError("'from' takes exactly one provider name");
      d.source = w[i + 1];
      break;
    } else {
      for (const std::string& idx : split(w[i], ','))
        if (!idx.empty()) d.index_refs.push_back(idx);
    }
  }
  if (has_values) {
    if (d.kind != EntityKind::Coefficient) throw ParseError("only coefficients take values");
    if (!d.source.empty()) throw ParseError("coefficient '" + d.name + "' has both values and a provider");
    for (const std::string& v : split(tail, ',')) d.values.push_back(to_number(v, d.name));
  }
  if (d.kind == EntityKind::Coefficient && d.source.empty() && d.values.empty())
    throw ParseError("coefficient '" + d.name + "' needs '= values' or 'from <provider>'");
  return d;
}

std::string render_entity(const EntityDecl& d) {
  std::ostringstream os;
  switch (d.kind) {
    case EntityKind::Index:
      os << "index " << d.name << ' ' << d.range.first << ' ' << d.range.second;
      if (d.role) os << (*d.role == IndexRole::Direction ? " direction" : " band");
      return os.str();
    case EntityKind::Variable: os << "variable " << d.name << (d.location == Location::Face ? " face" : " cell"); break;
    case EntityKind::Coefficient: os << "coefficient " << d.name; break;
    case EntityKind::Callback: os << "callback " << d.name; break;
  }
  if (d.components == 2) os << " vector";
  if (!d.index_refs.empty()) os << ' ' << join(d.index_refs, ",");
  if (!d.source.empty()) os << " from " << d.source;
  if (!d.values.empty()) {
    std::vector<std::string> v;
    for (double x : d.values) v.push_back(num(x));
    os << " = " << join(v, ", ");
  }
  return os.str();
}

HookDecl parse_hook_line(const std::string& line) {
  const std::vector<std::string> w = words(line);
  if (w.empty()) throw ParseError("empty hook line");
  HookDecl h;
  h.name = w[0];
  bool reads = false, writes = false;
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (w[i] == "concurrent") {
      h.concurrent = true;
      continue;
    }
    const auto eq = w[i].find('=');
    if (eq == std::string::npos) throw ParseError("hook option '" + w[i] + "' is not key=value");
    const std::string key = w[i].substr(0, eq);
    const std::string value = w[i].substr(eq + 1);
    if (key == "reads" || key == "writes") {
      std::vector<std::string>& dst = key == "reads" ? h.reads : h.writes;
      for (const std::string& f : split(value, ','))
        if (!f.empty()) dst.push_back(f);
      (key == "reads" ? reads : writes) = true;
    } else {
      h.options[key] = value;
    }
  }
  if (!reads || !writes)
    throw ParseError("hook '" + h.name + "' must declare reads= and writes=");
  return h;
}

std::string render_hook(const HookDecl& h) {
  std::string s = h.name + " reads=" + join(h.reads, ",") + " writes=" + join(h.writes, ",");
  for (const auto& [k, v] : h.options) s += " " + k + "=" + v;
  if (h.concurrent) s += " concurrent";
  return s;
}

ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  const RawConfig raw = read_raw(text);
  ScenarioConfig c;
  c.base_dir = base_dir;

  {
    Keys k(raw, "mesh");
    if (auto v = k.get("kind")) {
      if (*v == "file") c.mesh.from_file = true;
      else if (*v != "generated") throw ParseError("[mesh] kind must be generated or file");
    }
    if (auto v = k.get("file")) c.mesh.file = *v;
    if (auto v = k.get("nx")) c.mesh.nx = to_int(*v, k.what("nx"));
    if (auto v = k.get("ny")) c.mesh.ny = to_int(*v, k.what("ny"));
    if (auto v = k.get("Lx")) c.mesh.Lx = to_number(*v, k.what("Lx"));
    if (auto v = k.get("Ly")) c.mesh.Ly = to_number(*v, k.what("Ly"));
    if (auto v = k.get("periodic")) c.mesh.periodic = parse_periodic(*v);
    if (c.mesh.from_file && c.mesh.file.empty()) throw ParseError("[mesh] kind = file needs file =");
    k.finish();
  }
  if (raw.keyed.count("material")) {
    c.has_material = true;
    Keys k(raw, "material");
    if (auto v = k.get("mode")) {
      if (*v == "linear") c.material.mode = MaterialMode::Linear;
      else if (*v == "quadrature") c.material.mode = MaterialMode::Quadrature;
      else throw ParseError("[material] mode must be linear or quadrature");
    }
    if (auto v = k.get("table")) c.material.table = *v;
    if (auto v = k.get("n_freq")) c.material.n_freq = to_int(*v, k.what("n_freq"));
    if (auto v = k.get("T_ref")) c.material.T_ref = to_number(*v, k.what("T_ref"));
    k.finish();
  }
  {
    Keys k(raw, "scenario");
    if (auto v = k.get("T_cold")) c.scenario.T_cold = to_number(*v, k.what("T_cold"));
    if (auto v = k.get("T_peak")) c.scenario.T_peak = to_number(*v, k.what("T_peak"));
    if (auto v = k.get("width")) c.scenario.width = to_number(*v, k.what("width"));
    if (auto v = k.get("center")) c.center = to_number(*v, k.what("center"));
    if (auto v = k.get("directions")) c.directions = to_int(*v, k.what("directions"));
    if (auto v = k.get("dt"); v && *v != "auto") c.dt = to_number(*v, k.what("dt"));
    if (auto v = k.get("nsteps")) c.nsteps = to_int(*v, k.what("nsteps"));
    if (c.nsteps < 0) throw ParseError("[scenario] nsteps must be non-negative");
    k.finish();
  }
  c.scenario.Lx = c.mesh.Lx;
  c.scenario.Ly = c.mesh.Ly;
  if (auto it = raw.lines.find("entities"); it != raw.lines.end()) c.entity_lines = it->second;
  {
    Keys k(raw, "equation");
    if (auto v = k.get("unknown")) c.unknown = *v;
    if (auto v = k.get("text")) c.equation = *v;
    if (auto v = k.get("initial")) {
      const std::vector<std::string> w = words(*v);
      if (w.empty()) throw ParseError("[equation] initial is empty");
      c.initial.kind = w[0];
      c.initial.params.clear();
      for (std::size_t i = 1; i < w.size(); ++i) c.initial.params.push_back(to_number(w[i], "initial"));
      static const std::map<std::string, std::size_t> arity = {
          {"equilibrium", 1}, {"constant", 1}, {"random", 3}, {"random_temperature", 3}};
      if (auto a = arity.find(c.initial.kind); a != arity.end()) {
        if (c.initial.params.size() != a->second)
          throw ParseError("initial '" + c.initial.kind + "' takes " + std::to_string(a->second) +
                           " values");
      } else if (c.initial.kind != "table") {
        throw ParseError("unknown initial condition '" + c.initial.kind + "'");
      }
    }
    if (c.unknown.empty()) throw ParseError("[equation] unknown = is required");
    if (c.equation.empty()) throw ParseError("[equation] text = is required");
    k.finish();
  }
  if (auto it = raw.lines.find("boundaries"); it != raw.lines.end())
    for (const std::string& line : it->second) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("boundary line '" + line + "' needs region = call");
      const int region = to_int(line.substr(0, eq), "boundary region");
      for (const auto& [r, t] : c.boundaries)
        if (r == region)
          throw ValidationError("region " + std::to_string(region) + " has two boundary bindings");
      c.boundaries.emplace_back(region, trim(line.substr(eq + 1)));
    }
  if (auto it = raw.lines.find("hooks"); it != raw.lines.end())
    for (const std::string& line : it->second) c.hooks.push_back(parse_hook_line(line));
  {
    Keys k(raw, "backend");
    if (auto v = k.get("kind")) c.backend.kind = parse_backend_kind(*v);
    if (auto v = k.get("workers")) c.backend.workers = to_int(*v, k.what("workers"));
    if (auto v = k.get("device_workers"))
      c.backend.device_workers = to_int(*v, k.what("device_workers"));
    if (auto v = k.get("async")) c.backend.async = to_bool(*v, k.what("async"));
    if (auto v = k.get("loops"))
      for (const std::string& a : split(*v, ','))
        if (!a.empty()) c.loops.push_back(a);
    k.finish();
  }
  {
    Keys k(raw, "output");
    if (auto v = k.get("fields")) c.output.fields = *v;
    if (auto v = k.get("timing")) c.output.timing = *v;
    if (auto v = k.get("timing_csv")) c.output.timing_csv = *v;
    k.finish();
  }
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

std::string write_config(const ScenarioConfig& c) {
  std::ostringstream os;
  os << "[mesh]\n";
  if (c.mesh.from_file) {
    os << "kind = file\nfile = " << c.mesh.file << '\n';
  } else {
    os << "kind = generated\n";
  }
  os << "nx = " << c.mesh.nx << "\nny = " << c.mesh.ny << "\nLx = " << num(c.mesh.Lx)
     << "\nLy = " << num(c.mesh.Ly) << "\nperiodic = " << periodic_name(c.mesh.periodic) << '\n';
  if (c.has_material) {
    os << "\n[material]\nmode = "
       << (c.material.mode == MaterialMode::Linear ? "linear" : "quadrature") << '\n';
    if (!c.material.table.empty()) os << "table = " << c.material.table << '\n';
    os << "n_freq = " << c.material.n_freq << "\nT_ref = " << num(c.material.T_ref) << '\n';
  }
  os << "\n[scenario]\nT_cold = " << num(c.scenario.T_cold) << "\nT_peak = "
     << num(c.scenario.T_peak) << "\nwidth = " << num(c.scenario.width) << '\n';
  if (c.center) os << "center = " << num(*c.center) << '\n';
  os << "directions = " << c.directions << "\ndt = " << (c.dt ? num(*c.dt) : "auto")
     << "\nnsteps = " << c.nsteps << '\n';
  os << "\n[entities]\n";
  for (const std::string& line : c.entity_lines) os << render_entity(parse_entity_line(line)) << '\n';
  os << "\n[equation]\nunknown = " << c.unknown << "\ntext = " << c.equation << "\ninitial = "
     << c.initial.kind;
  for (double p : c.initial.params) os << ' ' << num(p);
  os << '\n';
  os << "\n[boundaries]\n";
  for (const auto& [r, t] : c.boundaries) os << r << " = " << t << '\n';
  os << "\n[hooks]\n";
  for (const HookDecl& h : c.hooks) os << render_hook(h) << '\n';
  os << "\n[backend]\nkind = " << backend_name(c.backend.kind) << "\nworkers = " << c.backend.workers
     << "\ndevice_workers = " << c.backend.device_workers
     << "\nasync = " << (c.backend.async ? "true" : "false") << '\n';
  if (!c.loops.empty()) os << "loops = " << join(c.loops, ",") << '\n';
  os << "\n[output]\n";
  if (!c.output.fields.empty()) os << "fields = " << c.output.fields << '\n';
  if (!c.output.timing.empty()) os << "timing = " << c.output.timing << '\n';
  if (!c.output.timing_csv.empty()) os << "timing_csv = " << c.output.timing_csv << '\n';
  return os.str();
}

Mesh build_mesh(const ScenarioConfig& c) {
  if (c.mesh.from_file) return read_mesh_file(c.resolve(c.mesh.file).string());
  return generate_uniform_grid(c.mesh.nx, c.mesh.ny, c.mesh.Lx, c.mesh.Ly, RegionMap{},
                               c.mesh.periodic);
}

Material build_material(const ScenarioConfig& c, int nbands) {
  int n_freq = c.material.n_freq;
  if (n_freq == 0) {
    for (int n = 1; n <= nbands; ++n)
      if (n + transverse_band_count(n) == nbands) {
        n_freq = n;
        break;
      }
    if (n_freq == 0)
      throw ValidationError("no frequency count gives " + std::to_string(nbands) +
                            " bands under the polarization split");
  }
  if (!c.material.table.empty())
    return build_bands(n_freq, read_material_table(c.resolve(c.material.table).string(),
                                                   c.material.mode));
  return generate_material_table(n_freq, c.material.T_ref).with_mode(c.material.mode);
}

std::unique_ptr<Pipeline> build_pipeline(const ScenarioConfig& config) {
  auto p = std::make_unique<Pipeline>();
  p->config = config;
  const ScenarioConfig& c = p->config;

  auto entities = std::make_shared<EntityTable>();
  for (const std::string& line : c.entity_lines) entities->add(parse_entity_line(line));
  p->entities = entities;
  auto mesh = std::make_shared<Mesh>(build_mesh(c));
  p->mesh = mesh;

  const EntityDecl* dir_index = entities->index_with_role(IndexRole::Direction);
  const EntityDecl* band_index = entities->index_with_role(IndexRole::Band);
  bool needs_physics = c.has_material || dir_index || band_index;
  for (const EntityDecl& d : entities->all())
    if (!d.source.empty()) needs_physics = true;
  if (needs_physics) {
    auto physics = std::make_shared<Physics>();
    const int ndir = dir_index ? entities->extent(dir_index->name) : c.directions;
    if (dir_index && c.directions != 0 && c.directions != ndir)
      throw ValidationError("[scenario] directions disagrees with index '" + dir_index->name + "'");
    physics->directions = build_directions(ndir == 0 ? 8 : ndir);
    physics->material = build_material(c, band_index ? entities->extent(band_index->name)
                                                     : std::max(1, c.material.n_freq));
    physics->scenario = c.scenario;
    p->physics = physics;
    register_bte_callbacks(p->library, physics);
  }
  register_generic_callbacks(p->library);

  // Coefficient values must match their declared shapes.
  for (const EntityDecl& d : entities->all()) {
    if (d.kind != EntityKind::Coefficient) continue;
    std::size_t expected = static_cast<std::size_t>(d.components);
    for (const std::string& idx : d.index_refs)
      expected *= static_cast<std::size_t>(entities->extent(idx));
    const std::size_t got = d.source.empty() ? d.values.size()
                                             : provider_values(d.source, *p->physics).size();
    if (got != expected)
      throw ValidationError("coefficient '" + d.name + "' has " + std::to_string(got) +
                            " values, expected " + std::to_string(expected));
  }

  p->library.declare_boundaries(p->registry);
  for (const HookDecl& h : c.hooks) {
    if (!p->library.has_hook(h.name))
      throw ValidationError("no post-step hook named '" + h.name + "'");
    p->registry.register_callback(h.name, 0, CallbackStage::PostStep);
  }

  p->equation = build_equation(c.unknown, c.equation, *entities, p->registry);
  const EntityDecl& unknown = entities->at(c.unknown);
  if (unknown.kind != EntityKind::Variable)
    throw ValidationError("unknown '" + c.unknown + "' is not a declared variable");

  std::map<std::string, double> vars = {
      {"T_cold", c.scenario.T_cold}, {"T_peak", c.scenario.T_peak}, {"width", c.scenario.width},
      {"center", c.center ? *c.center : 0.5 * mesh->Lx},          {"Lx", mesh->Lx},
      {"Ly", mesh->Ly}};
  const std::vector<int> regions = mesh->boundary_regions();
  for (const auto& [region, text] : c.boundaries) {
    if (std::find(regions.begin(), regions.end(), region) == regions.end())
      throw ValidationError("boundary binding for region " + std::to_string(region) +
                            ", which the mesh does not have");
    p->equation.boundary_specs.push_back(
        parse_boundary_spec(region, substitute(text, vars), *entities, p->registry));
  }
  if (!p->equation.terms.rhs_surf.empty())
    for (int r : regions) {
      const bool bound = std::any_of(c.boundaries.begin(), c.boundaries.end(),
                                     [r](const auto& b) { return b.first == r; });
      if (!bound)
        throw ValidationError("boundary region " + std::to_string(r) + " has no boundary binding");
    }

  InitialCondition& ic = p->equation.initial_condition;
  ic.kind = c.initial.kind == "constant" ? InitialCondition::Kind::Constant
            : c.initial.kind == "table" ? InitialCondition::Kind::Table
                                        : InitialCondition::Kind::Generator;
  ic.value = c.initial.kind == "constant" ? c.initial.params.at(0) : 0.0;
  if (ic.kind == InitialCondition::Kind::Table) ic.table = c.initial.params;
  ic.generator = ic.kind == InitialCondition::Kind::Generator ? c.initial.kind : "";
  ic.params = c.initial.params;
  if ((c.initial.kind == "equilibrium" || c.initial.kind == "random_temperature") && !p->physics)
    throw ValidationError("initial '" + c.initial.kind + "' needs bands and directions");

  p->loops = build_loop_plan(c.loops, entities.get());
  p->config.backend.loops = p->loops;
  p->nsteps = c.nsteps;
  if (c.dt) {
    p->dt = *c.dt;
  } else if (p->physics) {
    p->dt = default_time_step(*mesh, *p->physics);
  } else {
    throw ValidationError("[scenario] dt is required for scenarios without bands");
  }
  p->sim = make_simulation(p->equation, entities, mesh, p->dt, p->library, c.hooks, p->loops);
  return p;
}

FieldStore initial_state(const Pipeline& p) {
  const FieldLayout& layout = *p.sim.layout;
  FieldStore s(p.sim.layout);
  for (const EntityDecl& d : p.entities->all()) {
    if (d.kind != EntityKind::Coefficient) continue;
    const std::vector<double> v = d.source.empty() ? d.values : provider_values(d.source, *p.physics);
    std::span<double> f = s.field(layout.id(d.name));
    std::copy(v.begin(), v.end(), f.begin());
  }

  const int u = layout.id(p.config.unknown);
  const FieldInfo& info = layout.info(u);
  std::span<double> U = s.field(u);
  const int ncells = layout.num_cells();
  const std::string& kind = p.config.initial.kind;
  const std::vector<double>& prm = p.config.initial.params;
  const CompiledKernel& k = *p.sim.compiled;
  const int nd = k.directions();
  const int nb = k.bands();
  // Slot strides of the unknown for (d, b).
  std::size_t d_stride = 0, b_stride = 0;
  for (std::size_t i = 0; i < info.indices.size(); ++i) {
    const EntityDecl& idx = p.entities->at(info.indices[i]);
    if (idx.role == IndexRole::Direction) d_stride = info.index_strides[i];
    if (idx.role == IndexRole::Band) b_stride = info.index_strides[i];
  }
  auto at = [&](int c, int d, int b) -> double& {
    return U[static_cast<std::size_t>(c) * info.per_cell_size + d * d_stride + b * b_stride];
  };

  if (kind == "constant") {
    std::fill(U.begin(), U.end(), prm[0]);
  } else if (kind == "table") {
    if (prm.size() != info.per_cell_size)
      throw ValidationError("initial table has " + std::to_string(prm.size()) + " values, expected " +
                            std::to_string(info.per_cell_size));
    for (int c = 0; c < ncells; ++c)
      for (int d = 0; d < nd; ++d)
        for (int b = 0; b < nb; ++b) at(c, d, b) = prm[static_cast<std::size_t>(d) * nb + b];
  } else if (kind == "equilibrium") {
    for (int c = 0; c < ncells; ++c)
      for (int d = 0; d < nd; ++d)
        for (int b = 0; b < nb; ++b) at(c, d, b) = p.physics->material.equilibrium_intensity(prm[0], b);
  } else if (kind == "random") {
    std::mt19937_64 rng(static_cast<std::uint64_t>(prm[0]));
    std::uniform_real_distribution<double> dist(prm[1], prm[2]);
    for (double& v : U) v = dist(rng);
  } else if (kind == "random_temperature") {
    std::mt19937_64 rng(static_cast<std::uint64_t>(prm[0]));
    std::uniform_real_distribution<double> dist(prm[1], prm[2]);
    for (int c = 0; c < ncells; ++c)
      for (int d = 0; d < nd; ++d) {
        const double T = dist(rng);
        for (int b = 0; b < nb; ++b) at(c, d, b) = p.physics->material.equilibrium_intensity(T, b);
      }
  }
  prime_hooks(p.sim, s);
  return s;
}

std::string render_fields_csv(const Pipeline& p, const FieldStore& state) {
  std::ostringstream os;
  os << std::setprecision(17);
  const Mesh& mesh = *p.mesh;
  const HookDecl* temp = nullptr;
  for (const HookDecl& h : p.config.hooks)
    if (h.name == "temperature_update") temp = &h;
  if (p.physics && temp) {
    const std::vector<double> E = energy_density(state, p.config.unknown, *p.entities, *p.physics);
    const std::span<const double> T = state.field(temp->writes.at(0));
    os << "x,y,T,E\n";
    for (int c = 0; c < mesh.num_cells(); ++c)
      os << mesh.centroid(c).x << ',' << mesh.centroid(c).y << ',' << T[c] << ',' << E[c] << '\n';
    return os.str();
  }
  const int u = state.layout().id(p.config.unknown);
  os << "x,y," << p.config.unknown << '\n';
  for (int c = 0; c < mesh.num_cells(); ++c) {
    double s = 0.0;
    for (double v : state.cell_slice(u, c)) s += v;
    os << mesh.centroid(c).x << ',' << mesh.centroid(c).y << ',' << s << '\n';
  }
  return os.str();
}

}  // namespace bteflow
