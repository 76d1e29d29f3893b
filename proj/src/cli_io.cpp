#include "porofs/cli_io.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace porofs {

namespace {

const char* kSideNames[6] = {"xmin", "xmax", "ymin", "ymax", "zmin", "zmax"};

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "line %d: ", line);
  throw ConfigError(buf + msg);
}

double parse_real(int line, const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  char* end = nullptr;
  const double x = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size())
    fail(line, "value of '" + key + "' is not a number: '" + t + "'");
  return x;
}

std::vector<double> parse_reals(int line, const std::string& key, const std::string& v) {
  std::istringstream is(v);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(parse_real(line, key, tok));
  if (out.empty()) fail(line, "value of '" + key + "' is empty");
  return out;
}

int parse_int(int line, const std::string& key, const std::string& v) {
  const double x = parse_real(line, key, v);
  const int i = static_cast<int>(x);
  if (static_cast<double>(i) != x)
    fail(line, "value of '" + key + "' is not an integer");
  return i;
}

bool parse_bool(int line, const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "on" || t == "true" || t == "1") return true;
  if (t == "off" || t == "false" || t == "0") return false;
  fail(line, "value of '" + key + "' must be on/off");
}

int side_index(const std::string& suffix) {
  for (int s = 0; s < 6; ++s)
    if (suffix == kSideNames[s]) return s;
  return -1;
}

std::string g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const char* bc_name(FlowBC b) { return b == FlowBC::dirichlet ? "dirichlet" : "neumann"; }
const char* bc_name(MechBC b) { return b == MechBC::dirichlet ? "dirichlet" : "neumann"; }

const char* plasticity_name(PlasticityType t) {
  switch (t) {
    case PlasticityType::von_mises: return "von_mises";
    case PlasticityType::drucker_prager: return "drucker_prager";
    default: return "none";
  }
}

/// Section-scoped key handling; returns false when the key is unknown.
struct Parser {
  RunConfig& cfg;
  int line = 0;
  std::set<std::string> seen;

  void mark(const std::string& section, const std::string& key) {
    if (!seen.insert(section + "." + key).second)
      fail(line, "duplicate key '" + key + "' in [" + section + "]");
  }

  bool mesh_key(const std::string& k, const std::string& v) {
    if (k == "nx") { cfg.nx = parse_int(line, k, v); return true; }
    if (k == "ny") { cfg.ny = parse_int(line, k, v); return true; }
    if (k == "nz") { cfg.nz = parse_int(line, k, v); return true; }
    if (k == "box") {
      const auto r = parse_reals(line, k, v);
      if (r.size() != 6) fail(line, "'box' needs 6 values: x0 y0 z0 x1 y1 z1");
      for (int i = 0; i < 6; ++i) cfg.box[i] = r[static_cast<std::size_t>(i)];
      return true;
    }
    if (k == "distortion") { cfg.distortion = parse_real(line, k, v); return true; }
    if (k.rfind("flow_", 0) == 0) {
      const int s = side_index(k.substr(5));
      if (s < 0) return false;
      const std::string t = trim(v);
      if (t == "dirichlet") cfg.flow_bc[static_cast<std::size_t>(s)] = FlowBC::dirichlet;
      else if (t == "neumann") cfg.flow_bc[static_cast<std::size_t>(s)] = FlowBC::neumann;
      else fail(line, "'" + k + "' must be dirichlet or neumann");
      return true;
    }
    if (k.rfind("mech_", 0) == 0) {
      const int s = side_index(k.substr(5));
      if (s < 0) return false;
      const std::string t = trim(v);
      if (t == "dirichlet") cfg.mech_bc[static_cast<std::size_t>(s)] = MechBC::dirichlet;
      else if (t == "neumann") cfg.mech_bc[static_cast<std::size_t>(s)] = MechBC::neumann;
      else fail(line, "'" + k + "' must be dirichlet or neumann");
      return true;
    }
    return false;
  }

  bool material_key(const std::string& k, const std::string& v) {
    if (k == "youngs_modulus") { cfg.youngs_modulus = parse_real(line, k, v); return true; }
    if (k == "poisson") { cfg.poisson = parse_real(line, k, v); return true; }
    if (k.rfind("stiffness_row", 0) == 0) {
      const std::string idx = k.substr(13);
      if (idx.size() != 1 || idx[0] < '0' || idx[0] > '5') return false;
      const auto r = parse_reals(line, k, v);
      if (r.size() != 6) fail(line, "'" + k + "' needs exactly 6 values");
      const int row = idx[0] - '0';
      for (int j = 0; j < 6; ++j)
        cfg.stiffness[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] =
            r[static_cast<std::size_t>(j)];
      cfg.has_stiffness_rows = true;
      return true;
    }
    if (k == "biot_alpha") {
      const auto r = parse_reals(line, k, v);
      if (r.size() == 1) cfg.biot_alpha = {r[0], r[0], r[0], 0.0, 0.0, 0.0};
      else if (r.size() == 6)
        for (int i = 0; i < 6; ++i) cfg.biot_alpha[static_cast<std::size_t>(i)] =
            r[static_cast<std::size_t>(i)];
      else fail(line, "'biot_alpha' needs 1 (isotropic) or 6 (a11 a22 a33 a23 a13 a12) values");
      return true;
    }
    if (k == "biot_modulus") { cfg.biot_modulus = parse_real(line, k, v); return true; }
    if (k == "permeability") {
      const auto r = parse_reals(line, k, v);
      if (r.size() == 1) cfg.permeability = {r[0], r[0], r[0]};
      else if (r.size() == 3) cfg.permeability = {r[0], r[1], r[2]};
      else fail(line, "'permeability' needs 1 (isotropic) or 3 (diagonal) values");
      return true;
    }
    if (k == "viscosity") { cfg.viscosity = parse_real(line, k, v); return true; }
    if (k == "fluid_compressibility") {
      cfg.fluid_compressibility = parse_real(line, k, v);
      return true;
    }
    if (k == "fluid_density") { cfg.fluid_density = parse_real(line, k, v); return true; }
    if (k == "solid_density") { cfg.solid_density = parse_real(line, k, v); return true; }
    if (k == "porosity") { cfg.porosity = parse_real(line, k, v); return true; }
    if (k == "plasticity") {
      const std::string t = trim(v);
      if (t == "none") cfg.plasticity.type = PlasticityType::none;
      else if (t == "von_mises") cfg.plasticity.type = PlasticityType::von_mises;
      else if (t == "drucker_prager") cfg.plasticity.type = PlasticityType::drucker_prager;
      else fail(line, "'plasticity' must be none, von_mises, or drucker_prager");
      return true;
    }
    if (k == "yield_stress") { cfg.plasticity.yield_stress = parse_real(line, k, v); return true; }
    if (k == "cohesion") { cfg.plasticity.cohesion = parse_real(line, k, v); return true; }
    if (k == "friction") { cfg.plasticity.friction = parse_real(line, k, v); return true; }
    if (k == "hardening") { cfg.plasticity.hardening = parse_real(line, k, v); return true; }
    if (k == "dilatancy") { cfg.plasticity.beta_p = parse_real(line, k, v); return true; }
    return false;
  }

  bool time_key(const std::string& k, const std::string& v) {
    if (k == "dt") { cfg.dt = parse_real(line, k, v); return true; }
    if (k == "n_steps") { cfg.n_steps = parse_int(line, k, v); return true; }
    return false;
  }

  bool coupling_key(const std::string& k, const std::string& v) {
    if (k == "tol") { cfg.controls.tol = parse_real(line, k, v); return true; }
    if (k == "tol_bracket") { cfg.controls.tol_bracket = parse_real(line, k, v); return true; }
    if (k == "max_coupling_iters") {
      cfg.controls.max_iters = parse_int(line, k, v);
      return true;
    }
    if (k == "newton_tol") { cfg.controls.tol_newton = parse_real(line, k, v); return true; }
    if (k == "equilibrate") { cfg.controls.equilibrate = parse_bool(line, k, v); return true; }
    return false;
  }

  bool scenario_key(const std::string& k, const std::string& v) {
    if (k == "initial_pressure") { cfg.initial_pressure = parse_real(line, k, v); return true; }
    if (k == "boundary_pressure") { cfg.boundary_pressure = parse_real(line, k, v); return true; }
    if (k.rfind("pressure_", 0) == 0) {
      const int s = side_index(k.substr(9));
      if (s < 0) return false;
      cfg.side_pressure[static_cast<std::size_t>(s)] = parse_real(line, k, v);
      return true;
    }
    if (k.rfind("traction_", 0) == 0) {
      const int s = side_index(k.substr(9));
      if (s < 0) return false;
      const auto r = parse_reals(line, k, v);
      if (r.size() != 3) fail(line, "'" + k + "' needs 3 values: tx ty tz");
      cfg.side_traction[static_cast<std::size_t>(s)] = Vec3{r[0], r[1], r[2]};
      return true;
    }
    if (k == "source") { cfg.source = parse_real(line, k, v); return true; }
    if (k == "gravity") { cfg.gravity = parse_bool(line, k, v); return true; }
    return false;
  }

  bool output_key(const std::string& k, const std::string& v) {
    if (k == "directory") {
      cfg.directory = trim(v);
      if (cfg.directory.empty()) fail(line, "'directory' must not be empty");
      return true;
    }
    if (k == "vtk_every") { cfg.vtk_every = parse_int(line, k, v); return true; }
    return false;
  }
};

void validate_config(const RunConfig& cfg) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(cfg.nx >= 1 && cfg.ny >= 1 && cfg.nz >= 1, "mesh.nx/ny/nz must be >= 1");
  need(cfg.box[3] > cfg.box[0] && cfg.box[4] > cfg.box[1] && cfg.box[5] > cfg.box[2],
       "mesh.box must have positive extent on every axis");
  need(cfg.distortion >= 0.0 && cfg.distortion < 1.0, "mesh.distortion must be in [0, 1)");
  need(cfg.biot_modulus > 0.0, "material.biot_modulus must be positive");
  need(cfg.viscosity > 0.0, "material.viscosity must be positive");
  for (double k : cfg.permeability)
    need(k > 0.0, "material.permeability entries must be positive");
  need(cfg.porosity > 0.0 && cfg.porosity < 1.0, "material.porosity must be in (0, 1)");
  need(cfg.fluid_compressibility >= 0.0,
       "material.fluid_compressibility must be nonnegative");
  need(cfg.dt > 0.0, "time.dt must be positive");
  need(cfg.n_steps >= 1, "time.n_steps must be >= 1");
  need(cfg.controls.tol > 0.0, "coupling.tol must be positive");
  need(cfg.controls.tol_bracket >= 0.0, "coupling.tol_bracket must be nonnegative");
  need(cfg.controls.max_iters >= 2, "coupling.max_coupling_iters must be >= 2");
  need(cfg.controls.tol_newton > 0.0, "coupling.newton_tol must be positive");
  need(cfg.vtk_every >= 0, "output.vtk_every must be nonnegative");

  // The material invariants (SPD stiffness and permeability, plasticity
  // moduli) are enforced now, not at run time.
  try {
    config_material(cfg).validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

SymTensor2 voigt_tensor(const std::array<double, 6>& a) {
  Mat3 m{};
  m[0][0] = a[0];
  m[1][1] = a[1];
  m[2][2] = a[2];
  m[1][2] = m[2][1] = a[3];
  m[0][2] = m[2][0] = a[4];
  m[0][1] = m[1][0] = a[5];
  return SymTensor2::from_matrix(m);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  Parser p{cfg, 0, {}};
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    p.line = lineno;
    const std::size_t hash = raw.find('#');
    std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(lineno, "malformed section header: '" + s + "'");
      section = trim(s.substr(1, s.size() - 2));
      static const std::set<std::string> known = {"mesh",     "material", "time",
                                                  "coupling", "scenario", "output"};
      if (!known.count(section)) fail(lineno, "unknown section [" + section + "]");
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value': '" + s + "'");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = s.substr(eq + 1);
    if (key.empty()) fail(lineno, "empty key");
    if (section.empty()) fail(lineno, "key '" + key + "' appears before any [section]");
    p.mark(section, key);
    bool known_key = false;
    if (section == "mesh") known_key = p.mesh_key(key, val);
    else if (section == "material") known_key = p.material_key(key, val);
    else if (section == "time") known_key = p.time_key(key, val);
    else if (section == "coupling") known_key = p.coupling_key(key, val);
    else if (section == "scenario") known_key = p.scenario_key(key, val);
    else if (section == "output") known_key = p.output_key(key, val);
    if (!known_key) fail(lineno, "unknown key '" + key + "' in [" + section + "]");
  }
  validate_config(cfg);
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

std::vector<std::string> config_echo(const RunConfig& cfg) {
  std::vector<std::string> out;
  auto put = [&](const std::string& key, const std::string& val) {
    out.push_back(key + " = " + val);
  };
  put("mesh.nx", std::to_string(cfg.nx));
  put("mesh.ny", std::to_string(cfg.ny));
  put("mesh.nz", std::to_string(cfg.nz));
  {
    std::string b;
    for (int i = 0; i < 6; ++i) b += (i ? " " : "") + g17(cfg.box[static_cast<std::size_t>(i)]);
    put("mesh.box", b);
  }
  put("mesh.distortion", g17(cfg.distortion));
  for (int s = 0; s < 6; ++s)
    put(std::string("mesh.flow_") + kSideNames[s],
        bc_name(cfg.flow_bc[static_cast<std::size_t>(s)]));
  for (int s = 0; s < 6; ++s)
    put(std::string("mesh.mech_") + kSideNames[s],
        bc_name(cfg.mech_bc[static_cast<std::size_t>(s)]));
  if (cfg.has_stiffness_rows) {
    for (int i = 0; i < 6; ++i) {
      std::string r;
      for (int j = 0; j < 6; ++j)
        r += (j ? " " : "") +
             g17(cfg.stiffness[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      put("material.stiffness_row" + std::to_string(i), r);
    }
  } else {
    put("material.youngs_modulus", g17(cfg.youngs_modulus));
    put("material.poisson", g17(cfg.poisson));
  }
  {
    std::string a;
    for (int i = 0; i < 6; ++i)
      a += (i ? " " : "") + g17(cfg.biot_alpha[static_cast<std::size_t>(i)]);
    put("material.biot_alpha", a);
  }
  put("material.biot_modulus", g17(cfg.biot_modulus));
  put("material.permeability", g17(cfg.permeability[0]) + " " + g17(cfg.permeability[1]) +
                                   " " + g17(cfg.permeability[2]));
  put("material.viscosity", g17(cfg.viscosity));
  put("material.fluid_compressibility", g17(cfg.fluid_compressibility));
  put("material.fluid_density", g17(cfg.fluid_density));
  put("material.solid_density", g17(cfg.solid_density));
  put("material.porosity", g17(cfg.porosity));
  put("material.plasticity", plasticity_name(cfg.plasticity.type));
  if (cfg.plasticity.type == PlasticityType::von_mises) {
    put("material.yield_stress", g17(cfg.plasticity.yield_stress));
    put("material.hardening", g17(cfg.plasticity.hardening));
  } else if (cfg.plasticity.type == PlasticityType::drucker_prager) {
    put("material.cohesion", g17(cfg.plasticity.cohesion));
    put("material.friction", g17(cfg.plasticity.friction));
    put("material.hardening", g17(cfg.plasticity.hardening));
    put("material.dilatancy", g17(cfg.plasticity.beta_p));
  }
  put("time.dt", g17(cfg.dt));
  put("time.n_steps", std::to_string(cfg.n_steps));
  put("coupling.tol", g17(cfg.controls.tol));
  put("coupling.tol_bracket", g17(cfg.controls.tol_bracket));
  put("coupling.max_coupling_iters", std::to_string(cfg.controls.max_iters));
  put("coupling.newton_tol", g17(cfg.controls.tol_newton));
  put("coupling.equilibrate", cfg.controls.equilibrate ? "on" : "off");
  put("scenario.initial_pressure", g17(cfg.initial_pressure));
  put("scenario.boundary_pressure", g17(cfg.boundary_pressure));
  for (int s = 0; s < 6; ++s)
    if (cfg.side_pressure[static_cast<std::size_t>(s)])
      put(std::string("scenario.pressure_") + kSideNames[s],
          g17(*cfg.side_pressure[static_cast<std::size_t>(s)]));
  for (int s = 0; s < 6; ++s)
    if (cfg.side_traction[static_cast<std::size_t>(s)]) {
      const Vec3& t = *cfg.side_traction[static_cast<std::size_t>(s)];
      put(std::string("scenario.traction_") + kSideNames[s],
          g17(t[0]) + " " + g17(t[1]) + " " + g17(t[2]));
    }
  put("scenario.source", g17(cfg.source));
  put("scenario.gravity", cfg.gravity ? "on" : "off");
  put("output.directory", cfg.directory);
  put("output.vtk_every", std::to_string(cfg.vtk_every));
  return out;
}

MaterialModel config_material(const RunConfig& cfg) {
  MaterialModel m;
  if (cfg.has_stiffness_rows) {
    // Engineering Voigt rows map shear through gamma = 2*eps; the Mandel form
    // rescales both index pairs by sqrt(2).
    Tensor4 D;
    for (int i = 0; i < 6; ++i) {
      const double wi = i < 3 ? 1.0 : kSqrt2;
      for (int j = 0; j < 6; ++j) {
        const double wj = j < 3 ? 1.0 : kSqrt2;
        D(i, j) = wi * wj *
                  cfg.stiffness[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
    m.D = D;
  } else {
    m.D = isotropic_stiffness(cfg.youngs_modulus, cfg.poisson);
  }
  m.alpha = voigt_tensor(cfg.biot_alpha);
  m.M = cfg.biot_modulus;
  m.K_perm = Mat3{};
  for (int i = 0; i < 3; ++i)
    m.K_perm[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] =
        cfg.permeability[static_cast<std::size_t>(i)];
  m.mu = cfg.viscosity;
  m.c_fluid = cfg.fluid_compressibility;
  m.rho0 = cfg.fluid_density;
  m.rho_r = cfg.solid_density;
  m.phi0 = cfg.porosity;
  if (cfg.gravity) m.gravity = Vec3{0.0, 0.0, -9.81};
  m.plasticity = cfg.plasticity;
  return m;
}

BoundaryRules config_rules(const RunConfig& cfg) {
  BoundaryRules r;
  for (int s = 0; s < 6; ++s) {
    r.flow[s] = cfg.flow_bc[static_cast<std::size_t>(s)];
    r.mech[s] = cfg.mech_bc[static_cast<std::size_t>(s)];
  }
  return r;
}

CouplingControls config_controls(const RunConfig& cfg) { return cfg.controls; }

Scenario config_scenario(const RunConfig& cfg) {
  Scenario sc;
  const std::array<double, 6> box = cfg.box;
  std::array<double, 6> pval{};
  for (int s = 0; s < 6; ++s)
    pval[static_cast<std::size_t>(s)] =
        cfg.side_pressure[static_cast<std::size_t>(s)].value_or(cfg.boundary_pressure);
  const double ext = std::max({box[3] - box[0], box[4] - box[1], box[5] - box[2]});
  const double tol = 1e-9 * ext;
  sc.dirichlet_pressure = [box, pval, tol](const Vec3& x) {
    // Face quadrature points are strictly inside their face, so exactly one
    // plane matches.
    for (int axis = 0; axis < 3; ++axis) {
      if (std::abs(x[axis] - box[static_cast<std::size_t>(axis)]) <= tol)
        return pval[static_cast<std::size_t>(2 * axis)];
      if (std::abs(x[axis] - box[static_cast<std::size_t>(axis + 3)]) <= tol)
        return pval[static_cast<std::size_t>(2 * axis + 1)];
    }
    return pval[0];
  };
  bool any_traction = false;
  for (const auto& t : cfg.side_traction) any_traction |= t.has_value();
  if (any_traction) {
    const std::array<std::optional<Vec3>, 6> tr = cfg.side_traction;
    sc.traction = [tr](const Vec3&, Side side) {
      const auto& t = tr[static_cast<std::size_t>(side)];
      return t ? *t : Vec3{0.0, 0.0, 0.0};
    };
  }
  if (cfg.source != 0.0) {
    const double q = cfg.source;
    sc.source = [q](const Vec3&) { return q; };
  }
  sc.gravity = cfg.gravity;
  return sc;
}

void write_vtk(const std::string& path, const HexMesh& mesh, const SplitState& state) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("write_vtk: cannot open " + path);
  const int nv = static_cast<int>(mesh.vertices.size());
  const int nc = mesh.n_cells();
  f << "# vtk DataFile Version 3.0\n";
  f << "porofs state snapshot\n";
  f << "ASCII\n";
  f << "DATASET UNSTRUCTURED_GRID\n";
  f << "POINTS " << nv << " double\n";
  for (const Vec3& v : mesh.vertices)
    f << g17(v[0]) << ' ' << g17(v[1]) << ' ' << g17(v[2]) << '\n';
  f << "CELLS " << nc << ' ' << nc * 9 << '\n';
  for (const Cell& c : mesh.cells) {
    f << 8;
    for (int a = 0; a < 8; ++a) f << ' ' << c.v[static_cast<std::size_t>(a)];
    f << '\n';
  }
  f << "CELL_TYPES " << nc << '\n';
  for (int c = 0; c < nc; ++c) f << "12\n";

  f << "CELL_DATA " << nc << '\n';
  f << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int c = 0; c < nc; ++c) f << g17(state.p[static_cast<std::size_t>(c)]) << '\n';
  f << "SCALARS mean_stress double 1\nLOOKUP_TABLE default\n";
  std::vector<SymTensor2> avg(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) {
    SymTensor2 s{};
    for (int q = 0; q < kGaussPerCell; ++q)
      s += state.gauss[static_cast<std::size_t>(c * kGaussPerCell + q)].sigma;
    avg[static_cast<std::size_t>(c)] = s * (1.0 / kGaussPerCell);
    f << g17(avg[static_cast<std::size_t>(c)].trace() / 3.0) << '\n';
  }
  f << "SCALARS deviatoric_stress double 1\nLOOKUP_TABLE default\n";
  for (int c = 0; c < nc; ++c)
    f << g17(std::sqrt(1.5) * avg[static_cast<std::size_t>(c)].deviator().norm()) << '\n';

  f << "POINT_DATA " << nv << '\n';
  f << "VECTORS displacement double\n";
  for (int v = 0; v < nv; ++v)
    f << g17(state.u[static_cast<std::size_t>(3 * v)]) << ' '
      << g17(state.u[static_cast<std::size_t>(3 * v + 1)]) << ' '
      << g17(state.u[static_cast<std::size_t>(3 * v + 2)]) << '\n';
  if (!f) throw Error("write_vtk: write failed for " + path);
}

namespace {

void write_provenance(std::ofstream& f, const std::vector<std::string>& provenance) {
  for (const std::string& line : provenance) f << "# " << line << '\n';
}

}  // namespace

void write_steps_csv(const std::string& path, const std::vector<std::string>& provenance,
                     const std::vector<StepSummary>& steps) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("write_steps_csv: cannot open " + path);
  write_provenance(f, provenance);
  f << "step,time,iterations,converged,bracket_initial,rel_dp_final,rel_du_final,"
       "max_ratio,mass_residual_max,flow_residual,mech_residual,format_version\n";
  for (const StepSummary& s : steps) {
    f << s.step << ',' << g17(s.time) << ',' << s.iterations << ',' << (s.converged ? 1 : 0)
      << ',' << g17(s.bracket_initial) << ',' << g17(s.rel_dp_final) << ','
      << g17(s.rel_du_final) << ',' << g17(s.max_ratio) << ',' << g17(s.mass_residual_max)
      << ',' << g17(s.flow_residual) << ',' << g17(s.mech_residual) << ",1\n";
  }
  if (!f) throw Error("write_steps_csv: write failed for " + path);
}

void write_iterations_csv(const std::string& path,
                          const std::vector<std::string>& provenance,
                          const std::vector<std::pair<int, ContractionReport>>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("write_iterations_csv: cannot open " + path);
  write_provenance(f, provenance);
  f << "step,m";
  for (const std::string& c : contraction_report_columns()) f << ',' << c;
  f << ",format_version\n";
  for (const auto& [step, rep] : rows) {
    f << step << ',' << rep.m;
    for (double v : contraction_report_values(rep)) f << ',' << g17(v);
    f << ",1\n";
  }
  if (!f) throw Error("write_iterations_csv: write failed for " + path);
}

std::string render_report(const std::string& csv_text) {
  std::istringstream is(csv_text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> data;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(t);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (header.empty()) header = cells;
    else data.push_back(cells);
  }
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int c_step = col("step"), c_m = col("m"), c_ratio = col("contraction_ratio");
  const int c_metric = col("metric_sigma"), c_rel = col("rel_dp");
  if (c_step < 0 || c_m < 0 || c_ratio < 0 || c_metric < 0 || c_rel < 0)
    throw Error("render_report: input is not an iterations CSV (missing columns)");

  std::ostringstream out;
  out << "contraction summary\n";
  char buf[256];
  int cur_step = -1;
  int rows_in_step = 0;
  double worst = 0.0;
  int worst_m = 0;
  auto flush = [&]() {
    if (cur_step < 0) return;
    std::snprintf(buf, sizeof buf, "  worst ratio %.6g at m=%d over %d reports\n", worst,
                  worst_m, rows_in_step);
    out << buf;
  };
  for (const auto& row : data) {
    if (static_cast<int>(row.size()) <= std::max({c_step, c_m, c_ratio, c_metric, c_rel}))
      throw Error("render_report: malformed CSV row");
    const int step = std::atoi(row[static_cast<std::size_t>(c_step)].c_str());
    const int m = std::atoi(row[static_cast<std::size_t>(c_m)].c_str());
    const double ratio = std::atof(row[static_cast<std::size_t>(c_ratio)].c_str());
    const double metric = std::atof(row[static_cast<std::size_t>(c_metric)].c_str());
    const double rel = std::atof(row[static_cast<std::size_t>(c_rel)].c_str());
    if (step != cur_step) {
      flush();
      cur_step = step;
      rows_in_step = 0;
      worst = 0.0;
      worst_m = 0;
      out << "step " << step << ":\n";
    }
    ++rows_in_step;
    if (m >= 3 && ratio >= worst) {
      worst = ratio;
      worst_m = m;
    }
    std::snprintf(buf, sizeof buf, "  m=%2d  ratio %-12.6g metric %-14.6g rel_dp %.6g\n", m,
                  ratio, metric, rel);
    out << buf;
  }
  flush();
  if (data.empty()) out << "  (no iteration rows)\n";
  return out.str();
}

RunOutcome run_from_config(const RunConfig& cfg, const std::string& out_override) {
  RunOutcome out;
  const std::string dir = out_override.empty() ? cfg.directory : out_override;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    out.error = "cannot create output directory " + dir + ": " + ec.message();
    return out;
  }

  HexMesh mesh = generate_brick(cfg.nx, cfg.ny, cfg.nz, cfg.box, cfg.distortion);
  classify_boundary(mesh, config_rules(cfg));
  const DofMap dm = build_dofmap(mesh);
  const auto geo = build_cell_geometry(mesh);
  const auto fgeo = build_face_geometry(mesh);
  const MaterialModel model = config_material(cfg);
  const Scenario sc = config_scenario(cfg);

  auto snapshot_path = [&](int step) {
    char name[32];
    std::snprintf(name, sizeof name, "state_%04d.vtk", step);
    return dir + "/" + name;
  };

  auto on_step = [&](const SplitState& state, const StepSummary& s) {
    if (cfg.vtk_every > 0 && s.step % cfg.vtk_every == 0) {
      write_vtk(snapshot_path(s.step), mesh, state);
      ++out.snapshots;
    }
  };

  const TransientResult tr =
      run_transient(mesh, dm, geo, fgeo, model, sc, cfg.controls,
                    make_initial_state(mesh, model, cfg.initial_pressure), cfg.dt,
                    cfg.n_steps, on_step);

  const std::vector<std::string> prov = config_echo(cfg);
  out.steps_csv = dir + "/steps.csv";
  out.iterations_csv = dir + "/iterations.csv";
  write_steps_csv(out.steps_csv, prov, tr.steps);
  std::vector<std::pair<int, ContractionReport>> rows;
  rows.reserve(tr.reports.size());
  for (std::size_t i = 0; i < tr.reports.size(); ++i)
    rows.emplace_back(tr.report_step[i], tr.reports[i]);
  write_iterations_csv(out.iterations_csv, prov, rows);

  out.completed = tr.completed;
  out.error = tr.error;
  out.steps_done = static_cast<int>(tr.steps.size());
  for (const StepSummary& s : tr.steps) out.total_iterations += s.iterations;
  if (!tr.steps.empty()) out.final_max_ratio = tr.steps.back().max_ratio;
  return out;
}

int poro_threads_from_env() {
  const char* v = std::getenv("PORO_THREADS");
  if (!v) return 0;
  const std::string s = trim(v);
  char* end = nullptr;
  const long n = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || n < 1)
    throw ConfigError("PORO_THREADS must be a positive integer, got '" + s + "'");
  return static_cast<int>(n);
}

}  // namespace porofs
