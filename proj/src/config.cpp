#include "chns/config.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

namespace chns {
namespace {

std::string join(std::string_view a, std::string_view b) { return a.empty() ? std::string(b) : fmt::format("{}.{}", a, b); }

// One TOML table with a closed key set.
class Section {
 public:
  Section(const toml::table* t, std::string name, std::initializer_list<std::string_view> allowed)
      : t_(t), name_(std::move(name)) {
    if (!t_) return;
    for (const auto& [k, v] : *t_) {
      bool ok = false;
      for (auto a : allowed) ok = ok || k.str() == a;
      if (!ok) throw ConfigError(join(name_, k.str()), fmt::format("unknown key '{}'", join(name_, k.str())));
    }
  }

  [[nodiscard]] bool has(std::string_view key) const { return t_ && t_->contains(key); }
  [[nodiscard]] std::string key(std::string_view k) const { return join(name_, k); }

  [[nodiscard]] double num(std::string_view k, double def) const {
    if (!has(k)) return def;
    return as_number(*t_->get(k), key(k));
  }
  [[nodiscard]] double positive(std::string_view k, double def) const {
    const double v = num(k, def);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key(k), fmt::format("{} must be finite and > 0", key(k)));
    return v;
  }
  [[nodiscard]] std::size_t count(std::string_view k, std::size_t def, std::size_t min = 1) const {
    if (!has(k)) return def;
    const auto* v = t_->get(k)->as_integer();
    if (!v) throw ConfigError(key(k), fmt::format("{} must be an integer", key(k)));
    if (v->get() < static_cast<std::int64_t>(min))
      throw ConfigError(key(k), fmt::format("{} must be >= {}", key(k), min));
    return static_cast<std::size_t>(v->get());
  }
  [[nodiscard]] bool flag(std::string_view k, bool def) const {
    if (!has(k)) return def;
    const auto* v = t_->get(k)->as_boolean();
    if (!v) throw ConfigError(key(k), fmt::format("{} must be a boolean", key(k)));
    return v->get();
  }
  [[nodiscard]] std::string str(std::string_view k, std::string def) const {
    if (!has(k)) return def;
    const auto* v = t_->get(k)->as_string();
    if (!v) throw ConfigError(key(k), fmt::format("{} must be a string", key(k)));
    return v->get();
  }
  [[nodiscard]] std::vector<double> nums(std::string_view k, std::vector<double> def) const {
    if (!has(k)) return def;
    const auto* arr = t_->get(k)->as_array();
    if (!arr) throw ConfigError(key(k), fmt::format("{} must be an array of numbers", key(k)));
    std::vector<double> out;
    for (const auto& e : *arr) out.push_back(as_number(e, key(k)));
    return out;
  }

  static double as_number(const toml::node& n, const std::string& key) {
    if (const auto* f = n.as_floating_point()) return f->get();
    if (const auto* i = n.as_integer()) return static_cast<double>(i->get());
    throw ConfigError(key, fmt::format("{} must be a number", key));
  }

 private:
  const toml::table* t_;
  std::string name_;
};

const toml::table* subtable(const toml::table& root, std::string_view name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  const auto* t = n->as_table();
  if (!t) throw ConfigError(std::string(name), fmt::format("'{}' must be a table", name));
  return t;
}

GridSpec read_grid(const Section& s, GridSpec def, bool allow_periodic) {
  GridSpec g = def;
  g.nx = s.count("nx", def.nx, 4);
  g.ny = s.count("ny", def.ny, 4);
  if (allow_periodic) {
    g.lx = s.positive("lx", def.lx);
    g.ly = s.positive("ly", def.ly);
    g.periodic_x = s.flag("periodic_x", def.periodic_x);
    g.periodic_y = s.flag("periodic_y", def.periodic_y);
  }
  return g;
}

ViscosityModel read_viscosity(const Section& s) {
  const std::string name = s.str("model", "layered");
  ViscosityModel m;
  if (name == "anisotropic") {
    m = ViscosityModel::anisotropic();
  } else {
    ViscosityKind kind{};
    try {
      kind = viscosity_kind_from(name);
    } catch (const CoefficientError&) {
      throw ConfigError(s.key("model"),
                        fmt::format("{} = '{}' is not one of constant, smooth_periodic, anisotropic, layered, "
                                    "quasi_periodic, separable_macro",
                                    s.key("model"), name));
    }
    switch (kind) {
      case ViscosityKind::Constant:
        m = ViscosityModel::constant(1.0);
        break;
      case ViscosityKind::SmoothPeriodic:
        m = ViscosityModel::smooth_periodic();
        break;
      case ViscosityKind::Layered:
        m = ViscosityModel::layered();
        break;
      case ViscosityKind::QuasiPeriodic:
        m = ViscosityModel::quasi_periodic();
        break;
      case ViscosityKind::SeparableMacro:
        m = ViscosityModel::separable_macro();
        break;
    }
  }
  m.nu = s.num("nu", m.nu);
  m.amp = s.num("amp", m.amp);
  m.beta = s.num("beta", m.beta);
  m.a_minus = s.num("a_minus", m.a_minus);
  m.a_plus = s.num("a_plus", m.a_plus);
  m.delta = s.num("delta", m.delta);
  m.omega1 = s.num("omega1", m.omega1);
  m.omega2 = s.num("omega2", m.omega2);
  m.macro_amp = s.num("macro_amp", m.macro_amp);
  m.gamma = s.num("gamma", m.gamma);
  try {
    m.validate();
  } catch (const CoefficientError& e) {
    const std::string what = e.what();
    const std::string first = what.substr(0, what.find(' '));
    throw ConfigError(first.rfind("viscosity.", 0) == 0 ? first : "viscosity", what);
  }
  return m;
}

std::vector<double> poly(const toml::table& t, std::string_view k, const std::string& key) {
  const toml::node* n = t.get(k);
  if (!n) return {};
  const auto* arr = n->as_array();
  if (!arr) throw ConfigError(key, fmt::format("{} must be an array of coefficients", key));
  std::vector<double> out;
  for (const auto& e : *arr) out.push_back(Section::as_number(e, key));
  return out;
}

std::vector<TestFunction> read_test_functions(const toml::table* harness) {
  std::vector<TestFunction> out;
  if (!harness || !harness->contains("test_function")) return out;
  const auto* arr = harness->get("test_function")->as_array();
  if (!arr) throw ConfigError("harness.test_function", "harness.test_function must be an array of tables");
  std::size_t idx = 0;
  for (const auto& node : *arr) {
    const std::string base = fmt::format("harness.test_function[{}]", idx++);
    const auto* t = node.as_table();
    if (!t) throw ConfigError(base, fmt::format("{} must be a table", base));
    const Section sec(t, base, {"name", "poly_t", "poly_x1", "poly_x2"});
    TestFunction psi;
    psi.name = sec.str("name", base);
    psi.poly_t = poly(*t, "poly_t", sec.key("poly_t"));
    psi.poly_x1 = poly(*t, "poly_x1", sec.key("poly_x1"));
    psi.poly_x2 = poly(*t, "poly_x2", sec.key("poly_x2"));
    out.push_back(std::move(psi));
  }
  return out;
}

RunConfig build(const toml::table& root) {
  static const std::set<std::string_view> sections{"grid",    "homogenized", "cell",     "viscosity", "physics",
                                                   "forcing", "time",        "initial",  "solver",    "harness",
                                                   "meanvalue", "output"};
  for (const auto& [k, v] : root)
    if (!sections.count(k.str())) throw ConfigError(std::string(k.str()), fmt::format("unknown key '{}'", k.str()));

  RunConfig c;
  {
    const Section s(subtable(root, "grid"), "grid", {"nx", "ny", "lx", "ly", "periodic_x", "periodic_y"});
    c.grid = read_grid(s, c.grid, true);
  }
  {
    const Section s(subtable(root, "homogenized"), "homogenized", {"nx", "ny", "macro_lattice"});
    c.homog_grid = c.grid;
    c.homog_grid.nx = s.count("nx", 64, 4);
    c.homog_grid.ny = s.count("ny", 64, 4);
    c.macro_lattice = s.count("macro_lattice", c.macro_lattice, 2);
  }
  {
    const Section s(subtable(root, "cell"), "cell",
                    {"nx", "ny", "n_tau", "tol", "max_iter", "truncation_radii", "truncation_cells_per_unit",
                     "macro_point"});
    c.cell_grid = GridSpec::periodic(s.count("nx", 64, 4), s.count("ny", 64, 4));
    c.cell.n_tau = s.count("n_tau", c.cell.n_tau);
    c.cell.solve.tol = s.positive("tol", c.cell.solve.tol);
    c.cell.solve.max_iter = s.count("max_iter", c.cell.solve.max_iter);
    c.truncation_radii = s.nums("truncation_radii", c.truncation_radii);
    for (double r : c.truncation_radii)
      if (!(r > 0.0)) throw ConfigError(s.key("truncation_radii"), "cell.truncation_radii must be > 0");
    c.truncation_cells_per_unit = s.positive("truncation_cells_per_unit", c.truncation_cells_per_unit);
    const auto mp = s.nums("macro_point", {c.macro_point.x1, c.macro_point.x2});
    if (mp.size() != 2) throw ConfigError(s.key("macro_point"), "cell.macro_point must have two entries");
    c.macro_point.x1 = mp[0];
    c.macro_point.x2 = mp[1];
  }
  {
    const Section s(subtable(root, "viscosity"), "viscosity",
                    {"model", "epsilon", "nu", "amp", "beta", "a_minus", "a_plus", "delta", "omega1", "omega2",
                     "macro_amp", "gamma"});
    c.viscosity = read_viscosity(s);
    if (s.has("epsilon")) c.epsilon = s.positive("epsilon", 1.0);
  }
  {
    const Section s(subtable(root, "physics"), "physics", {"kappa", "lambda", "alpha"});
    c.physics.kappa = s.num("kappa", c.physics.kappa);
    c.physics.lambda = s.num("lambda", c.physics.lambda);
    c.physics.alpha = s.num("alpha", c.physics.alpha);
  }
  {
    const Section s(subtable(root, "forcing"), "forcing", {"kind", "amp", "direction"});
    const std::string kind = s.str("kind", "none");
    if (kind == "none") c.physics.forcing.kind = Forcing::Kind::None;
    else if (kind == "uniform") c.physics.forcing.kind = Forcing::Kind::Uniform;
    else if (kind == "swirl") c.physics.forcing.kind = Forcing::Kind::Swirl;
    else throw ConfigError(s.key("kind"), fmt::format("forcing.kind = '{}' is not one of none, uniform, swirl", kind));
    c.physics.forcing.amp = s.num("amp", 0.0);
    const auto d = s.nums("direction", {1.0, 0.0});
    if (d.size() != 2) throw ConfigError(s.key("direction"), "forcing.direction must have two entries");
    c.physics.forcing.dir = {d[0], d[1]};
  }
  try {
    (void)c.physics.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    throw ConfigError(what.substr(0, what.find(' ')), what);
  }
  {
    const Section s(subtable(root, "time"), "time", {"dt", "T", "snapshot_stride", "cfl_diffusive_factor"});
    c.time.dt = s.positive("dt", c.time.dt);
    c.time.T = s.positive("T", c.time.T);
    c.time.snapshot_stride = s.count("snapshot_stride", c.time.snapshot_stride);
    c.time.cfl_diffusive_factor = s.positive("cfl_diffusive_factor", c.time.cfl_diffusive_factor);
    if (c.time.T < c.time.dt) throw ConfigError("time.T", "time.T must be >= time.dt");
    SimulationSetup probe;
    probe.time = c.time;
    try {
      (void)probe.steps();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("time.T", e.what());
    }
  }
  {
    const Section s(subtable(root, "initial"), "initial",
                    {"center", "semi_axes", "width", "phi_shift", "velocity", "velocity_amp"});
    const auto ctr = s.nums("center", {c.init.cx, c.init.cy});
    const auto ax = s.nums("semi_axes", {c.init.ax, c.init.ay});
    if (ctr.size() != 2) throw ConfigError(s.key("center"), "initial.center must have two entries");
    if (ax.size() != 2 || !(ax[0] > 0.0) || !(ax[1] > 0.0))
      throw ConfigError(s.key("semi_axes"), "initial.semi_axes must be two positive numbers");
    c.init.cx = ctr[0];
    c.init.cy = ctr[1];
    c.init.ax = ax[0];
    c.init.ay = ax[1];
    c.init.width = s.positive("width", c.init.width);
    c.init.phi_shift = s.num("phi_shift", c.init.phi_shift);
    const std::string v = s.str("velocity", "zero");
    if (v == "zero") c.init.velocity = InitialData::Velocity::Zero;
    else if (v == "vortex") c.init.velocity = InitialData::Velocity::Vortex;
    else throw ConfigError(s.key("velocity"), fmt::format("initial.velocity = '{}' is not one of zero, vortex", v));
    c.init.velocity_amp = s.num("velocity_amp", c.init.velocity_amp);
  }
  {
    const Section s(subtable(root, "solver"), "solver", {"ns_tol", "ns_max_iter", "ch_stabilization"});
    c.solver.ns_tol = s.positive("ns_tol", c.solver.ns_tol);
    c.solver.ns_max_iter = s.count("ns_max_iter", c.solver.ns_max_iter);
    if (s.has("ch_stabilization")) {
      c.solver.ch_stabilization = s.num("ch_stabilization", 0.0);
      if (c.solver.ch_stabilization < 0.0)
        throw ConfigError(s.key("ch_stabilization"), "solver.ch_stabilization must be >= 0");
    }
  }
  {
    const toml::table* h = subtable(root, "harness");
    const Section s(h, "harness", {"epsilons", "reference", "test_function"});
    c.epsilons = s.nums("epsilons", c.epsilons);
    for (double e : c.epsilons)
      if (!(e > 0.0)) throw ConfigError(s.key("epsilons"), "harness.epsilons must be > 0");
    const std::string ref = s.str("reference", "homogenized");
    if (ref != "homogenized" && ref != "resolved")
      throw ConfigError(s.key("reference"), "harness.reference must be 'homogenized' or 'resolved'");
    c.resolved_reference = ref == "resolved";
    c.test_functions = read_test_functions(h);
  }
  {
    const Section s(subtable(root, "meanvalue"), "meanvalue", {"points_per_wavelength", "tol"});
    c.mv_points_per_wavelength = s.count("points_per_wavelength", c.mv_points_per_wavelength, 2);
    c.mv_tol = s.positive("tol", c.mv_tol);
  }
  {
    const Section s(subtable(root, "output"), "output", {"dir"});
    c.output_dir = s.str("dir", "");
  }
  c.hash = fnv1a_hex(canonical_json(c));
  return c;
}

}  // namespace

SimulationSetup RunConfig::simulation_setup(const GridSpec& g) const {
  SimulationSetup s;
  s.grid = g;
  s.phys = physics;
  s.time = time;
  s.init = init;
  s.solver = solver;
  s.config_hash = hash;
  return s;
}

StudySetup RunConfig::study_setup(std::size_t jobs) const {
  StudySetup s;
  s.hetero = simulation_setup(grid);
  s.homog_grid = homog_grid;
  s.model = viscosity;
  s.cell_grid = cell_grid;
  s.cell = cell;
  s.cell.jobs = jobs;
  s.macro_lattice = macro_lattice;
  s.truncation_radii = truncation_radii;
  s.truncation_cells_per_unit = truncation_cells_per_unit;
  s.test_functions = test_functions;
  s.resolved_reference = resolved_reference;
  s.jobs = jobs;
  return s;
}

RunConfig parse_config_string(std::string_view text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    const auto& b = e.source().begin;
    throw ConfigError("", fmt::format("{}:{}:{}: TOML syntax error: {}", source, b.line, b.column, e.description()));
  }
  return build(root);
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", fmt::format("cannot open config file '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str(), path);
}

std::string canonical_json(const RunConfig& c) {
  using nlohmann::ordered_json;
  auto grid = [](const GridSpec& g) {
    return ordered_json{{"nx", g.nx},
                        {"ny", g.ny},
                        {"lx", g.lx},
                        {"ly", g.ly},
                        {"periodic_x", g.periodic_x},
                        {"periodic_y", g.periodic_y}};
  };
  const ViscosityModel& m = c.viscosity;
  ordered_json j;
  j["grid"] = grid(c.grid);
  j["homogenized"] = {{"grid", grid(c.homog_grid)}, {"macro_lattice", c.macro_lattice}};
  j["cell"] = {{"grid", grid(c.cell_grid)},
               {"n_tau", c.cell.n_tau},
               {"tol", c.cell.solve.tol},
               {"max_iter", c.cell.solve.max_iter},
               {"truncation_radii", c.truncation_radii},
               {"truncation_cells_per_unit", c.truncation_cells_per_unit},
               {"macro_point", {c.macro_point.x1, c.macro_point.x2}}};
  j["viscosity"] = {{"model", to_string(m.kind)}, {"nu", m.nu},         {"amp", m.amp},
                    {"beta", m.beta},             {"a_minus", m.a_minus}, {"a_plus", m.a_plus},
                    {"delta", m.delta},           {"omega1", m.omega1},   {"omega2", m.omega2},
                    {"macro_amp", m.macro_amp},   {"gamma", m.gamma}};
  j["viscosity"]["epsilon"] = c.epsilon ? ordered_json(*c.epsilon) : ordered_json(nullptr);
  j["physics"] = {{"kappa", c.physics.kappa}, {"lambda", c.physics.lambda}, {"alpha", c.physics.alpha}};
  j["forcing"] = {{"kind", to_string(c.physics.forcing.kind)},
                  {"amp", c.physics.forcing.amp},
                  {"direction", c.physics.forcing.dir}};
  j["time"] = {{"dt", c.time.dt},
               {"T", c.time.T},
               {"snapshot_stride", c.time.snapshot_stride},
               {"cfl_diffusive_factor", c.time.cfl_diffusive_factor}};
  j["initial"] = {{"center", {c.init.cx, c.init.cy}}, {"semi_axes", {c.init.ax, c.init.ay}},
                  {"width", c.init.width},            {"phi_shift", c.init.phi_shift},
                  {"velocity", to_string(c.init.velocity)}, {"velocity_amp", c.init.velocity_amp}};
  j["solver"] = {{"ns_tol", c.solver.ns_tol},
                 {"ns_max_iter", c.solver.ns_max_iter},
                 {"ch_stabilization", c.solver.ch_stabilization}};
  ordered_json tf = ordered_json::array();
  for (const auto& psi : c.test_functions)
    tf.push_back({{"name", psi.name}, {"poly_t", psi.poly_t}, {"poly_x1", psi.poly_x1}, {"poly_x2", psi.poly_x2}});
  j["harness"] = {{"epsilons", c.epsilons},
                  {"reference", c.resolved_reference ? "resolved" : "homogenized"},
                  {"test_function", tf}};
  j["meanvalue"] = {{"points_per_wavelength", c.mv_points_per_wavelength}, {"tol", c.mv_tol}};
  // output.dir only names where artifacts go; it does not enter the hash.
  return j.dump();
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string config_schema() {
  return R"(# chns configuration (TOML). Every key is optional; unknown keys are errors.

[grid]                        # heterogeneous / simulation grid on [0,lx] x [0,ly]
nx = 128                      # integer >= 4
ny = 128
lx = 1.0
ly = 1.0
periodic_x = false            # false: no-slip walls, Neumann for phi and mu
periodic_y = false

[homogenized]                 # macro grid of homogenized runs (same domain as [grid])
nx = 64
ny = 64
macro_lattice = 9             # tensor table nodes per axis for macro-dependent models

[cell]                        # periodic unit cell
nx = 64
ny = 64
n_tau = 8                     # fast-time midpoints (forced to 1 for tau-independent models)
tol = 1e-10                   # RMS momentum residual
max_iter = 5000
truncation_radii = [4.0, 8.0, 16.0]   # quasi-periodic model: box half-widths R
truncation_cells_per_unit = 8.0
macro_point = [0.5, 0.5]      # x at which `chns cell` reports the tensor

[viscosity]
model = "layered"             # constant | smooth_periodic | anisotropic | layered | quasi_periodic | separable_macro
epsilon = 0.125               # scale for `simulate --mode heterogeneous` (overridden by --epsilon)
# model parameters; defaults depend on the model
nu = 1.0
amp = 0.5
beta = 0.0
a_minus = 1.0
a_plus = 2.0
delta = 0.3
omega1 = 1.0
omega2 = 1.4142135623730951
macro_amp = 0.2
gamma = 0.5                   # ellipticity bound: eigenvalues in [gamma, 1/gamma]

[physics]
kappa = 1.0                   # > 0
lambda = 0.01                 # > 0, warning unless lambda < alpha
alpha = 0.1                   # > 0

[forcing]
kind = "none"                 # none | uniform | swirl
amp = 0.0
direction = [1.0, 0.0]        # uniform forcing direction

[time]
dt = 0.0009765625
T = 0.25                      # positive multiple of dt
snapshot_stride = 16
cfl_diffusive_factor = 1000.0 # dt <= 0.5 min(h/|u|max, h^2 * factor)

[initial]
center = [0.5, 0.5]           # tanh ellipse blob for phi
semi_axes = [0.3, 0.2]
width = 0.05
phi_shift = 0.0
velocity = "zero"             # zero | vortex
velocity_amp = 0.0

[solver]
ns_tol = 1e-10                # relative residual of the implicit viscous solve
ns_max_iter = 2000
ch_stabilization = 0.2        # S; defaults to 2 * alpha

[harness]
epsilons = [0.25, 0.125, 0.0625]
reference = "homogenized"     # homogenized | resolved
# [[harness.test_function]]   # pairing functions psi(t,x) = p_t(t) p_1(x1) p_2(x2)
# name = "psi"
# poly_t = [1.0, 1.0]         # coefficients, lowest degree first
# poly_x1 = [0.0, 1.0]
# poly_x2 = [0.0, 0.0, 1.0]

[meanvalue]
points_per_wavelength = 16
tol = 1e-3

[output]
dir = ""                      # informational; commands write to --out
)";
}

}  // namespace chns
