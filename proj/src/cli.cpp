#include "chns/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "chns/harness.hpp"
#include "chns/log.hpp"
#include "chns/meanvalue.hpp"

namespace chns {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path));
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what, fmt::format("--{}: '{}' is not a number", what, item));
    }
  }
  if (out.empty()) throw ConfigError(what, fmt::format("--{} is empty", what));
  return out;
}

ordered_json model_json(const ViscosityModel& m) {
  return {{"kind", to_string(m.kind)}, {"nu", m.nu},         {"amp", m.amp},
          {"beta", m.beta},            {"a_minus", m.a_minus}, {"a_plus", m.a_plus},
          {"delta", m.delta},          {"omega1", m.omega1},   {"omega2", m.omega2},
          {"macro_amp", m.macro_amp},  {"gamma", m.gamma}};
}

ordered_json tensor_array(const Tensor4& t) { return ordered_json(std::vector<double>(t.a.begin(), t.a.end())); }

Tensor4 tensor_from(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 16) throw std::runtime_error(fmt::format("{}: expected 16 numbers", what));
  Tensor4 t;
  for (std::size_t k = 0; k < 16; ++k) t.a[k] = j[k].get<double>();
  return t;
}

// Divergence-free MAC field from a random discrete stream function.
StaggeredVecField random_solenoidal(const GridSpec& g, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Array2D psi(g.nx + 1, g.ny + 1);
  for (double& v : psi.flat()) v = d(rng);
  if (g.periodic_x) {
    for (std::size_t j = 0; j <= g.ny; ++j) psi(g.nx, j) = psi(0, j);
  } else {
    for (std::size_t j = 0; j <= g.ny; ++j) psi(0, j) = psi(g.nx, j) = 0.0;
  }
  if (g.periodic_y) {
    for (std::size_t i = 0; i <= g.nx; ++i) psi(i, g.ny) = psi(i, 0);
  } else {
    for (std::size_t i = 0; i <= g.nx; ++i) psi(i, 0) = psi(i, g.ny) = 0.0;
  }
  StaggeredVecField u(g);
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i <= g.nx; ++i) u.ux(i, j) = (psi(i, j + 1) - psi(i, j)) / g.hy();
  for (std::size_t j = 0; j <= g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) u.uy(i, j) = -(psi(i + 1, j) - psi(i, j)) / g.hx();
  apply_no_slip(u, g);
  sync_periodic(u, g);
  return u;
}

StaggeredVecField random_faces(const GridSpec& g, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  StaggeredVecField u(g);
  for (double& v : u.ux.flat()) v = d(rng);
  for (double& v : u.uy.flat()) v = d(rng);
  apply_no_slip(u, g);
  sync_periodic(u, g);
  return u;
}

CellField random_cells(const GridSpec& g, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  CellField f(g);
  for (double& v : f.flat()) v = d(rng);
  return f;
}

// ---------------------------------------------------------------------------
// Commands

struct Globals {
  std::size_t jobs = 1;
};

int cmd_cell(const std::string& config, const std::string& out, const Globals& gl) {
  const RunConfig cfg = parse_config(config);
  log::info("cell", "model {} on a {}x{} cell grid, config {}", to_string(cfg.viscosity.kind), cfg.cell_grid.nx,
            cfg.cell_grid.ny, cfg.hash);
  const auto t0 = std::chrono::steady_clock::now();
  const TensorArtifact a = compute_tensor_artifact(cfg, gl.jobs);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto range = a.tensor.ellipticity_range();
  log::info("cell", "done in {:.2f} s; symmetry defect {:.2e}, ellipticity [{:.6g}, {:.6g}]", secs,
            a.tensor.symmetry_defect(), range[0], range[1]);
  write_text(out, tensor_json(a, cfg));
  log::info("cell", "wrote {}", out);
  return kExitOk;
}

int cmd_simulate(const std::string& config, const std::string& mode, std::optional<double> eps,
                 const std::string& tensor_path, const std::string& out, const Globals& gl) {
  const RunConfig cfg = parse_config(config);
  std::optional<Coefficient> coeff;
  SimulationSetup setup;
  ordered_json info;
  info["config_hash"] = cfg.hash;
  info["mode"] = mode;
  if (mode == "heterogeneous") {
    if (!tensor_path.empty()) throw ConfigError("tensor", "--tensor is only valid with --mode homogenized");
    const std::optional<double> e = eps ? eps : cfg.epsilon;
    if (!e) throw ConfigError("viscosity.epsilon", "heterogeneous mode needs --epsilon or viscosity.epsilon");
    if (!(*e > 0.0)) throw ConfigError("epsilon", "epsilon must be > 0");
    setup = cfg.simulation_setup(cfg.grid);
    try {
      check_resolvable(cfg.viscosity, *e, setup.grid);
    } catch (const StructuralError& ex) {
      log::warn("simulate", "{}", ex.what());
    }
    coeff = Coefficient::heterogeneous(cfg.viscosity, *e);
    info["epsilon"] = *e;
    info["model"] = model_json(cfg.viscosity);
  } else if (mode == "homogenized") {
    if (eps) throw ConfigError("epsilon", "--epsilon is only valid with --mode heterogeneous");
    setup = cfg.simulation_setup(cfg.homog_grid);
    MacroTensorField field;
    if (!tensor_path.empty()) {
      field = read_tensor_json(tensor_path);
      info["tensor_source"] = tensor_path;
    } else {
      log::info("simulate", "computing the effective tensor");
      field = compute_tensor_artifact(cfg, gl.jobs).field;
      info["tensor_source"] = "computed";
    }
    info["a_hat"] = tensor_array(field.values().front());
    coeff = Coefficient::homogenized(std::move(field));
  } else {
    throw ConfigError("mode", fmt::format("--mode must be heterogeneous or homogenized, got '{}'", mode));
  }
  log::info("simulate", "{} run on {}x{}, config {}", mode, setup.grid.nx, setup.grid.ny, cfg.hash);
  fs::create_directories(out);
  write_text((fs::path(out) / "coefficient.json").string(), info.dump(2) + "\n");
  DirectoryWriter writer(out, setup, mode);
  RunOptions opts;
  opts.sink = &writer;
  opts.keep_snapshots = false;
  const SimulationResult r = run_simulation(setup, *coeff, opts);
  log::info("simulate", "wrote {} ({} steps, E(T) = {:.10g})", out, r.steps, r.energies.back().total);
  return kExitOk;
}

int cmd_converge(const std::string& config, const std::string& epsilons, const std::string& reference,
                 const std::string& out, const Globals& gl) {
  RunConfig cfg = parse_config(config);
  if (!epsilons.empty()) cfg.epsilons = parse_list(epsilons, "epsilons");
  if (!reference.empty()) {
    if (reference != "resolved" && reference != "homogenized")
      throw ConfigError("reference", "--reference must be 'resolved' or 'homogenized'");
    cfg.resolved_reference = reference == "resolved";
  }
  log::info("converge", "{} epsilons on {}x{} against a {}x{} homogenized run, config {}", cfg.epsilons.size(),
            cfg.grid.nx, cfg.grid.ny, cfg.homog_grid.nx, cfg.homog_grid.ny, cfg.hash);
  const ConvergenceReport rep = convergence_study(cfg.study_setup(gl.jobs), cfg.epsilons);
  write_text(out, to_csv(rep));
  log::info("converge", "wrote {}", out);
  return kExitOk;
}

int cmd_meanvalue(const std::string& model_name, const std::string& radii_text, const std::string& config,
                  const std::string& out) {
  RunConfig cfg;
  if (!config.empty()) cfg = parse_config(config);
  ViscosityModel m;
  {
    std::string text = fmt::format("[viscosity]\nmodel = \"{}\"\n", model_name);
    const RunConfig probe = parse_config_string(text, "--model");
    m = (!config.empty() && probe.viscosity.kind == cfg.viscosity.kind) ? cfg.viscosity : probe.viscosity;
  }
  const std::vector<double> radii = parse_list(radii_text, "radii");
  for (double r : radii)
    if (!(r > 0.0)) throw ConfigError("radii", "--radii entries must be > 0");
  MeanValueOptions opts;
  opts.dim = m.depends_on_y2() ? 2 : 1;
  opts.max_frequency = std::max(m.max_frequency(), 2.0 * 3.141592653589793);
  opts.points_per_wavelength = cfg.mv_points_per_wavelength;
  opts.tol = cfg.mv_tol;
  const MacroPoint x = cfg.macro_point;
  const Sampler f = [&](std::span<const double> y) {
    return m.sample(x.t, x.x1, x.x2, 0.0, y[0], y.size() > 1 ? y[1] : 0.0).a11;
  };
  log::info("meanvalue", "a11 of {} over [-R,R]^{} at tau = 0", to_string(m.kind), opts.dim);
  const MeanValueEstimate est = mean_value(f, radii, opts);
  ordered_json key;
  key["model"] = model_json(m);
  key["radii"] = radii;
  key["dim"] = opts.dim;
  key["points_per_wavelength"] = opts.points_per_wavelength;
  key["macro_point"] = {x.x1, x.x2};
  const std::string hash = fnv1a_hex(key.dump());
  std::string csv = fmt::format("# config_hash={} model={} mean={:.17g} converged={}\n", hash, to_string(m.kind),
                                est.value, est.converged ? "true" : "false");
  csv += "R,partial_average\n";
  for (std::size_t k = 0; k < est.radii.size(); ++k) csv += fmt::format("{:.17g},{:.17g}\n", est.radii[k], est.partials[k]);
  if (out.empty()) {
    std::fwrite(csv.data(), 1, csv.size(), stdout);
  } else {
    write_text(out, csv);
    log::info("meanvalue", "wrote {}", out);
  }
  return kExitOk;
}

int cmd_verify(const std::string& config) {
  const RunConfig cfg = parse_config(config);
  log::info("verify", "config {}", cfg.hash);
  const auto rows = verify_suite(cfg);
  bool all = true;
  std::string table = fmt::format("{:<34} {:<6} {:>12} {:>12}\n", "check", "result", "value", "threshold");
  for (const auto& r : rows) {
    all = all && r.pass;
    table += fmt::format("{:<34} {:<6} {:>12.3e} {:>12.3e}\n", r.name, r.pass ? "PASS" : "FAIL", r.value, r.threshold);
  }
  std::fwrite(table.data(), 1, table.size(), stdout);
  return all ? kExitOk : kExitCheckFailed;
}

void print_error(const char* kind, const std::string& key, const std::string& message) {
  const ordered_json j = {{"error", {{"kind", kind}, {"key", key}, {"message", message}}}};
  std::fprintf(stderr, "%s\n", j.dump().c_str());
}

}  // namespace

// ---------------------------------------------------------------------------

TensorArtifact compute_tensor_artifact(const RunConfig& cfg, std::size_t jobs) {
  EffectiveTensorOptions opts = cfg.cell;
  opts.jobs = jobs;
  const ViscosityModel& m = cfg.viscosity;
  TensorArtifact a;
  if (!m.is_periodic()) {
    const TruncatedTensor tt =
        effective_tensor_truncated(m, cfg.macro_point, cfg.truncation_radii, cfg.truncation_cells_per_unit, opts);
    if (tt.warning) log::warn("cell", "{}", *tt.warning);
    a.tensor = tt.tensor;
    a.truncation_defects = tt.defects;
    a.field = MacroTensorField(tt.tensor.a_hat);
    return a;
  }
  a.tensor = effective_tensor(m, cfg.macro_point, cfg.cell_grid, opts);
  if (m.depends_on_macro()) {
    log::info("cell", "tabulating {}x{} macro lattice", cfg.macro_lattice, cfg.macro_lattice);
    a.field = MacroTensorField::tabulate(m, cfg.macro_point.t, cfg.homog_grid, cfg.macro_lattice, cfg.cell_grid, opts);
  } else {
    a.field = MacroTensorField(a.tensor.a_hat);
  }
  return a;
}

std::string tensor_json(const TensorArtifact& a, const RunConfig& cfg) {
  const EffectiveTensor& t = a.tensor;
  ordered_json j;
  j["config_hash"] = cfg.hash;
  j["a_hat"] = tensor_array(t.a_hat);
  j["model"] = model_json(cfg.viscosity);
  j["grid"] = {{"nx", t.grid.nx}, {"ny", t.grid.ny}, {"lx", t.grid.lx}, {"ly", t.grid.ly}};
  j["n_tau"] = t.n_tau;
  j["tol"] = t.tol;
  j["residuals"] = t.residuals;
  j["macro_point"] = {cfg.macro_point.t, cfg.macro_point.x1, cfg.macro_point.x2};
  j["symmetry_defect"] = t.symmetry_defect();
  const auto range = t.ellipticity_range();
  j["ellipticity_range"] = {range[0], range[1]};
  j["assembly_defect"] = t.assembly_defect;
  if (!a.truncation_defects.empty()) {
    j["truncation"] = {{"radii", cfg.truncation_radii}, {"defects", a.truncation_defects}};
  }
  if (!a.field.is_constant()) {
    ordered_json vals = ordered_json::array();
    for (const auto& v : a.field.values()) vals.push_back(tensor_array(v));
    j["lattice"] = {{"nx", a.field.nx()},
                    {"ny", a.field.ny()},
                    {"lx", cfg.homog_grid.lx},
                    {"ly", cfg.homog_grid.ly},
                    {"values", vals}};
  }
  return j.dump(2) + "\n";
}

MacroTensorField read_tensor_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("tensor", fmt::format("cannot open tensor file '{}'", path));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("tensor", fmt::format("'{}' is not valid JSON: {}", path, e.what()));
  }
  if (!j.contains("a_hat")) throw ConfigError("tensor", fmt::format("'{}' has no a_hat entry", path));
  const Tensor4 a = tensor_from(j["a_hat"], path + ": a_hat");
  if (!j.contains("lattice")) return MacroTensorField(a);
  const auto& l = j["lattice"];
  std::vector<Tensor4> values;
  for (const auto& v : l.at("values")) values.push_back(tensor_from(v, path + ": lattice value"));
  return {l.at("nx").get<std::size_t>(), l.at("ny").get<std::size_t>(), l.at("lx").get<double>(),
          l.at("ly").get<double>(), std::move(values)};
}

std::vector<VerifyRow> verify_suite(const RunConfig& cfg) {
  std::vector<VerifyRow> rows;
  auto add = [&](std::string name, double value, double threshold) {
    rows.push_back({std::move(name), value <= threshold, value, threshold});
  };
  const GridSpec& g = cfg.grid;
  const ViscosityModel& m = cfg.viscosity;

  const EllipticityReport er = verify_ellipticity(m, 4096);
  const double ell_violation = std::max({0.0, m.gamma - er.min_eig, er.max_eig - 1.0 / m.gamma});
  add("viscosity ellipticity probe", ell_violation, 0.0);

  {
    const StaggeredVecField u = random_faces(g, 1);
    const CellField p = random_cells(g, 2);
    const double lhs = cell_inner(divergence(u, g), p, g);
    const double rhs = -face_inner(u, gradient(p, g), g);
    add("div/grad adjointness", std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)), 1e-12);
  }
  {
    const double eps = cfg.epsilon.value_or(0.125);
    const VelocityCoefficients a = Coefficient::heterogeneous(m, eps).sample(g, 0.0);
    const StaggeredVecField u = random_faces(g, 3);
    const StaggeredVecField v = random_faces(g, 4);
    StaggeredVecField lu(g), lv(g);
    apply_viscous(g, a, u, lu);
    apply_viscous(g, a, v, lv);
    const double x = face_inner(lu, v, g);
    const double y = face_inner(u, lv, g);
    add("viscous operator symmetry", std::abs(x - y) / std::max(1.0, std::abs(x)), 1e-11);
    add("viscous operator positivity", face_inner(lu, u, g) > 0.0 ? 0.0 : 1.0, 0.0);
  }
  {
    const StaggeredVecField a = random_solenoidal(g, 5);
    const StaggeredVecField v = random_faces(g, 6);
    const double s = face_inner(convect(a, v, g), v, g);
    add("convection skew-symmetry", std::abs(s) / std::max(1.0, face_inner(v, v, g)), 1e-12);
  }
  {
    const GridSpec cg = GridSpec::periodic(32, 32);
    const EffectiveTensor t = effective_tensor(ViscosityModel::constant(1.0), {}, cg, {});
    double dev = 0.0;
    const Tensor4 id = Tensor4::isotropic(1.0);
    for (std::size_t k = 0; k < 16; ++k) dev = std::max(dev, std::abs(t.a_hat.a[k] - id.a[k]));
    add("cell problem, constant model", dev, 1e-10);
  }
  {
    const GridSpec cg = GridSpec::periodic(32, 32);
    EffectiveTensorOptions o = cfg.cell;
    o.n_tau = std::min<std::size_t>(o.n_tau, 4);
    EffectiveTensor t;
    if (m.is_periodic()) {
      t = effective_tensor(m, cfg.macro_point, cg, o);
    } else {
      t = effective_tensor_truncated(m, cfg.macro_point, {4.0}, cfg.truncation_cells_per_unit, o).tensor;
    }
    add("effective tensor symmetry", t.symmetry_defect(), 1e-8);
    const auto r = t.ellipticity_range();
    add("effective tensor ellipticity", std::max({0.0, m.gamma - 1e-6 - r[0], r[1] - 1.0 / m.gamma - 1e-6}), 0.0);
  }
  {
    SimulationSetup s = cfg.simulation_setup(GridSpec::box(32, 32, g.lx, g.ly));
    s.grid.periodic_x = g.periodic_x;
    s.grid.periodic_y = g.periodic_y;
    StaggeredState st = initial_state(s);
    st.u = random_solenoidal(s.grid, 7);
    st.u *= 0.1;
    const double m0 = st.phi.sum();
    ch_substep(st, s.time.dt, s.phys, s.grid, s.solver.ch_stabilization);
    add("Cahn-Hilliard mass conservation", std::abs(st.phi.sum() - m0) / std::max(1.0, std::abs(m0)), 1e-12);
    ns_substep(st, s.time.dt, Coefficient::heterogeneous(m, cfg.epsilon.value_or(0.125)), s.phys, s.grid);
    add("projection divergence", divergence(st.u, s.grid).max_abs(), 1e-10);
  }
  return rows;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Numerical homogenization of Cahn-Hilliard-Navier-Stokes flow with oscillating viscosity", "chns"};
  app.set_version_flag("--version", kVersion);
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(0, 1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals gl;
  bool schema = false;
  bool quiet = false;
  bool verbose = false;
  app.add_option("--jobs,-j", gl.jobs, "worker threads for cell solves and epsilon runs")->check(CLI::PositiveNumber);
  app.add_flag("--config-schema", schema, "print the documented configuration keys and exit");
  app.add_flag("--quiet,-q", quiet, "only warnings and errors on stderr");
  app.add_flag("--verbose,-v", verbose, "debug logging");

  std::string config;
  std::string out;

  auto* cell = app.add_subcommand("cell", "effective tensor from the periodic cell problem");
  cell->add_option("--config", config, "TOML configuration")->required()->check(CLI::ExistingFile);
  cell->add_option("--out", out, "tensor JSON file")->required();

  std::string mode;
  std::optional<double> eps;
  std::string tensor;
  auto* sim = app.add_subcommand("simulate", "time-dependent heterogeneous or homogenized run");
  sim->add_option("--config", config, "TOML configuration")->required()->check(CLI::ExistingFile);
  sim->add_option("--mode", mode, "heterogeneous | homogenized")
      ->required()
      ->check(CLI::IsMember({"heterogeneous", "homogenized"}));
  sim->add_option("--epsilon", eps, "oscillation scale (heterogeneous)");
  sim->add_option("--tensor", tensor, "tensor JSON from `chns cell` (homogenized)")->check(CLI::ExistingFile);
  sim->add_option("--out", out, "output directory")->required();

  std::string epsilons;
  std::string reference;
  auto* conv = app.add_subcommand("converge", "epsilon sweep against the homogenized run");
  conv->add_option("--config", config, "TOML configuration")->required()->check(CLI::ExistingFile);
  conv->add_option("--epsilons", epsilons, "comma-separated, strictly decreasing");
  conv->add_option("--reference", reference, "homogenized | resolved")
      ->check(CLI::IsMember({"homogenized", "resolved"}));
  conv->add_option("--out", out, "report CSV file")->required();

  std::string model;
  std::string radii;
  auto* mv = app.add_subcommand("meanvalue", "partial averages of a viscosity model over growing boxes");
  mv->add_option("--model", model, "viscosity model name")->required();
  mv->add_option("--radii", radii, "comma-separated box half-widths")->required();
  mv->add_option("--config", config, "TOML configuration (model parameters, quadrature)")->check(CLI::ExistingFile);
  mv->add_option("--out", out, "CSV file (default: stdout)");

  auto* ver = app.add_subcommand("verify", "built-in invariant checks");
  ver->add_option("--config", config, "TOML configuration")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (schema) {
    const std::string s = config_schema();
    std::fwrite(s.data(), 1, s.size(), stdout);
    return kExitOk;
  }
  log::set_level(quiet ? log::Level::Warn : verbose ? log::Level::Debug : log::Level::Info);
  if (app.get_subcommands().empty()) {
    std::fputs(app.help().c_str(), stderr);
    return kExitUsage;
  }

  try {
    if (*cell) return cmd_cell(config, out, gl);
    if (*sim) return cmd_simulate(config, mode, eps, tensor, out, gl);
    if (*conv) return cmd_converge(config, epsilons, reference, out, gl);
    if (*mv) return cmd_meanvalue(model, radii, config, out);
    if (*ver) return cmd_verify(config);
  } catch (const ConfigError& e) {
    print_error("config", e.key(), e.what());
    return kExitConfig;
  } catch (const StructuralError& e) {
    print_error("structural", "", e.what());
    return kExitRuntime;
  } catch (const CoefficientError& e) {
    print_error("coefficient", "", e.what());
    return kExitRuntime;
  } catch (const CellNonConvergence& e) {
    print_error("cell_non_convergence", "", e.what());
    return kExitRuntime;
  } catch (const StepSizeError& e) {
    print_error("step_size", "", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    print_error("runtime", "", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace chns
