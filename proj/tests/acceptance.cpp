// Acceptance run: one PASS/FAIL line per criterion on stdout, exit 0 iff all pass.
//   chns_acceptance [sweep.toml] [default.toml]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "chns/cell.hpp"
#include "chns/chns.hpp"
#include "chns/config.hpp"
#include "chns/harness.hpp"
#include "chns/log.hpp"
#include "chns/meanvalue.hpp"

using namespace chns;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_diff(const Tensor4& a, const Tensor4& b) {
  double d = 0.0;
  for (std::size_t e = 0; e < 16; ++e) d = std::max(d, std::abs(a.a[e] - b.a[e]));
  return d;
}

double max_diff(const Array2D& a, const Array2D& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a.flat()[k] - b.flat()[k]));
  return d;
}

// Flux form of the 1D cell ODE: a (1 + chi') is constant and equal to the harmonic mean.
std::vector<double> layered_ode(const ViscosityModel& m, std::size_t n) {
  const double h = 1.0 / static_cast<double>(n);
  std::vector<double> inv(n);
  double hm = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    inv[e] = 1.0 / m.sample(0, 0, 0, 0, (static_cast<double>(e) + 0.5) * h, 0).a11;
    hm += inv[e];
  }
  hm = static_cast<double>(n) / hm;
  std::vector<double> chi(n, 0.0);
  for (std::size_t e = 0; e + 1 < n; ++e) chi[e + 1] = chi[e] + h * (hm * inv[e] - 1.0);
  double mean = 0.0;
  for (double c : chi) mean += c;
  mean /= static_cast<double>(n);
  for (double& c : chi) c -= mean;
  return chi;
}

StaggeredVecField solenoidal(const GridSpec& g, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Array2D psi(g.nx + 1, g.ny + 1);
  for (std::size_t j = 1; j < g.ny; ++j)
    for (std::size_t i = 1; i < g.nx; ++i) psi(i, j) = d(rng);
  StaggeredVecField u(g);
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i <= g.nx; ++i) u.ux(i, j) = (psi(i, j + 1) - psi(i, j)) / g.hy();
  for (std::size_t j = 0; j <= g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) u.uy(i, j) = -(psi(i + 1, j) - psi(i, j)) / g.hx();
  return u;
}

// ---------------------------------------------------------------------------

Outcome trivial_homogenization() {
  const auto t0 = std::chrono::steady_clock::now();
  const EffectiveTensor t = effective_tensor(ViscosityModel::constant(1.0), {}, GridSpec::periodic(64, 64));
  const double secs = seconds_since(t0);
  const double dev = max_diff(t.a_hat, Tensor4::isotropic(1.0));
  return {dev <= 1e-10 && secs < 10.0, fmt::format("max deviation {:.2e} (<= 1e-10), {:.2f} s (< 10 s)", dev, secs)};
}

Outcome tensor_structure() {
  struct Case {
    const char* name;
    ViscosityModel m;
    MacroPoint x;
  };
  const std::vector<Case> cases{
      {"constant", ViscosityModel::constant(1.0), {}},
      {"smooth_periodic", ViscosityModel::smooth_periodic(), {}},
      {"anisotropic", ViscosityModel::anisotropic(), {}},
      {"layered", ViscosityModel::layered(), {}},
      {"quasi_periodic", ViscosityModel::quasi_periodic(), {}},
      {"separable_macro@(0.25,0.75)", ViscosityModel::separable_macro(), {0.0, 0.25, 0.75}},
      {"separable_macro@(0.5,0.5)", ViscosityModel::separable_macro(), {0.0, 0.5, 0.5}},
  };
  bool pass = true;
  std::string worst;
  double worst_sym = 0.0;
  for (const auto& c : cases) {
    EffectiveTensorOptions o;
    o.n_tau = 4;
    const EffectiveTensor t = c.m.is_periodic()
                                  ? effective_tensor(c.m, c.x, GridSpec::periodic(32, 32), o)
                                  : effective_tensor_truncated(c.m, c.x, {4.0, 8.0}, 8.0, o).tensor;
    const auto r = t.ellipticity_range();
    const double sym = t.symmetry_defect();
    const bool ok = sym <= 1e-8 && r[0] >= c.m.gamma - 1e-6 && r[1] <= 1.0 / c.m.gamma + 1e-6;
    if (!ok) {
      pass = false;
      worst += fmt::format(" {}: sym {:.1e} range [{:.4f}, {:.4f}] gamma {};", c.name, sym, r[0], r[1], c.m.gamma);
    }
    worst_sym = std::max(worst_sym, sym);
  }
  return {pass, fmt::format("{} models, worst symmetry defect {:.1e}{}", cases.size(), worst_sym, worst)};
}

Outcome layered_oracle() {
  const ViscosityModel m = ViscosityModel::layered();
  const std::size_t n = 1024;
  const GridSpec g = GridSpec::periodic(n, 8);
  const Corrector c = solve_cell_problem(m, {}, 0.0, UnitStrain{0, 1}, g);
  const auto chi = layered_ode(m, 10 * n);
  double err = 0.0;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(c.eta.uy(i, j) - chi[10 * i + 5]));

  const Tensor4 a64 = effective_tensor(m, {}, GridSpec::periodic(64, 64)).a_hat;
  const Tensor4 a128 = effective_tensor(m, {}, GridSpec::periodic(128, 128)).a_hat;
  const Tensor4 a256 = effective_tensor(m, {}, GridSpec::periodic(256, 256)).a_hat;
  const double scale = a256.max_abs();
  double rel = 0.0;
  for (std::size_t e = 0; e < 16; ++e) {
    const double ref = (4.0 * a256.a[e] - a128.a[e]) / 3.0;
    rel = std::max(rel, std::abs(a64.a[e] - ref) / std::max(std::abs(ref), 1e-3 * scale));
  }
  return {err <= 1e-6 && rel <= 0.01,
          fmt::format("corrector vs ODE {:.2e} (<= 1e-6); 64^2 tensor vs Richardson {:.3f}% (<= 1%)", err, 100 * rel)};
}

Outcome conservation(const RunConfig& cfg) {
  SimulationSetup s = cfg.simulation_setup(cfg.grid);
  if (s.steps() != 100) return {false, fmt::format("default config runs {} steps, expected 100", s.steps())};
  if (s.phys.forcing.kind != Forcing::Kind::None) return {false, "default config has forcing"};
  const Coefficient coeff = Coefficient::heterogeneous(cfg.viscosity, cfg.epsilon.value_or(0.125));
  const SimulationResult r = run_simulation(s, coeff);
  const auto& en = r.energies;
  const double m0 = en.front().mass;
  double mass = 0.0;
  double rise = -INFINITY;
  for (std::size_t k = 0; k < en.size(); ++k) {
    mass = std::max(mass, std::abs(en[k].mass - m0) / std::abs(m0));
    if (k > 0) rise = std::max(rise, (en[k].total - en[k - 1].total) / en.front().total);
  }
  double div = 0.0;
  for (const auto& d : r.diagnostics) div = std::max(div, d.div_max);

  // the trilinear form scales with |a| |v|^2, so the probes have unit L2 norm
  const GridSpec& g = s.grid;
  auto unit = [&](StaggeredVecField w) {
    w *= 1.0 / std::sqrt(face_inner(w, w, g));
    return w;
  };
  double skew = 0.0;
  const StaggeredVecField u = unit(r.snapshots.back().state.u);
  for (std::uint32_t seed : {1u, 2u, 3u}) {
    const StaggeredVecField a = unit(solenoidal(g, seed));
    const StaggeredVecField v = unit(solenoidal(g, seed + 10));
    skew = std::max(skew, std::abs(face_inner(convect(a, v, g), v, g)));
    skew = std::max(skew, std::abs(face_inner(convect(u, v, g), v, g)));
  }
  const bool pass = mass <= 1e-10 && rise <= 1e-10 && div <= 1e-10 && skew <= 1e-12;
  return {pass, fmt::format("{} steps: mass drift {:.1e}, max energy rise {:.1e} E(0), divergence {:.1e}, skew {:.1e}",
                            r.steps, mass, rise, div, skew)};
}

Outcome sweep(const ConvergenceReport& r, double secs) {
  const auto& e = r.epsilons;
  const bool grid_ok = e.size() == 3 && e[0] == 0.25 && e[1] == 0.125 && e[2] == 0.0625;
  if (!grid_ok) return {false, "sweep config must use epsilons 1/4, 1/8, 1/16"};
  const bool u_dec = r.err_u_l2[1] < r.err_u_l2[0] && r.err_u_l2[2] < r.err_u_l2[1];
  const bool phi_dec = r.err_phi_l2[1] < r.err_phi_l2[0] && r.err_phi_l2[2] < r.err_phi_l2[1];
  const bool pp = r.pair_p[2] < r.pair_p[1];
  const bool pm = r.pair_mu[2] < r.pair_mu[1];
  const bool corr = r.corr_grad_defect[2] < r.plain_grad_defect[2];
  const bool time_ok = secs <= 1800.0;
  return {u_dec && phi_dec && pp && pm && corr && time_ok,
          fmt::format("err_u {:.3e} {:.3e} {:.3e}; err_phi {:.7e} {:.7e} {:.7e}; pair_p {:.3e} -> {:.3e}; "
                      "pair_mu {:.4e} -> {:.4e}; grad defect at 1/16 corrected {:.3e} vs plain {:.3e}; {:.0f} s",
                      r.err_u_l2[0], r.err_u_l2[1], r.err_u_l2[2], r.err_phi_l2[0], r.err_phi_l2[1], r.err_phi_l2[2],
                      r.pair_p[1], r.pair_p[2], r.pair_mu[1], r.pair_mu[2], r.corr_grad_defect[2],
                      r.plain_grad_defect[2], secs)};
}

Outcome boundedness(const ConvergenceReport& r) {
  bool pass = !r.monitors.empty();
  std::string detail;
  for (std::size_t k = 0; k < 5; ++k) {
    double lo = INFINITY;
    double hi = 0.0;
    for (const auto& m : r.monitors) {
      lo = std::min(lo, m.values()[k]);
      hi = std::max(hi, m.values()[k]);
    }
    const double ratio = hi / lo;
    pass = pass && lo > 0.0 && ratio < 2.0;
    detail += fmt::format("{}{} x{:.3f}", k ? ", " : "", BoundMonitors::names()[k], ratio);
  }
  return {pass, detail + " (each < 2)"};
}

Outcome mean_values() {
  const ViscosityModel sp = ViscosityModel::smooth_periodic();
  MeanValueOptions o2;
  o2.dim = 2;
  const auto periodic =
      mean_value([&](std::span<const double> y) { return sp.sample(0, 0, 0, 0, y[0], y[1]).a11; }, {25.0, 50.0}, o2);
  // one-cell integral by a fine midpoint rule
  const std::size_t n = 512;
  double cell = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      cell += sp.sample(0, 0, 0, 0, (i + 0.5) / n, (j + 0.5) / n).a11 / static_cast<double>(n * n);
  const double e_per = std::abs(periodic.value - cell);

  MeanValueOptions oq;
  oq.max_frequency = 1.0 + std::sqrt(2.0);
  const auto qp = mean_value(
      [](std::span<const double> y) { return std::cos(y[0]) * std::cos(std::sqrt(2.0) * y[0]); }, {100.0, 200.0}, oq);

  const ViscosityModel cm = ViscosityModel::quasi_periodic(1.0, 0.3, 1.0, 2.0);
  const Tensor4 per = effective_tensor(cm, {}, GridSpec::periodic(128, 8, 2 * pi, 1.0)).a_hat;
  const Tensor4 tr = effective_tensor_truncated(cm, {}, {4.0, 8.0}, 16.0).tensors.back();
  double rel = 0.0;
  for (std::size_t e = 0; e < 16; ++e) {
    if (std::abs(per.a[e]) < 1e-8) {
      rel = std::max(rel, std::abs(tr.a[e]) > 1e-6 ? 1.0 : 0.0);
    } else {
      rel = std::max(rel, std::abs(tr.a[e] - per.a[e]) / std::abs(per.a[e]));
    }
  }
  return {e_per <= 1e-3 && std::abs(qp.value) <= 1e-2 && rel <= 0.02,
          fmt::format("periodic |M - cell| {:.1e} at R=50 (<= 1e-3); quasi-periodic |M| {:.1e} at R=200 (<= 1e-2); "
                      "commensurate tensor {:.2f}% at R=8 (<= 2%)",
                      e_per, std::abs(qp.value), 100 * rel)};
}

Outcome pairing_calibration() {
  const double eps = 1.0 / 32;
  const GridSpec g = GridSpec::box(512, 8);
  CellTrajectory tr;
  for (std::size_t s = 0; s <= 8; ++s) {
    CellField c(g);
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) c(i, j) = std::cos(2 * pi * g.xc(i) / eps);
    tr.push(static_cast<double>(s) / 8.0, std::move(c));
  }
  const double v = two_scale_pairing(tr, TestFunction::cos_y1(), eps, g);
  const double target = 0.5 * g.area() * 1.0;
  const double rel = std::abs(v - target) / target;
  return {rel <= 0.05, fmt::format("pairing {:.5f} vs 0.5|Q_T| = {:.5f}, {:.2f}% (<= 5%)", v, target, 100 * rel)};
}

Outcome degenerate_equivalence() {
  const ViscosityModel m = ViscosityModel::constant(1.3);
  SimulationSetup s;
  s.grid = GridSpec::box(64, 64);
  s.time.dt = 1.0 / 1024;
  s.time.T = 64.0 / 1024;
  s.time.snapshot_stride = 8;
  s.init.width = 0.08;
  s.phys.forcing.kind = Forcing::Kind::Swirl;
  s.phys.forcing.amp = 1.0;
  const Tensor4 a = effective_tensor(m, {}, GridSpec::periodic(32, 32)).a_hat;
  const SimulationResult het = run_simulation(s, Coefficient::heterogeneous(m, 0.125));
  const SimulationResult hom = run_simulation(s, Coefficient::homogenized(MacroTensorField(a)));
  if (het.snapshots.size() != hom.snapshots.size()) return {false, "snapshot counts differ"};
  double d = 0.0;
  for (std::size_t k = 0; k < het.snapshots.size(); ++k) {
    const auto& x = het.snapshots[k].state;
    const auto& y = hom.snapshots[k].state;
    d = std::max({d, max_diff(x.u.ux, y.u.ux), max_diff(x.u.uy, y.u.uy), max_diff(x.p, y.p), max_diff(x.phi, y.phi),
                  max_diff(x.mu, y.mu)});
  }
  return {d <= 1e-8, fmt::format("{} steps, max field difference {:.1e} (<= 1e-8)", het.steps, d)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string sweep_path = argc > 1 ? argv[1] : CHNS_SOURCE_DIR "/configs/sweep.toml";
  const std::string default_path = argc > 2 ? argv[2] : CHNS_SOURCE_DIR "/configs/default.toml";
  log::set_level(log::Level::Warn);

  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "trivial homogenization", trivial_homogenization);
  report(2, "tensor structure", tensor_structure);
  report(3, "layered oracle", layered_oracle);
  report(4, "conservation", [&] { return conservation(parse_config(default_path)); });

  ConvergenceReport rep;
  double sweep_secs = 0.0;
  std::string sweep_error;
  try {
    const RunConfig cfg = parse_config(sweep_path);
    const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    const auto t0 = std::chrono::steady_clock::now();
    rep = convergence_study(cfg.study_setup(jobs), cfg.epsilons);
    sweep_secs = seconds_since(t0);
  } catch (const std::exception& e) {
    sweep_error = e.what();
  }
  report(5, "convergence sweep", [&]() -> Outcome {
    if (!sweep_error.empty()) return {false, "sweep failed: " + sweep_error};
    return sweep(rep, sweep_secs);
  });
  report(6, "uniform boundedness", [&]() -> Outcome {
    if (!sweep_error.empty()) return {false, "sweep failed: " + sweep_error};
    return boundedness(rep);
  });
  report(7, "mean value", mean_values);
  report(8, "pairing calibration", pairing_calibration);
  report(9, "degenerate equivalence", degenerate_equivalence);

  std::printf("summary: %d of 9 criteria passed\n", 9 - failed);
  return failed ? 1 : 0;
}
