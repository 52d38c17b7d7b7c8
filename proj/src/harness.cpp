#include "chns/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "chns/log.hpp"
#include "chns/parallel.hpp"

namespace chns {
namespace {

std::size_t refinement(std::size_t fine, std::size_t coarse, const char* axis) {
  if (coarse == 0 || fine % coarse != 0)
    throw StructuralError(fmt::format("grid transfer needs an integer refinement along {}: {} -> {}", axis, fine, coarse));
  return fine / coarse;
}

void check_transfer(const GridSpec& fine, const GridSpec& coarse) {
  if (fine.lx != coarse.lx || fine.ly != coarse.ly || fine.x0 != coarse.x0 || fine.y0 != coarse.y0 ||
      fine.periodic_x != coarse.periodic_x || fine.periodic_y != coarse.periodic_y)
    throw StructuralError("grid transfer between different domains");
}

double cell_norm_sq(const CellField& a, const CellField& b, const GridSpec& g) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a.flat()[k] - b.flat()[k];
    s += d * d;
  }
  return s * g.cell_volume();
}

const CellField& cell_of(const StaggeredState& s, FieldKind f) {
  switch (f) {
    case FieldKind::Phi:
      return s.phi;
    case FieldKind::Mu:
      return s.mu;
    case FieldKind::Pressure:
      return s.p;
    case FieldKind::Velocity:
      break;
  }
  throw std::invalid_argument("velocity is not a cell field");
}

void check_schedules(const Trajectory& a, const Trajectory& b) {
  if (a.snapshots.size() != b.snapshots.size())
    throw std::invalid_argument(
        fmt::format("incompatible snapshot schedules: {} vs {} snapshots", a.snapshots.size(), b.snapshots.size()));
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    const double ta = a.snapshots[k].t;
    const double tb = b.snapshots[k].t;
    if (std::abs(ta - tb) > 1e-12 * std::max(1.0, std::abs(ta)))
      throw std::invalid_argument(fmt::format("incompatible snapshot schedules: t = {} vs {} at index {}", ta, tb, k));
  }
}

double wrap01(double v) { return v - std::floor(v); }

}  // namespace

std::vector<double> Trajectory::times() const {
  std::vector<double> t;
  t.reserve(snapshots.size());
  for (const auto& s : snapshots) t.push_back(s.t);
  return t;
}

CellField restrict_cells(const CellField& f, const GridSpec& fine, const GridSpec& coarse) {
  check_shape(f, fine, "restrict_cells");
  check_transfer(fine, coarse);
  const std::size_t rx = refinement(fine.nx, coarse.nx, "x");
  const std::size_t ry = refinement(fine.ny, coarse.ny, "y");
  if (rx == 1 && ry == 1) return f;
  CellField out(coarse);
  const double w = 1.0 / static_cast<double>(rx * ry);
  for (std::size_t j = 0; j < fine.ny; ++j)
    for (std::size_t i = 0; i < fine.nx; ++i) out(i / rx, j / ry) += w * f(i, j);
  return out;
}

StaggeredVecField restrict_faces(const StaggeredVecField& u, const GridSpec& fine, const GridSpec& coarse) {
  check_shape(u, fine, "restrict_faces");
  check_transfer(fine, coarse);
  const std::size_t rx = refinement(fine.nx, coarse.nx, "x");
  const std::size_t ry = refinement(fine.ny, coarse.ny, "y");
  if (rx == 1 && ry == 1) return u;
  StaggeredVecField out(coarse);
  for (std::size_t J = 0; J < coarse.ny; ++J)
    for (std::size_t I = 0; I <= coarse.nx; ++I) {
      double s = 0.0;
      for (std::size_t m = 0; m < ry; ++m) s += u.ux(I * rx, J * ry + m);
      out.ux(I, J) = s / static_cast<double>(ry);
    }
  for (std::size_t J = 0; J <= coarse.ny; ++J)
    for (std::size_t I = 0; I < coarse.nx; ++I) {
      double s = 0.0;
      for (std::size_t m = 0; m < rx; ++m) s += u.uy(I * rx + m, J * ry);
      out.uy(I, J) = s / static_cast<double>(rx);
    }
  return out;
}

double error_l2_spacetime(const Trajectory& a, const Trajectory& b, const GridSpec& common, FieldKind field) {
  check_schedules(a, b);
  const std::vector<double> w = trapezoid_weights(a.times());
  double total = 0.0;
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    if (w[k] == 0.0) continue;
    const StaggeredState& sa = a.snapshots[k].state;
    const StaggeredState& sb = b.snapshots[k].state;
    double e = 0.0;
    if (field == FieldKind::Velocity) {
      StaggeredVecField d = restrict_faces(sa.u, a.grid, common);
      d -= restrict_faces(sb.u, b.grid, common);
      e = face_inner(d, d, common);
    } else {
      e = cell_norm_sq(restrict_cells(cell_of(sa, field), a.grid, common),
                       restrict_cells(cell_of(sb, field), b.grid, common), common);
    }
    total += w[k] * e;
  }
  return std::sqrt(total);
}

CellTrajectory cell_history(const Trajectory& t, FieldKind field) {
  CellTrajectory out;
  for (const auto& s : t.snapshots) out.push(s.t, cell_of(s.state, field));
  return out;
}

void check_resolvable(const ViscosityModel& m, double eps, const GridSpec& g, double min_cells) {
  if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  const double period = eps * m.fast_wavelength();
  auto check = [&](bool varies, std::size_t n, double len, const char* axis) {
    if (!varies) return;
    const double cells = period * static_cast<double>(n) / len;
    if (cells + 1e-9 < min_cells) {
      const auto need = static_cast<std::size_t>(std::ceil(min_cells * len / period - 1e-9));
      throw StructuralError(fmt::format(
          "epsilon = {} is under-resolved: {:.3g} grid cells per period along {} on a {}x{} grid; "
          "needs at least {} cells along {} ({} per period)",
          eps, cells, axis, g.nx, g.ny, need, axis, min_cells));
    }
  };
  check(m.depends_on_y1(), g.nx, g.lx, "x");
  check(m.depends_on_y2(), g.ny, g.ly, "y");
}

GradientDefect corrector_gradient_defect(const Trajectory& het, const Trajectory& hom, const ViscosityModel& m,
                                         double eps, const GridSpec& cell, const EffectiveTensorOptions& opts) {
  check_schedules(het, hom);
  if (!m.is_periodic()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  const GridSpec& gf = het.grid;
  const GridSpec& gc = hom.grid;
  const std::vector<double> w = trapezoid_weights(het.times());
  const MacroPoint centre{0.0, gf.x0 + 0.5 * gf.lx, gf.y0 + 0.5 * gf.ly};

  // grad_y eta at cell-grid centers, index [strain][j*2 + l]; recomputed per snapshot only for tau-dependent models.
  std::array<std::array<CellField, 4>, 4> grad_eta;
  std::optional<double> cached_tau;
  auto correctors_at = [&](double t) {
    const double tau = m.depends_on_tau() ? wrap01(t / eps) : 0.0;
    if (cached_tau && *cached_tau == tau) return;
    MacroPoint mp = centre;
    mp.t = t;
    const auto cs = solve_correctors(m, mp, tau, cell, opts);
    for (std::size_t r = 0; r < 4; ++r) grad_eta[r] = velocity_gradient_centers(cs[r].eta, cell);
    cached_tau = tau;
  };

  GradientDefect out;
  for (std::size_t k = 0; k < het.snapshots.size(); ++k) {
    if (w[k] == 0.0) continue;
    correctors_at(het.snapshots[k].t);
    const auto gu_eps = velocity_gradient_centers(het.snapshots[k].state.u, gf);
    const auto gu_0 = velocity_gradient_centers(hom.snapshots[k].state.u, gc);
    double plain = 0.0;
    double corr = 0.0;
    for (std::size_t j = 0; j < gf.ny; ++j) {
      for (std::size_t i = 0; i < gf.nx; ++i) {
        const double x = gf.xc(i);
        const double y = gf.yc(j);
        const double yx = cell.x0 + wrap01((x / eps - cell.x0) / cell.lx) * cell.lx;
        const double yy = cell.y0 + wrap01((y / eps - cell.y0) / cell.ly) * cell.ly;
        std::array<double, 4> d0{};
        for (std::size_t c = 0; c < 4; ++c) d0[c] = interpolate_cell(gu_0[c], gc, x, y);
        for (std::size_t c = 0; c < 4; ++c) {
          double g1 = 0.0;
          for (std::size_t r = 0; r < 4; ++r) g1 += d0[r] * interpolate_cell(grad_eta[r][c], cell, yx, yy);
          const double e = gu_eps[c](i, j) - d0[c];
          plain += e * e;
          corr += (e - g1) * (e - g1);
        }
      }
    }
    out.plain += w[k] * plain * gf.cell_volume();
    out.corrected += w[k] * corr * gf.cell_volume();
  }
  out.plain = std::sqrt(out.plain);
  out.corrected = std::sqrt(out.corrected);
  return out;
}

TestFunction default_pairing_function() {
  TestFunction psi;
  psi.poly_t = {1.0, 1.0};
  psi.poly_x1 = {0.0, 1.0};
  psi.poly_x2 = {0.0, 0.0, 1.0};
  psi.name = "(1+t)*x1*x2^2";
  return psi;
}

MacroTensorField homogenized_coefficient(const StudySetup& s) {
  if (!s.model.is_periodic()) {
    const TruncatedTensor tt = effective_tensor_truncated(s.model, {0.0, 0.0, 0.0}, s.truncation_radii,
                                                          s.truncation_cells_per_unit, s.cell);
    if (tt.warning) log::warn("converge", "{}", *tt.warning);
    return MacroTensorField(tt.tensor.a_hat);
  }
  return MacroTensorField::tabulate(s.model, 0.0, s.homog_grid, s.macro_lattice, s.cell_grid, s.cell);
}

namespace {

// Cell grid on which the corrector of a periodic model lines up with the
// heterogeneous grid cell centers, when the period holds an integer cell count.
GridSpec corrector_grid(const StudySetup& s, double eps) {
  const GridSpec& g = s.hetero.grid;
  GridSpec cell = s.cell_grid;
  auto matched = [&](double h, std::size_t fallback) {
    const double n = eps / h;
    const double r = std::round(n);
    return (std::abs(n - r) < 1e-9 && r >= 8.0) ? static_cast<std::size_t>(r) : fallback;
  };
  cell.nx = matched(g.hx(), cell.nx);
  cell.ny = matched(g.hy(), cell.ny);
  cell.lx = 1.0;
  cell.ly = 1.0;
  cell.x0 = 0.0;
  cell.y0 = 0.0;
  cell.periodic_x = cell.periodic_y = true;
  return cell;
}

double pairing(const Trajectory& t, FieldKind f, const TestFunction& psi, double eps) {
  return two_scale_pairing(cell_history(t, f), psi, eps, t.grid);
}

}  // namespace

ConvergenceReport convergence_study(const StudySetup& s, const std::vector<double>& eps) {
  if (eps.empty()) throw std::invalid_argument("epsilon list is empty");
  for (std::size_t k = 1; k < eps.size(); ++k)
    if (!(eps[k] < eps[k - 1])) throw std::invalid_argument("epsilon list must be strictly decreasing");
  for (double e : eps) check_resolvable(s.model, e, s.hetero.grid);
  const GridSpec& gh = s.hetero.grid;
  (void)refinement(gh.nx, s.homog_grid.nx, "x");
  (void)refinement(gh.ny, s.homog_grid.ny, "y");
  check_transfer(gh, s.homog_grid);

  ConvergenceReport rep;
  rep.epsilons = eps;
  rep.config_hash = s.hetero.config_hash;
  rep.reference = s.resolved_reference ? "resolved" : "homogenized";
  const std::vector<TestFunction> psis =
      s.test_functions.empty() ? std::vector<TestFunction>{default_pairing_function()} : s.test_functions;
  for (const auto& p : psis)
    if (p.oscillates()) throw std::invalid_argument("pairing test functions must not depend on the fast variables");

  log::info("converge", "effective tensor for {} model", to_string(s.model.kind));
  const MacroTensorField a0 = homogenized_coefficient(s);
  rep.a_hat = a0.values().front();

  SimulationSetup hs = s.hetero;
  hs.grid = s.homog_grid;
  RunOptions ro;
  ro.log_phase = "converge/homogenized";
  const Trajectory hom = Trajectory::from(run_simulation(hs, Coefficient::homogenized(a0), ro), hs.grid);

  const std::size_t n = eps.size();
  std::vector<Trajectory> het(n);
  std::vector<Trajectory> refs(s.resolved_reference ? n : 0);
  std::vector<BoundMonitors> mons(n);
  parallel_for(n, s.jobs, [&](std::size_t k) {
    RunOptions o;
    o.log_phase = fmt::format("converge/eps={}", eps[k]);
    const Coefficient c = Coefficient::heterogeneous(s.model, eps[k]);
    const SimulationResult r = run_simulation(s.hetero, c, o);
    mons[k] = r.monitors;
    het[k] = Trajectory::from(r, s.hetero.grid);
    if (s.resolved_reference) {
      SimulationSetup fine = s.hetero;
      fine.grid.nx *= 2;
      fine.grid.ny *= 2;
      o.log_phase += "/resolved";
      refs[k] = Trajectory::from(run_simulation(fine, c, o), fine.grid);
    }
  });
  rep.monitors = mons;

  std::vector<double> p0;
  std::vector<double> m0;
  for (const auto& psi : psis) {
    p0.push_back(pairing(hom, FieldKind::Pressure, psi, 1.0));
    m0.push_back(pairing(hom, FieldKind::Mu, psi, 1.0));
  }
  for (std::size_t k = 0; k < n; ++k) {
    const Trajectory& ref = s.resolved_reference ? refs[k] : hom;
    const GridSpec common = s.resolved_reference ? s.hetero.grid : s.homog_grid;
    rep.err_u_l2.push_back(error_l2_spacetime(het[k], ref, common, FieldKind::Velocity));
    rep.err_phi_l2.push_back(error_l2_spacetime(het[k], ref, common, FieldKind::Phi));
    std::vector<double> pp;
    std::vector<double> pm;
    for (std::size_t q = 0; q < psis.size(); ++q) {
      pp.push_back(std::abs(pairing(het[k], FieldKind::Pressure, psis[q], eps[k]) - p0[q]));
      pm.push_back(std::abs(pairing(het[k], FieldKind::Mu, psis[q], eps[k]) - m0[q]));
    }
    rep.pair_p.push_back(*std::max_element(pp.begin(), pp.end()));
    rep.pair_mu.push_back(*std::max_element(pm.begin(), pm.end()));
    rep.pair_p_each.push_back(std::move(pp));
    rep.pair_mu_each.push_back(std::move(pm));
    const GradientDefect gd = corrector_gradient_defect(het[k], hom, s.model, eps[k], corrector_grid(s, eps[k]), s.cell);
    rep.corr_grad_defect.push_back(gd.corrected);
    rep.plain_grad_defect.push_back(gd.plain);
    auto rate = [&](const std::vector<double>& e) {
      if (k == 0 || e[k] == 0.0 || e[k - 1] == 0.0) return std::numeric_limits<double>::quiet_NaN();
      return std::log2(e[k - 1] / e[k]);
    };
    rep.rate_u.push_back(rate(rep.err_u_l2));
    rep.rate_phi.push_back(rate(rep.err_phi_l2));
    log::info("converge", "eps = {}: err_u = {:.6e} err_phi = {:.6e} pair_p = {:.3e} pair_mu = {:.3e} grad {:.4e} -> {:.4e}",
              eps[k], rep.err_u_l2[k], rep.err_phi_l2[k], rep.pair_p[k], rep.pair_mu[k], gd.plain, gd.corrected);
  }
  return rep;
}

std::string to_csv(const ConvergenceReport& r) {
  auto num = [](double v) { return std::isnan(v) ? std::string("nan") : fmt::format("{:.17g}", v); };
  std::string out = fmt::format("# config_hash={} reference={}\n", r.config_hash, r.reference);
  out += "epsilon,err_u_l2,err_phi_l2,pair_p,pair_mu,corr_grad_defect,rate_u,rate_phi\n";
  for (std::size_t k = 0; k < r.epsilons.size(); ++k)
    out += fmt::format("{},{},{},{},{},{},{},{}\n", num(r.epsilons[k]), num(r.err_u_l2[k]), num(r.err_phi_l2[k]),
                       num(r.pair_p[k]), num(r.pair_mu[k]), num(r.corr_grad_defect[k]), num(r.rate_u[k]),
                       num(r.rate_phi[k]));
  return out;
}

}  // namespace chns
