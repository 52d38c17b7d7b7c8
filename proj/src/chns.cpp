#include "chns/chns.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "chns/log.hpp"
#include "chns/spectral.hpp"

namespace chns {
namespace {

constexpr double kPi = std::numbers::pi;

SpectralAxis cell_axis(bool periodic) { return periodic ? SpectralAxis::Periodic : SpectralAxis::NeumannMidway; }

double rms(const StaggeredVecField& v, const GridSpec& g) { return std::sqrt(face_inner(v, v, g) / g.area()); }

void wrap_pinned(StaggeredVecField& v, const GridSpec& g) {
  apply_no_slip(v, g);
  sync_periodic(v, g);
}

// Arithmetic face average of a cell field; wall faces are left at zero.
StaggeredVecField face_average(const CellField& f, const GridSpec& g) {
  StaggeredVecField out(g);
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      if (i == 0 && !g.periodic_x) continue;
      const std::size_t im = i == 0 ? g.nx - 1 : i - 1;
      out.ux(i, j) = 0.5 * (f(im, j) + f(i, j));
    }
  }
  for (std::size_t j = 0; j < g.ny; ++j) {
    if (j == 0 && !g.periodic_y) continue;
    const std::size_t jm = j == 0 ? g.ny - 1 : j - 1;
    for (std::size_t i = 0; i < g.nx; ++i) out.uy(i, j) = 0.5 * (f(i, jm) + f(i, j));
  }
  sync_periodic(out, g);
  return out;
}

StaggeredVecField forcing_field(const Forcing& f, double t, const GridSpec& g) {
  StaggeredVecField out(g);
  if (f.is_zero()) return out;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i <= g.nx; ++i) out.ux(i, j) = f(t, g.xf(i), g.yc(j))[0];
  for (std::size_t j = 0; j <= g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) out.uy(i, j) = f(t, g.xc(i), g.yf(j))[1];
  wrap_pinned(out, g);
  return out;
}

// Removes the discrete gradient part: u <- u - G p with D G p = D u.
void project(StaggeredVecField& u, const GridSpec& g, SpectralSolver2D& poisson) {
  CellField d = divergence(u, g);
  poisson.solve(d.data(), [](double lx, double ly) { return -(lx + ly); });
  u -= gradient(d, g);
  wrap_pinned(u, g);
}

VelocityCoefficients identity_coefficients(const GridSpec& g) {
  return sample_viscosity(g, [](double, double) { return ViscositySample{1.0, 0.0, 1.0}; });
}

}  // namespace

std::array<double, 2> Forcing::operator()(double, double x, double y) const {
  switch (kind) {
    case Kind::None:
      return {0.0, 0.0};
    case Kind::Uniform:
      return {amp * dir[0], amp * dir[1]};
    case Kind::Swirl: {
      const double sx = std::sin(kPi * x);
      const double sy = std::sin(kPi * y);
      return {amp * sx * sx * std::sin(2 * kPi * y), -amp * std::sin(2 * kPi * x) * sy * sy};
    }
  }
  return {0.0, 0.0};
}

const char* to_string(Forcing::Kind k) {
  switch (k) {
    case Forcing::Kind::None:
      return "none";
    case Forcing::Kind::Uniform:
      return "uniform";
    case Forcing::Kind::Swirl:
      return "swirl";
  }
  return "?";
}

const char* to_string(InitialData::Velocity v) { return v == InitialData::Velocity::Vortex ? "vortex" : "zero"; }

std::vector<std::string> PhysParams::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(fmt::format("{} must be finite and > 0", key));
  };
  positive(kappa, "physics.kappa");
  positive(lambda, "physics.lambda");
  positive(alpha, "physics.alpha");
  if (!std::isfinite(forcing.amp)) throw std::invalid_argument("forcing.amp must be finite");
  std::vector<std::string> warnings;
  if (lambda >= alpha)
    warnings.push_back(fmt::format("physics.lambda = {} is not below physics.alpha = {}", lambda, alpha));
  return warnings;
}

Coefficient Coefficient::heterogeneous(ViscosityModel m, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("epsilon must be finite and > 0");
  Coefficient c;
  c.hetero_ = true;
  c.model_ = std::move(m);
  c.eps_ = eps;
  return c;
}

Coefficient Coefficient::homogenized(MacroTensorField a) {
  if (a.values().empty()) throw std::invalid_argument("homogenized coefficient needs a tensor");
  Coefficient c;
  c.hetero_ = false;
  c.tensor_ = std::move(a);
  return c;
}

bool Coefficient::time_dependent() const { return hetero_ && model_.depends_on_tau(); }

VelocityCoefficients Coefficient::sample(const GridSpec& g, double t) const {
  if (hetero_) {
    const double e = eps_;
    return sample_viscosity(g, [&](double x, double y) { return model_.sample(t, x, y, t / e, x / e, y / e); });
  }
  if (tensor_.is_constant()) {
    const Tensor4 a = tensor_.values().front();
    return sample_tensor(g, [&](double, double) { return a; });
  }
  return sample_tensor(g, [&](double x, double y) { return tensor_.at(x, y); });
}

EnergyRecord energy(const StaggeredState& s, const VelocityCoefficients& a, const PhysParams& phys, const GridSpec& g) {
  EnergyRecord e;
  e.t = s.t;
  e.kinetic = 0.5 / phys.kappa * face_inner(s.u, s.u, g);
  e.interfacial = 0.5 * phys.lambda * cell_gradient_sq(s.phi, g);
  double pot = 0.0;
  double mass = 0.0;
  for (double v : s.phi.flat()) {
    pot += potential_F(v);
    mass += v;
  }
  e.potential = phys.alpha * pot * g.cell_volume();
  e.mass = mass * g.cell_volume();
  e.total = e.kinetic + e.interfacial + e.potential;
  e.visc_dissipation = viscous_bilinear(g, a, s.u, s.u) / phys.kappa;
  e.mu_dissipation = cell_gradient_sq(s.mu, g);
  if (!phys.forcing.is_zero()) e.work = face_inner(s.u, forcing_field(phys.forcing, s.t, g), g) / phys.kappa;
  return e;
}

namespace {

DiagnosticsRecord basic_record(const StaggeredState& s, const GridSpec& g, const VelocityCoefficients& identity) {
  DiagnosticsRecord d;
  d.t = s.t;
  d.div_max = divergence(s.u, g).max_abs();
  d.mass = s.phi.sum() * g.cell_volume();
  d.phi_max = s.phi.max_abs();
  d.u_l2 = std::sqrt(face_inner(s.u, s.u, g));
  d.grad_u_l2 = std::sqrt(std::max(0.0, viscous_bilinear(g, identity, s.u, s.u)));
  d.phi_h1 = std::sqrt(cell_inner(s.phi, s.phi, g) + cell_gradient_sq(s.phi, g));
  d.mu_h1 = std::sqrt(cell_inner(s.mu, s.mu, g) + cell_gradient_sq(s.mu, g));
  d.p_l2 = std::sqrt(cell_inner(s.p, s.p, g));
  d.p_mean = cell_mean(s.p, g);
  return d;
}

}  // namespace

DiagnosticsRecord diagnostics(const StaggeredState& s, const GridSpec& g) {
  return basic_record(s, g, identity_coefficients(g));
}

Diagnostics::Diagnostics(const GridSpec& g, std::size_t warmup)
    : g_(g), identity_(identity_coefficients(g)), warmup_(std::max<std::size_t>(1, warmup)) {}

DiagnosticsRecord Diagnostics::record(const StaggeredState& s, double dt_weight, std::size_t ns_iterations) {
  DiagnosticsRecord d = basic_record(s, g_, identity_);
  d.ns_iterations = ns_iterations;
  mon_.u_linf_l2 = std::max(mon_.u_linf_l2, d.u_l2);
  mon_.phi_linf_h1 = std::max(mon_.phi_linf_h1, d.phi_h1);
  u2_int_ += dt_weight * d.grad_u_l2 * d.grad_u_l2;
  mu2_int_ += dt_weight * d.mu_h1 * d.mu_h1;
  p2_int_ += dt_weight * d.p_l2 * d.p_l2;
  mon_.u_l2_h1 = std::sqrt(u2_int_);
  mon_.mu_l2_h1 = std::sqrt(mu2_int_);
  mon_.p_l2 = std::sqrt(p2_int_);

  // The bounds are uniform in time, so a tenfold excursion over the early
  // transient scale signals a loss of control.
  const std::array<double, 5> now{d.u_l2, d.grad_u_l2, d.phi_h1, d.mu_h1, d.p_l2};
  const auto names = BoundMonitors::names();
  const bool warming = count_++ < warmup_;
  for (std::size_t k = 0; k < now.size(); ++k) {
    if (warming) {
      scale_[k] = std::max(scale_[k], now[k]);
      continue;
    }
    if (!flagged_[k] && scale_[k] > 0.0 && now[k] > 10.0 * scale_[k]) {
      flagged_[k] = true;
      mon_.flags.push_back(fmt::format("{} integrand grew beyond 10x its initial scale at t = {:.6g}", names[k], s.t));
    }
  }
  return d;
}

std::size_t SimulationSetup::steps() const {
  if (!(time.dt > 0.0) || !(time.T > 0.0)) throw std::invalid_argument("time.dt and time.T must be > 0");
  const double n = time.T / time.dt;
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-9 * std::max(1.0, n) || r < 1.0)
    throw std::invalid_argument(fmt::format("time.T = {} is not a positive multiple of time.dt = {}", time.T, time.dt));
  return static_cast<std::size_t>(r);
}

StaggeredState initial_state(const SimulationSetup& setup) {
  const GridSpec& g = setup.grid;
  const InitialData& in = setup.init;
  if (!(in.ax > 0.0) || !(in.ay > 0.0) || !(in.width > 0.0))
    throw std::invalid_argument("initial.ax, initial.ay and initial.width must be > 0");
  StaggeredState s(g);
  const double r = std::sqrt(in.ax * in.ay);
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double dx = (g.xc(i) - in.cx) / in.ax;
      const double dy = (g.yc(j) - in.cy) / in.ay;
      const double d = (1.0 - std::sqrt(dx * dx + dy * dy)) * r;
      s.phi(i, j) = std::tanh(d / (std::numbers::sqrt2 * in.width)) + in.phi_shift;
    }
  }
  const CellField lap = laplacian(s.phi, g);
  for (std::size_t k = 0; k < s.mu.size(); ++k)
    s.mu.flat()[k] = -setup.phys.lambda * lap.flat()[k] + setup.phys.alpha * f_double_well(s.phi.flat()[k]);

  if (in.velocity == InitialData::Velocity::Vortex && in.velocity_amp != 0.0) {
    auto field = [&](double x, double y) {
      const double X = (x - g.x0) / g.lx;
      const double Y = (y - g.y0) / g.ly;
      const double sx = std::sin(kPi * X);
      const double sy = std::sin(kPi * Y);
      return std::array<double, 2>{in.velocity_amp * sx * sx * std::sin(2 * kPi * Y),
                                   -in.velocity_amp * std::sin(2 * kPi * X) * sy * sy};
    };
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i <= g.nx; ++i) s.u.ux(i, j) = field(g.xf(i), g.yc(j))[0];
    for (std::size_t j = 0; j <= g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) s.u.uy(i, j) = field(g.xc(i), g.yf(j))[1];
    wrap_pinned(s.u, g);
    SpectralSolver2D poisson(g.nx, g.ny, g.hx(), g.hy(), cell_axis(g.periodic_x), cell_axis(g.periodic_y));
    project(s.u, g, poisson);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Stepper

namespace {

// Unknown faces of one velocity component, as a spectral lattice.
struct ComponentPre {
  SpectralSolver2D solver;
  std::size_t i0 = 0;  // first unknown storage index along x
  std::size_t j0 = 0;
  double cx = 1.0;
  double cy = 1.0;
  std::vector<double> buf;

  ComponentPre(std::size_t nx, std::size_t ny, double hx, double hy, SpectralAxis ax, SpectralAxis ay, std::size_t i0_,
               std::size_t j0_)
      : solver(nx, ny, hx, hy, ax, ay), i0(i0_), j0(j0_), buf(nx * ny) {}

  void apply(const Array2D& r, Array2D& z, double shift) {
    const std::size_t n = solver.nx();
    const std::size_t m = solver.ny();
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < n; ++i) buf[j * n + i] = r(i0 + i, j0 + j);
    const double a = cx;
    const double b = cy;
    solver.solve(buf.data(), [=](double lx, double ly) { return shift + a * lx + b * ly; });
    z.fill(0.0);
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t i = 0; i < n; ++i) z(i0 + i, j0 + j) = buf[j * n + i];
  }
};

ComponentPre make_pre(const GridSpec& g, int comp) {
  const bool along_px = comp == 0 ? g.periodic_x : g.periodic_y;  // normal axis
  const bool along_pt = comp == 0 ? g.periodic_y : g.periodic_x;  // tangential axis
  const std::size_t nn = comp == 0 ? g.nx : g.ny;
  const std::size_t nt = comp == 0 ? g.ny : g.nx;
  const double hn = comp == 0 ? g.hx() : g.hy();
  const double ht = comp == 0 ? g.hy() : g.hx();
  const std::size_t cn = along_px ? nn : nn - 1;
  const SpectralAxis an = along_px ? SpectralAxis::Periodic : SpectralAxis::DirichletNodes;
  const SpectralAxis at = along_pt ? SpectralAxis::Periodic : SpectralAxis::DirichletMidway;
  const std::size_t off = along_px ? 0 : 1;
  if (comp == 0) return ComponentPre(cn, nt, hn, ht, an, at, off, 0);
  return ComponentPre(nt, cn, ht, hn, at, an, 0, off);
}

}  // namespace

struct Stepper::Impl {
  SpectralSolver2D ch;
  SpectralSolver2D pressure;
  ComponentPre pre_x;
  ComponentPre pre_y;
  VelocityCoefficients coeffs;
  double coeffs_t = 0.0;
  bool coeffs_valid = false;
  bool warned_bounds = false;

  explicit Impl(const GridSpec& g)
      : ch(g.nx, g.ny, g.hx(), g.hy(), cell_axis(g.periodic_x), cell_axis(g.periodic_y)),
        pressure(g.nx, g.ny, g.hx(), g.hy(), cell_axis(g.periodic_x), cell_axis(g.periodic_y)),
        pre_x(make_pre(g, 0)),
        pre_y(make_pre(g, 1)) {}
};

Stepper::Stepper(const SimulationSetup& setup, Coefficient coeff)
    : setup_(setup), coeff_(std::move(coeff)), impl_(std::make_unique<Impl>(setup.grid)) {
  setup_.grid.validate();
}

Stepper::~Stepper() = default;

const VelocityCoefficients& Stepper::coefficients(double t) {
  Impl& m = *impl_;
  if (!m.coeffs_valid || (coeff_.time_dependent() && m.coeffs_t != t)) {
    m.coeffs = coeff_.sample(setup_.grid, t);
    m.coeffs_t = t;
    m.coeffs_valid = true;
    for (int k = 0; k < 2; ++k) {
      const auto& c = m.coeffs.comp[static_cast<std::size_t>(k)];
      ComponentPre& p = k == 0 ? m.pre_x : m.pre_y;
      p.cx = c.a11.sum() / static_cast<double>(c.a11.size());
      p.cy = c.a22.sum() / static_cast<double>(c.a22.size());
    }
  }
  return m.coeffs;
}

void Stepper::check_cfl(const StaggeredState& s, double dt) const {
  const GridSpec& g = setup_.grid;
  const double h = std::min(g.hx(), g.hy());
  const double umax = s.u.max_abs();
  const double adv = umax > 0.0 ? h / umax : std::numeric_limits<double>::infinity();
  const double limit = 0.5 * std::min(adv, h * h * setup_.time.cfl_diffusive_factor);
  if (dt > limit)
    throw StepSizeError(fmt::format("dt = {:.6g} exceeds the step limit {:.6g} (|u|max = {:.6g}, h = {:.6g})", dt,
                                    limit, umax, h));
}

void Stepper::ch_substep(StaggeredState& s, double dt) {
  const GridSpec& g = setup_.grid;
  const PhysParams& ph = setup_.phys;
  const double S = setup_.stabilization();
  check_shape(s.phi, g, "ch_substep phi");

  // (1/dt + lambda L^2 + S L) phi' = phi/dt - div(u phi) - L (alpha f(phi) - S phi), L = -Delta
  CellField explicit_part(g);
  for (std::size_t k = 0; k < explicit_part.size(); ++k) {
    const double v = s.phi.flat()[k];
    explicit_part.flat()[k] = ph.alpha * f_double_well(v) - S * v;
  }
  const CellField lap_e = laplacian(explicit_part, g);
  const CellField adv = advect_scalar(s.u, s.phi, g);
  CellField next(g);
  for (std::size_t k = 0; k < next.size(); ++k)
    next.flat()[k] = s.phi.flat()[k] / dt - adv.flat()[k] + lap_e.flat()[k];
  const double lam = ph.lambda;
  impl_->ch.solve(next.data(), [=](double lx, double ly) {
    const double l = lx + ly;
    return 1.0 / dt + lam * l * l + S * l;
  });

  const CellField lap_n = laplacian(next, g);
  for (std::size_t k = 0; k < next.size(); ++k) {
    const double old = s.phi.flat()[k];
    const double nw = next.flat()[k];
    s.mu.flat()[k] = -lam * lap_n.flat()[k] + ph.alpha * f_double_well(old) + S * (nw - old);
  }
  s.phi = std::move(next);

  if (!impl_->warned_bounds && s.phi.max_abs() > 1.5) {
    impl_->warned_bounds = true;
    log::warn("simulate", "|phi| reached {:.4g} > 1.5; the stabilization S = {:.4g} may no longer bound f'",
              s.phi.max_abs(), S);
  }
}

std::size_t Stepper::ns_substep(StaggeredState& s, double dt) {
  const GridSpec& g = setup_.grid;
  const PhysParams& ph = setup_.phys;
  check_shape(s.u, g, "ns_substep u");
  const double t1 = s.t + dt;
  const VelocityCoefficients& a = coefficients(t1);
  Impl& m = *impl_;

  // Explicit part: u/dt - (u.grad)u + kappa mu grad(phi) + g
  StaggeredVecField rhs = s.u;
  rhs *= 1.0 / dt;
  rhs -= convect(s.u, s.u, g);
  if (ph.kappa != 0.0) {
    StaggeredVecField cap = face_average(s.mu, g);
    const StaggeredVecField gphi = gradient(s.phi, g);
    for (std::size_t k = 0; k < cap.ux.size(); ++k) cap.ux.flat()[k] *= gphi.ux.flat()[k];
    for (std::size_t k = 0; k < cap.uy.size(); ++k) cap.uy.flat()[k] *= gphi.uy.flat()[k];
    rhs.axpy(ph.kappa, cap);
  }
  if (!ph.forcing.is_zero()) rhs += forcing_field(ph.forcing, t1, g);
  wrap_pinned(rhs, g);

  // Implicit viscous predictor (I/dt + L) u* = rhs by PCG.
  const double shift = 1.0 / dt;
  auto apply_op = [&](const StaggeredVecField& v, StaggeredVecField& out) {
    apply_viscous(g, a, v, out);
    out.axpy(shift, v);
    wrap_pinned(out, g);
  };
  auto precondition = [&](const StaggeredVecField& r, StaggeredVecField& z) {
    m.pre_x.apply(r.ux, z.ux, shift);
    m.pre_y.apply(r.uy, z.uy, shift);
    wrap_pinned(z, g);
  };

  const double bnorm = rms(rhs, g);
  const double target = setup_.solver.ns_tol * bnorm;
  StaggeredVecField x = s.u;
  std::size_t iters = 0;
  if (bnorm == 0.0) {
    x = StaggeredVecField(g);
  } else {
    StaggeredVecField r(g), z(g), p(g), q(g);
    apply_op(x, q);
    r = rhs;
    r -= q;
    double rn = rms(r, g);
    if (rn > target) {
      precondition(r, z);
      p = z;
      double rz = face_inner(r, z, g);
      while (true) {
        if (iters >= setup_.solver.ns_max_iter)
          throw SolverError(fmt::format("viscous solve stalled at relative residual {:.3e} after {} iterations",
                                        rn / bnorm, iters));
        ++iters;
        apply_op(p, q);
        const double alpha = rz / face_inner(p, q, g);
        x.axpy(alpha, p);
        r.axpy(-alpha, q);
        rn = rms(r, g);
        if (rn <= target) {
          apply_op(x, q);
          r = rhs;
          r -= q;
          rn = rms(r, g);
          if (rn <= target) break;
        }
        precondition(r, z);
        const double rz_new = face_inner(r, z, g);
        p *= rz_new / rz;
        p += z;
        rz = rz_new;
      }
    }
  }

  // Projection: D G p = D u* / dt, u = u* - dt G p.
  CellField d = divergence(x, g);
  d *= 1.0 / dt;
  m.pressure.solve(d.data(), [](double lx, double ly) { return -(lx + ly); });
  const double pm = cell_mean(d, g);
  for (double& v : d.flat()) v -= pm;
  x.axpy(-dt, gradient(d, g));
  wrap_pinned(x, g);
  s.u = std::move(x);
  s.p = std::move(d);
  return iters;
}

std::size_t Stepper::step(StaggeredState& s, double dt) {
  ch_substep(s, dt);
  const std::size_t it = ns_substep(s, dt);
  s.t += dt;
  return it;
}

void ch_substep(StaggeredState& s, double dt, const PhysParams& phys, const GridSpec& g, double stabilization) {
  SimulationSetup setup;
  setup.grid = g;
  setup.phys = phys;
  setup.solver.ch_stabilization = stabilization;
  Stepper st(setup, Coefficient::homogenized(MacroTensorField(Tensor4::isotropic(1.0))));
  st.ch_substep(s, dt);
}

void ns_substep(StaggeredState& s, double dt, const Coefficient& coeff, const PhysParams& phys, const GridSpec& g) {
  SimulationSetup setup;
  setup.grid = g;
  setup.phys = phys;
  Stepper st(setup, coeff);
  st.ns_substep(s, dt);
}

void step(StaggeredState& s, double dt, const Coefficient& coeff, const PhysParams& phys, const GridSpec& g) {
  SimulationSetup setup;
  setup.grid = g;
  setup.phys = phys;
  Stepper st(setup, coeff);
  st.step(s, dt);
}

// ---------------------------------------------------------------------------
// Driver

SimulationResult run_simulation(const SimulationSetup& setup, const Coefficient& coeff, const RunOptions& opts) {
  SimulationResult res;
  const GridSpec& g = setup.grid;
  g.validate();
  res.warnings = setup.phys.validate();
  for (const auto& w : res.warnings) log::warn(opts.log_phase, "{}", w);
  const std::size_t n = setup.steps();
  const double dt = setup.time.dt;
  const std::size_t stride = std::max<std::size_t>(1, setup.time.snapshot_stride);
  TrajectorySink* sink = opts.sink;

  try {
    Stepper st(setup, coeff);
    StaggeredState s = initial_state(setup);
    Diagnostics diag(g, n / 10 + 1);

    auto emit = [&](std::size_t k, std::size_t iters) {
      const EnergyRecord e = energy(s, st.coefficients(s.t), setup.phys, g);
      const DiagnosticsRecord d = diag.record(s, k == 0 ? 0.0 : dt, iters);
      res.energies.push_back(e);
      res.diagnostics.push_back(d);
      if (sink) {
        sink->on_energy(e);
        sink->on_diagnostics(d);
      }
      if (k % stride == 0 || k == n) {
        Snapshot snap{s.t, k, s};
        if (sink) sink->on_snapshot(snap);
        if (opts.keep_snapshots) res.snapshots.push_back(std::move(snap));
      }
      return e;
    };

    const EnergyRecord e0 = emit(0, 0);
    log::info(opts.log_phase, "{} steps of dt = {:.6g} on {}x{}, E(0) = {:.10g}", n, dt, g.nx, g.ny, e0.total);
    const std::size_t every = std::max<std::size_t>(1, n / 8);
    for (std::size_t k = 1; k <= n; ++k) {
      st.check_cfl(s, dt);
      const std::size_t iters = st.step(s, dt);
      s.t = static_cast<double>(k) * dt;
      if (!s.all_finite()) throw std::runtime_error(fmt::format("non-finite state at step {} (t = {:.6g})", k, s.t));
      const EnergyRecord e = emit(k, iters);
      if (k % every == 0 || k == n)
        log::info(opts.log_phase, "step {}/{} t = {:.4f} E = {:.10g} div = {:.2e} pcg = {}", k, n, s.t, e.total,
                  res.diagnostics.back().div_max, iters);
    }
    res.steps = n;
    res.monitors = diag.monitors();
    for (const auto& f : res.monitors.flags) log::warn(opts.log_phase, "{}", f);
    if (sink) sink->on_finish(res.monitors);
  } catch (const std::exception& ex) {
    if (sink) sink->on_failure(ex.what());
    throw;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Output

struct DirectoryWriter::Files {
  std::ofstream energy;
  std::ofstream diag;
  nlohmann::ordered_json snapshots = nlohmann::ordered_json::array();
};

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

void write_json(const std::filesystem::path& p, const nlohmann::ordered_json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

}  // namespace

DirectoryWriter::DirectoryWriter(std::string dir, const SimulationSetup& setup, std::string mode)
    : dir_(std::move(dir)), setup_(setup), mode_(std::move(mode)), files_(std::make_unique<Files>()) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir_) / "fields");
  std::error_code ec;
  fs::remove(fs::path(dir_) / "FAILED", ec);
  files_->energy.open(fs::path(dir_) / "energy.csv");
  files_->diag.open(fs::path(dir_) / "diagnostics.csv");
  if (!files_->energy || !files_->diag) throw std::runtime_error("cannot open output files in " + dir_);
  files_->energy << "# config_hash=" << setup_.config_hash << '\n'
                 << "t,kinetic,interfacial,potential,total,visc_dissipation,mu_dissipation,work,mass\n";
  files_->diag << "# config_hash=" << setup_.config_hash << '\n'
               << "t,div_max,mass,phi_max,u_l2,grad_u_l2,phi_h1,mu_h1,p_l2,p_mean,ns_iterations\n";
}

DirectoryWriter::~DirectoryWriter() = default;

void DirectoryWriter::on_energy(const EnergyRecord& e) {
  files_->energy << fmt::format("{},{},{},{},{},{},{},{},{}\n", num(e.t), num(e.kinetic), num(e.interfacial),
                                num(e.potential), num(e.total), num(e.visc_dissipation), num(e.mu_dissipation),
                                num(e.work), num(e.mass));
}

void DirectoryWriter::on_diagnostics(const DiagnosticsRecord& d) {
  files_->diag << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", num(d.t), num(d.div_max), num(d.mass),
                              num(d.phi_max), num(d.u_l2), num(d.grad_u_l2), num(d.phi_h1), num(d.mu_h1),
                              num(d.p_l2), num(d.p_mean), d.ns_iterations);
}

void DirectoryWriter::on_snapshot(const Snapshot& s) {
  const auto base = std::filesystem::path(dir_) / "fields";
  const std::string tag = fmt::format("{:06d}", s.step);
  const GridSpec& g = setup_.grid;
  auto dump = [&](const char* name, const Array2D& a, Stagger st) {
    write_field((base / fmt::format("{}_{}", name, tag)).string(), a, g, DumpMeta{name, st, s.t, setup_.config_hash});
  };
  dump("u_x", s.state.u.ux, Stagger::FaceX);
  dump("u_y", s.state.u.uy, Stagger::FaceY);
  dump("p", s.state.p, Stagger::Cell);
  dump("phi", s.state.phi, Stagger::Cell);
  dump("mu", s.state.mu, Stagger::Cell);
  files_->snapshots.push_back({{"step", s.step}, {"t", s.t}, {"tag", tag}});
}

void DirectoryWriter::on_failure(const std::string& what) {
  files_->energy.flush();
  files_->diag.flush();
  std::ofstream marker(std::filesystem::path(dir_) / "FAILED");
  marker << what << '\n';
}

void DirectoryWriter::on_finish(const BoundMonitors& mon) {
  files_->energy.flush();
  files_->diag.flush();
  const GridSpec& g = setup_.grid;
  nlohmann::ordered_json run;
  run["config_hash"] = setup_.config_hash;
  run["mode"] = mode_;
  run["grid"] = {{"nx", g.nx}, {"ny", g.ny}, {"lx", g.lx}, {"ly", g.ly}};
  run["dt"] = setup_.time.dt;
  run["T"] = setup_.time.T;
  run["steps"] = setup_.steps();
  run["snapshots"] = files_->snapshots;
  nlohmann::ordered_json m;
  const auto names = BoundMonitors::names();
  const auto vals = mon.values();
  for (std::size_t k = 0; k < names.size(); ++k) m[names[k]] = vals[k];
  m["flags"] = mon.flags;
  run["monitors"] = m;
  write_json(std::filesystem::path(dir_) / "run.json", run);
}

}  // namespace chns
