#include "chns/cell.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "chns/parallel.hpp"
#include "chns/spectral.hpp"

namespace chns {

Background UnitStrain::background() const {
  Background bg{};
  bg[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] = 1.0;
  return bg;
}

VelocityCoefficients cell_coefficients(const ViscosityModel& m, MacroPoint macro, double tau, const GridSpec& g) {
  if (!g.periodic_x || !g.periodic_y) throw StructuralError("cell grid must be periodic in both directions");
  return sample_viscosity(g, [&](double y1, double y2) { return m.sample(macro.t, macro.x1, macro.x2, tau, y1, y2); });
}

namespace {

double rms(const StaggeredVecField& v, const GridSpec& g) {
  const double n = 2.0 * static_cast<double>(g.nx * g.ny);
  return std::sqrt(face_inner(v, v, g) / (g.cell_volume() * n));
}

double unique_mean(const Array2D& a, std::size_t nx, std::size_t ny) {
  double s = 0.0;
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) s += a(i, j);
  return s / static_cast<double>(nx * ny);
}

class CellSolver {
 public:
  CellSolver(const VelocityCoefficients& a, const GridSpec& g)
      : a_(a),
        g_(g),
        poisson_(g.nx, g.ny, g.hx(), g.hy(), SpectralAxis::Periodic, SpectralAxis::Periodic),
        buf_(g.nx * g.ny) {
    if (!g.periodic_x || !g.periodic_y) throw StructuralError("cell grid must be periodic in both directions");
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& c = a.comp[k];
      cx_[k] = c.a11.sum() / static_cast<double>(c.a11.size());
      cy_[k] = c.a22.sum() / static_cast<double>(c.a22.size());
    }
  }

  void project(StaggeredVecField& v) {
    sync_periodic(v, g_);
    CellField d = divergence(v, g_);
    poisson_.solve(d.data(), [](double lx, double ly) { return -(lx + ly); });
    v -= gradient(d, g_);
    remove_means(v);
  }

  void remove_means(StaggeredVecField& v) const {
    const double mx = unique_mean(v.ux, g_.nx, g_.ny);
    const double my = unique_mean(v.uy, g_.nx, g_.ny);
    for (double& x : v.ux.flat()) x -= mx;
    for (double& y : v.uy.flat()) y -= my;
    sync_periodic(v, g_);
  }

  void precondition(const StaggeredVecField& r, StaggeredVecField& z) {
    z = r;
    Array2D* comp[2] = {&z.ux, &z.uy};
    for (std::size_t k = 0; k < 2; ++k) {
      Array2D& c = *comp[k];
      for (std::size_t j = 0; j < g_.ny; ++j)
        for (std::size_t i = 0; i < g_.nx; ++i) buf_[j * g_.nx + i] = c(i, j);
      const double cx = cx_[k];
      const double cy = cy_[k];
      poisson_.solve(buf_.data(), [=](double lx, double ly) { return cx * lx + cy * ly; });
      for (std::size_t j = 0; j < g_.ny; ++j)
        for (std::size_t i = 0; i < g_.nx; ++i) c(i, j) = buf_[j * g_.nx + i];
    }
    project(z);
  }

  void apply(const StaggeredVecField& v, StaggeredVecField& out) const { apply_viscous(g_, a_, v, out); }

  Corrector solve(const Background& strain, const CellSolveOptions& opts, const StaggeredVecField* initial) {
    const StaggeredVecField zero(g_);
    StaggeredVecField b(g_);
    apply_viscous(g_, a_, zero, strain, b);
    b *= -1.0;

    Corrector out;
    out.eta = initial ? *initial : StaggeredVecField(g_);
    check_shape(out.eta, g_, "solve_cell_problem initial iterate");
    project(out.eta);

    StaggeredVecField kx(g_);
    auto true_residual = [&](StaggeredVecField& res) {
      apply(out.eta, kx);
      res = b;
      res -= kx;
      project(res);
    };

    StaggeredVecField res(g_);
    StaggeredVecField z(g_);
    StaggeredVecField p(g_);
    StaggeredVecField q(g_);
    true_residual(res);
    precondition(res, z);
    p = z;
    double rz = face_inner(res, z, g_);
    double rn = rms(res, g_);
    std::size_t it = 0;
    while (rn > opts.tol && it < opts.max_iter) {
      apply(p, q);
      project(q);
      const double pq = face_inner(p, q, g_);
      if (!(pq > 0.0)) break;
      const double alpha = rz / pq;
      out.eta.axpy(alpha, p);
      res.axpy(-alpha, q);
      ++it;
      if (it % 50 == 0) true_residual(res);
      rn = rms(res, g_);
      if (rn <= opts.tol) {
        true_residual(res);
        rn = rms(res, g_);
        if (rn <= opts.tol) break;
      }
      precondition(res, z);
      const double rz_new = face_inner(res, z, g_);
      const double beta = rz_new / rz;
      rz = rz_new;
      p *= beta;
      p += z;
      project(p);
    }
    project(out.eta);
    out.iterations = it;

    // Pressure from the gradient part of the final momentum defect.
    StaggeredVecField defect(g_);
    apply(out.eta, kx);
    defect = b;
    defect -= kx;
    sync_periodic(defect, g_);
    out.pi = divergence(defect, g_);
    poisson_.solve(out.pi.data(), [](double lx, double ly) { return -(lx + ly); });
    defect -= gradient(out.pi, g_);
    sync_periodic(defect, g_);
    out.momentum_residual = rms(defect, g_);
    out.divergence_residual = divergence(out.eta, g_).max_abs();

    if (!(out.momentum_residual <= opts.tol) || !(out.divergence_residual <= opts.tol)) {
      throw CellNonConvergence(fmt::format("cell problem did not converge after {} iterations: momentum "
                                           "residual {:.3e}, divergence {:.3e}, tol {:.1e}",
                                           it, out.momentum_residual, out.divergence_residual, opts.tol),
                               std::max(out.momentum_residual, out.divergence_residual));
    }
    return out;
  }

 private:
  const VelocityCoefficients& a_;
  GridSpec g_;
  SpectralSolver2D poisson_;
  std::vector<double> buf_;
  double cx_[2] = {1.0, 1.0};
  double cy_[2] = {1.0, 1.0};
};

std::size_t tau_count(const ViscosityModel& m, std::size_t requested) {
  if (requested == 0) throw StructuralError("n_tau must be at least 1");
  return m.depends_on_tau() ? requested : 1;
}

double tau_sample(std::size_t k, std::size_t n) { return (static_cast<double>(k) + 0.5) / static_cast<double>(n); }

}  // namespace

Corrector solve_cell_problem(const VelocityCoefficients& a, const Background& strain, const GridSpec& g,
                             const CellSolveOptions& opts, const StaggeredVecField* initial) {
  g.validate();
  CellSolver s(a, g);
  return s.solve(strain, opts, initial);
}

Corrector solve_cell_problem(const VelocityCoefficients& a, UnitStrain r, const GridSpec& g,
                             const CellSolveOptions& opts, const StaggeredVecField* initial) {
  return solve_cell_problem(a, r.background(), g, opts, initial);
}

Corrector solve_cell_problem(const ViscosityModel& m, MacroPoint macro, double tau, UnitStrain r, const GridSpec& g,
                             const CellSolveOptions& opts, const StaggeredVecField* initial) {
  const auto a = cell_coefficients(m, macro, tau, g);
  return solve_cell_problem(a, r, g, opts, initial);
}

// ---------------------------------------------------------------------------

double EffectiveTensor::symmetry_defect() const {
  double d = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) d = std::max(d, std::abs(a_hat(i, j, k, l) - a_hat(j, i, l, k)));
  const double m = a_hat.max_abs();
  return m > 0.0 ? d / m : d;
}

std::array<double, 2> EffectiveTensor::ellipticity_range() const {
  Eigen::Matrix4d M;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) M(j * 2 + l, i * 2 + k) = a_hat(i, j, k, l);
  const Eigen::Matrix4d S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(S, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

EffectiveTensor effective_tensor(const std::vector<VelocityCoefficients>& per_tau, const GridSpec& g,
                                 const EffectiveTensorOptions& opts) {
  if (per_tau.empty()) throw StructuralError("effective_tensor needs at least one tau sample");
  g.validate();
  const std::size_t n_tau = per_tau.size();
  const auto strains = UnitStrain::all();
  std::vector<Corrector> sol(n_tau * 4);
  parallel_for(n_tau * 4, opts.jobs, [&](std::size_t task) {
    const std::size_t t = task / 4;
    sol[task] = solve_cell_problem(per_tau[t], strains[task % 4], g, opts.solve);
  });

  EffectiveTensor out;
  out.grid = g;
  out.n_tau = n_tau;
  out.tol = opts.solve.tol;
  const StaggeredVecField zero(g);
  const double area = g.area();
  for (std::size_t t = 0; t < n_tau; ++t) {
    for (const auto& u : strains) {
      for (const auto& v : strains) {
        const auto& eu = sol[t * 4 + u.index()];
        const auto& ev = sol[t * 4 + v.index()];
        // u = (j, l) is the trial strain, v = (i, k) the test strain.
        const double aper = viscous_bilinear(g, per_tau[t], eu.eta, u.background(), ev.eta, v.background()) / area;
        const double flux = viscous_bilinear(g, per_tau[t], eu.eta, u.background(), zero, v.background()) / area;
        out.a_hat(v.j, u.j, v.l, u.l) += aper / static_cast<double>(n_tau);
        out.assembly_defect = std::max(out.assembly_defect, std::abs(aper - flux));
      }
    }
    for (std::size_t s = 0; s < 4; ++s) out.residuals.push_back(sol[t * 4 + s].momentum_residual);
  }
  return out;
}

EffectiveTensor effective_tensor(const ViscosityModel& m, MacroPoint macro, const GridSpec& g,
                                 const EffectiveTensorOptions& opts) {
  const std::size_t n_tau = tau_count(m, opts.n_tau);
  std::vector<VelocityCoefficients> per_tau;
  per_tau.reserve(n_tau);
  for (std::size_t t = 0; t < n_tau; ++t) per_tau.push_back(cell_coefficients(m, macro, tau_sample(t, n_tau), g));
  return effective_tensor(per_tau, g, opts);
}

std::array<Corrector, 4> solve_correctors(const ViscosityModel& m, MacroPoint macro, double tau, const GridSpec& g,
                                          const EffectiveTensorOptions& opts) {
  const auto a = cell_coefficients(m, macro, tau, g);
  const auto strains = UnitStrain::all();
  std::array<Corrector, 4> out;
  parallel_for(4, opts.jobs, [&](std::size_t s) { out[s] = solve_cell_problem(a, strains[s], g, opts.solve); });
  return out;
}

TruncatedTensor effective_tensor_truncated(const ViscosityModel& m, MacroPoint macro,
                                           const std::vector<double>& radii, double cells_per_unit,
                                           const EffectiveTensorOptions& opts) {
  if (radii.size() < 2) throw StructuralError("truncation schedule needs at least two radii");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0) || (k > 0 && !(radii[k] > radii[k - 1]))) {
      throw StructuralError("truncation radii must be positive and strictly increasing");
    }
  }
  if (!(cells_per_unit > 0.0)) throw StructuralError("cells_per_unit must be positive");
  TruncatedTensor out;
  out.radii = radii;
  for (double R : radii) {
    auto cells = [&](bool varies) {
      return varies ? std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(2.0 * R * cells_per_unit))) : 8;
    };
    GridSpec g = GridSpec::periodic(cells(m.depends_on_y1()), cells(m.depends_on_y2()), 2 * R, 2 * R, -R, -R);
    out.tensor = effective_tensor(m, macro, g, opts);
    out.tensors.push_back(out.tensor.a_hat);
  }
  for (std::size_t k = 1; k < out.tensors.size(); ++k) {
    double d = 0.0;
    for (std::size_t e = 0; e < 16; ++e) d = std::max(d, std::abs(out.tensors[k].a[e] - out.tensors[k - 1].a[e]));
    out.defects.push_back(d);
  }
  if (out.defects.size() >= 2 && std::is_sorted(out.defects.begin(), out.defects.end())) {
    out.warning = fmt::format("successive tensor differences do not decrease over the radius schedule (last {:.3e})",
                              out.defects.back());
  }
  return out;
}

// ---------------------------------------------------------------------------

StaggeredVecField reconstruct_corrector_velocity(const std::array<CellField, 4>& grad_u0,
                                                 const std::array<StaggeredVecField, 4>& eta, double eps,
                                                 const GridSpec& g_macro, const GridSpec& g_cell) {
  if (!(eps > 0.0)) throw StructuralError("reconstruct_corrector_velocity: eps must be positive");
  for (const auto& c : grad_u0) check_shape(c, g_macro, "reconstruct_corrector_velocity gradient");
  for (const auto& e : eta) check_shape(e, g_cell, "reconstruct_corrector_velocity corrector");
  auto wrap = [](double v, double origin, double len) {
    double r = std::fmod(v - origin, len);
    if (r < 0) r += len;
    return origin + r;
  };
  StaggeredVecField out(g_macro);
  auto eval = [&](int comp, double x, double y) {
    const double y1 = wrap(x / eps, g_cell.x0, g_cell.lx);
    const double y2 = wrap(y / eps, g_cell.y0, g_cell.ly);
    double s = 0.0;
    for (std::size_t jl = 0; jl < 4; ++jl) {
      const double gr = interpolate_cell(grad_u0[jl], g_macro, x, y);
      if (gr == 0.0) continue;
      const double e = comp == 0 ? interpolate_ux(eta[jl], g_cell, y1, y2) : interpolate_uy(eta[jl], g_cell, y1, y2);
      s += gr * e;
    }
    return s;
  };
  for (std::size_t j = 0; j < g_macro.ny; ++j)
    for (std::size_t i = 0; i <= g_macro.nx; ++i) out.ux(i, j) = eval(0, g_macro.xf(i), g_macro.yc(j));
  for (std::size_t j = 0; j <= g_macro.ny; ++j)
    for (std::size_t i = 0; i < g_macro.nx; ++i) out.uy(i, j) = eval(1, g_macro.xc(i), g_macro.yf(j));
  return out;
}

// ---------------------------------------------------------------------------

MacroTensorField::MacroTensorField(std::size_t nx, std::size_t ny, double lx, double ly, std::vector<Tensor4> values)
    : nx_(nx), ny_(ny), lx_(lx), ly_(ly), values_(std::move(values)) {
  if (nx_ < 2 || ny_ < 2 || values_.size() != nx_ * ny_) {
    throw StructuralError("macro tensor lattice needs at least 2x2 nodes and one value per node");
  }
}

MacroTensorField MacroTensorField::tabulate(const ViscosityModel& m, double t, const GridSpec& macro,
                                            std::size_t lattice, const GridSpec& cell,
                                            const EffectiveTensorOptions& opts) {
  if (!m.depends_on_macro()) return MacroTensorField(effective_tensor(m, {t, 0.0, 0.0}, cell, opts).a_hat);
  if (lattice < 2) throw StructuralError("macro tensor lattice needs at least 2 nodes per axis");
  std::vector<Tensor4> values(lattice * lattice);
  for (std::size_t j = 0; j < lattice; ++j)
    for (std::size_t i = 0; i < lattice; ++i) {
      const double x1 = macro.x0 + macro.lx * static_cast<double>(i) / static_cast<double>(lattice - 1);
      const double x2 = macro.y0 + macro.ly * static_cast<double>(j) / static_cast<double>(lattice - 1);
      values[j * lattice + i] = effective_tensor(m, {t, x1, x2}, cell, opts).a_hat;
    }
  return {lattice, lattice, macro.lx, macro.ly, std::move(values)};
}

Tensor4 MacroTensorField::at(double x1, double x2) const {
  if (values_.empty()) throw StructuralError("empty macro tensor field");
  if (values_.size() == 1) return values_[0];
  auto locate = [](double x, double len, std::size_t n, std::size_t& i0, double& f) {
    const double s = std::clamp(x / len, 0.0, 1.0) * static_cast<double>(n - 1);
    i0 = std::min(static_cast<std::size_t>(s), n - 2);
    f = s - static_cast<double>(i0);
  };
  std::size_t i0 = 0;
  std::size_t j0 = 0;
  double fx = 0.0;
  double fy = 0.0;
  locate(x1, lx_, nx_, i0, fx);
  locate(x2, ly_, ny_, j0, fy);
  Tensor4 t;
  for (std::size_t e = 0; e < 16; ++e) {
    const double v00 = values_[j0 * nx_ + i0].a[e];
    const double v10 = values_[j0 * nx_ + i0 + 1].a[e];
    const double v01 = values_[(j0 + 1) * nx_ + i0].a[e];
    const double v11 = values_[(j0 + 1) * nx_ + i0 + 1].a[e];
    t.a[e] = (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
  }
  return t;
}

}  // namespace chns
