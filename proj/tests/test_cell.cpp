#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <vector>

#include "chns/cell.hpp"
#include "test_util.hpp"

using namespace chns;
using std::numbers::pi;

namespace {

// Independent 1D periodic oracle for d/dy (a (1 + chi')) = 0: the flux
// a (1 + chi') equals the harmonic mean everywhere. Nodes at m*h, edges midway.
std::vector<double> layered_oracle(const ViscosityModel& m, std::size_t n) {
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

double max_tensor_diff(const Tensor4& a, const Tensor4& b) {
  double d = 0.0;
  for (std::size_t e = 0; e < 16; ++e) d = std::max(d, std::abs(a.a[e] - b.a[e]));
  return d;
}

}  // namespace

TEST(Cell, ConstantModelHasZeroCorrectors) {
  const auto g = GridSpec::periodic(16, 16);
  const auto m = ViscosityModel::constant(2.0);
  for (auto r : UnitStrain::all()) {
    const auto c = solve_cell_problem(m, {}, 0.0, r, g);
    EXPECT_EQ(c.eta.max_abs(), 0.0);
    EXPECT_LT(c.pi.max_abs(), 1e-14);
  }
}

TEST(Cell, ConstantModelTensorIsIdentity) {
  const auto start = std::chrono::steady_clock::now();
  const auto t = effective_tensor(ViscosityModel::constant(1.0), {}, GridSpec::periodic(64, 64));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LE(max_tensor_diff(t.a_hat, Tensor4::isotropic(1.0)), 1e-10);
  EXPECT_LT(secs, 10.0);
  EXPECT_EQ(t.n_tau, 1u);
}

TEST(Cell, ConvergedSolveMeetsResidualContract) {
  const auto g = GridSpec::periodic(32, 32);
  const auto m = ViscosityModel::smooth_periodic();
  for (auto r : UnitStrain::all()) {
    const auto c = solve_cell_problem(m, {}, 0.2, r, g);
    EXPECT_LE(c.momentum_residual, 1e-10);
    EXPECT_LE(c.divergence_residual, 1e-10);
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) {
        mx += c.eta.ux(i, j);
        my += c.eta.uy(i, j);
      }
    EXPECT_LT(std::abs(mx) / 1024.0, 1e-13);
    EXPECT_LT(std::abs(my) / 1024.0, 1e-13);
    EXPECT_LT(std::abs(c.pi.sum()) / 1024.0, 1e-12);
    for (std::size_t j = 0; j < g.ny; ++j) EXPECT_EQ(c.eta.ux(0, j), c.eta.ux(g.nx, j));
  }
}

TEST(Cell, NonConvergenceCarriesResidual) {
  CellSolveOptions o;
  o.max_iter = 1;
  o.tol = 1e-14;
  try {
    solve_cell_problem(ViscosityModel::smooth_periodic(), {}, 0.1, {0, 0}, GridSpec::periodic(16, 16), o);
    FAIL() << "expected non-convergence";
  } catch (const CellNonConvergence& e) {
    EXPECT_GT(e.residual(), 1e-14);
  }
}

TEST(Cell, NonEllipticModelIsCoefficientError) {
  ViscosityModel m;
  m.kind = ViscosityKind::Constant;
  m.nu = 0.0;
  EXPECT_THROW(solve_cell_problem(m, {}, 0.0, {0, 0}, GridSpec::periodic(8, 8)), CoefficientError);
}

TEST(Cell, RejectsNonPeriodicGrid) {
  EXPECT_THROW(solve_cell_problem(ViscosityModel::constant(1.0), {}, 0.0, {0, 0}, GridSpec::box(8, 8)),
               StructuralError);
}

TEST(Cell, LayeredCorrectorMatchesOneDimensionalOracle) {
  const auto m = ViscosityModel::layered();
  const std::size_t n = 1024;
  const auto g = GridSpec::periodic(n, 8);
  const auto c = solve_cell_problem(m, {}, 0.0, UnitStrain{0, 1}, g);
  const auto chi = layered_oracle(m, 10 * n);
  double err = 0.0;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(c.eta.uy(i, j) - chi[10 * i + 5]));
  EXPECT_LE(err, 1e-6);
  EXPECT_LT(c.eta.ux.max_abs(), 1e-10);
}

TEST(Cell, LayeredTensorStructure) {
  const auto m = ViscosityModel::layered();
  const auto t = effective_tensor(m, {}, GridSpec::periodic(256, 8));
  // harmonic mean of a for the (1,1)-(2,2) entry, arithmetic mean on the other diagonal entries
  const std::size_t n = 100000;
  double arith = 0.0;
  double harm = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = m.sample(0, 0, 0, 0, (static_cast<double>(k) + 0.5) / n, 0).a11;
    arith += a / n;
    harm += 1.0 / (a * n);
  }
  harm = 1.0 / harm;
  EXPECT_NEAR(t.a_hat(0, 0, 1, 1), harm, 1e-4);
  EXPECT_NEAR(t.a_hat(0, 0, 0, 0), arith, 1e-4);
  EXPECT_NEAR(t.a_hat(1, 1, 0, 0), arith, 1e-4);
  EXPECT_NEAR(t.a_hat(1, 1, 1, 1), arith, 1e-4);
}

TEST(Cell, LayeredTensorMatchesRichardsonReference) {
  const auto m = ViscosityModel::layered();
  const auto a64 = effective_tensor(m, {}, GridSpec::periodic(64, 64)).a_hat;
  const auto a128 = effective_tensor(m, {}, GridSpec::periodic(128, 128)).a_hat;
  const auto a256 = effective_tensor(m, {}, GridSpec::periodic(256, 256)).a_hat;
  const double scale = a256.max_abs();
  for (std::size_t e = 0; e < 16; ++e) {
    const double ref = (4.0 * a256.a[e] - a128.a[e]) / 3.0;
    EXPECT_LE(std::abs(a64.a[e] - ref), 0.01 * std::max(std::abs(ref), 1e-3 * scale)) << "entry " << e;
  }
}

TEST(Cell, SmoothPeriodicMajorSymmetry) {
  const auto t = effective_tensor(ViscosityModel::smooth_periodic(), {}, GridSpec::periodic(32, 32));
  EXPECT_EQ(t.n_tau, 8u);
  EXPECT_LE(t.symmetry_defect(), 1e-8);
  EXPECT_LE(t.assembly_defect, 1e-8 * t.a_hat.max_abs());
}

TEST(Cell, AnisotropicTensorIsElliptic) {
  const auto m = ViscosityModel::anisotropic();
  EffectiveTensorOptions o;
  o.n_tau = 4;
  const auto t = effective_tensor(m, {}, GridSpec::periodic(32, 32), o);
  const auto [lo, hi] = t.ellipticity_range();
  EXPECT_GE(lo, m.gamma - 1e-6);
  EXPECT_LE(hi, 1.0 / m.gamma + 1e-6);
  EXPECT_LE(t.symmetry_defect(), 1e-8);
  EXPECT_TRUE(t.a_hat.has_cross_component());
}

TEST(Cell, UniqueFromDifferentInitialIterates) {
  const auto g = GridSpec::periodic(32, 32);
  const auto a = cell_coefficients(ViscosityModel::anisotropic(), {}, 0.3, g);
  const auto init = fixtures::random_velocity(g, 99);
  const auto c1 = solve_cell_problem(a, UnitStrain{1, 0}, g);
  const auto c2 = solve_cell_problem(a, UnitStrain{1, 0}, g, {}, &init);
  auto d = c1.eta;
  d -= c2.eta;
  const auto gd = velocity_gradient_centers(d, g);
  for (const auto& f : gd) EXPECT_LE(f.max_abs(), 1e-8);
}

TEST(Cell, LinearInStrain) {
  const auto g = GridSpec::periodic(32, 32);
  const auto a = cell_coefficients(ViscosityModel::anisotropic(), {}, 0.0, g);
  const auto e1 = solve_cell_problem(a, UnitStrain{0, 1}, g).eta;
  const auto e2 = solve_cell_problem(a, UnitStrain{1, 1}, g).eta;
  Background mix{};
  mix[1][0] = 2.0;
  mix[1][1] = -0.5;
  const auto e = solve_cell_problem(a, mix, g).eta;
  auto ref = e1;
  ref *= 2.0;
  ref.axpy(-0.5, e2);
  ref -= e;
  EXPECT_LE(ref.max_abs(), 1e-8);
}

TEST(Cell, TruncatedConstantModel) {
  const auto r = effective_tensor_truncated(ViscosityModel::constant(1.5), {}, {2.0, 4.0}, 4.0);
  for (const auto& t : r.tensors) EXPECT_LE(max_tensor_diff(t, Tensor4::isotropic(1.5)), 1e-10);
}

TEST(Cell, TruncatedRejectsBadSchedule) {
  EXPECT_THROW(effective_tensor_truncated(ViscosityModel::quasi_periodic(), {}, {4.0}, 4.0), StructuralError);
  EXPECT_THROW(effective_tensor_truncated(ViscosityModel::quasi_periodic(), {}, {4.0, 4.0}, 4.0), StructuralError);
}

TEST(Cell, CommensurateQuasiPeriodicMatchesPeriodicCell) {
  const auto m = ViscosityModel::quasi_periodic(1.0, 0.3, 1.0, 2.0);
  const auto per = effective_tensor(m, {}, GridSpec::periodic(128, 8, 2 * pi, 1.0)).a_hat;
  const auto tr = effective_tensor_truncated(m, {}, {4.0, 8.0}, 16.0);
  const auto& a = tr.tensors.back();
  for (std::size_t e = 0; e < 16; ++e) {
    if (std::abs(per.a[e]) < 1e-8) {
      EXPECT_LT(std::abs(a.a[e]), 1e-6);
    } else {
      EXPECT_LE(std::abs(a.a[e] - per.a[e]), 0.02 * std::abs(per.a[e])) << "entry " << e;
    }
  }
}

TEST(Cell, QuasiPeriodicDefectsDecrease) {
  const auto tr = effective_tensor_truncated(ViscosityModel::quasi_periodic(), {}, {4.0, 8.0, 16.0}, 8.0);
  ASSERT_EQ(tr.defects.size(), 2u);
  EXPECT_LT(tr.defects[1], tr.defects[0]);
  EXPECT_FALSE(tr.warning.has_value());
}

TEST(Cell, ReconstructionZeroAndLinear) {
  const auto gm = GridSpec::box(16, 16);
  const auto gc = GridSpec::periodic(16, 16);
  std::array<CellField, 4> grad;
  for (auto& f : grad) f = fixtures::random_cell(gm, 3);
  std::array<StaggeredVecField, 4> zero{StaggeredVecField(gc), StaggeredVecField(gc), StaggeredVecField(gc),
                                        StaggeredVecField(gc)};
  EXPECT_EQ(reconstruct_corrector_velocity(grad, zero, 0.1, gm, gc).max_abs(), 0.0);
  const auto cor = solve_correctors(ViscosityModel::layered(), {}, 0.0, gc);
  std::array<StaggeredVecField, 4> eta{cor[0].eta, cor[1].eta, cor[2].eta, cor[3].eta};
  const auto u1 = reconstruct_corrector_velocity(grad, eta, 0.125, gm, gc);
  auto g2 = grad;
  for (auto& f : g2) f *= 3.0;
  auto u3 = reconstruct_corrector_velocity(g2, eta, 0.125, gm, gc);
  u3.axpy(-3.0, u1);
  EXPECT_LE(u3.max_abs(), 1e-12 * std::max(1.0, u1.max_abs()));
}

TEST(Cell, MacroTableInterpolatesNodes) {
  const auto m = ViscosityModel::separable_macro();
  EffectiveTensorOptions o;
  o.n_tau = 2;
  const auto field = MacroTensorField::tabulate(m, 0.0, GridSpec::box(8, 8), 3, GridSpec::periodic(16, 16), o);
  ASSERT_FALSE(field.is_constant());
  const auto direct = effective_tensor(m, {0.0, 0.5, 1.0}, GridSpec::periodic(16, 16), o).a_hat;
  EXPECT_LE(max_tensor_diff(field.at(0.5, 1.0), direct), 1e-12);
}
