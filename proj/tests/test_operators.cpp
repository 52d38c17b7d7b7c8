#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "chns/operators.hpp"
#include "test_util.hpp"

using namespace chns;
using std::numbers::pi;

namespace {

VelocityCoefficients identity(const GridSpec& g, double nu = 1.0) {
  return sample_viscosity(g, [nu](double, double) { return ViscositySample{nu, 0.0, nu}; });
}

ViscositySample aniso(double x, double y) {
  return {2.0 + std::sin(2 * pi * x), 0.3 * std::cos(2 * pi * y), 2.0 + std::cos(2 * pi * x)};
}

// Constant fourth-order tensor with cross-component terms and major symmetry.
Tensor4 coupled_tensor() {
  Tensor4 t = Tensor4::isotropic(1.5);
  t(0, 1, 0, 0) = t(1, 0, 0, 0) = 0.2;
  t(0, 0, 0, 1) = t(0, 0, 1, 0) = 0.15;
  t(1, 1, 0, 1) = t(1, 1, 1, 0) = -0.1;
  t(0, 1, 0, 1) = t(1, 0, 1, 0) = 0.25;
  t(0, 1, 1, 0) = t(1, 0, 0, 1) = 0.05;
  return t;
}

StaggeredVecField streamfunction_velocity(const GridSpec& g, std::uint32_t seed) {
  // psi on vertices, zero on walls, gives a discretely divergence-free no-slip-normal field.
  Array2D psi(g.nx + 1, g.ny + 1);
  fixtures::fill_random(psi, seed);
  for (std::size_t j = 0; j <= g.ny; ++j)
    for (std::size_t i = 0; i <= g.nx; ++i) {
      if (!g.periodic_x && (i == 0 || i == g.nx)) psi(i, j) = 0.0;
      if (!g.periodic_y && (j == 0 || j == g.ny)) psi(i, j) = 0.0;
      if (g.periodic_x && i == g.nx) psi(i, j) = psi(0, j);
      if (g.periodic_y && j == g.ny) psi(i, j) = psi(i, 0);
    }
  if (g.periodic_x && g.periodic_y) psi(g.nx, g.ny) = psi(0, 0);
  StaggeredVecField u(g);
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i <= g.nx; ++i) u.ux(i, j) = (psi(i, j + 1) - psi(i, j)) / g.hy();
  for (std::size_t j = 0; j <= g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) u.uy(i, j) = -(psi(i + 1, j) - psi(i, j)) / g.hx();
  sync_periodic(u, g);
  return u;
}

template <typename F>
void fill_ux(StaggeredVecField& u, const GridSpec& g, F&& f) {
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i <= g.nx; ++i) u.ux(i, j) = f(g.xf(i), g.yc(j));
}

template <typename F>
void fill_uy(StaggeredVecField& u, const GridSpec& g, F&& f) {
  for (std::size_t j = 0; j <= g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) u.uy(i, j) = f(g.xc(i), g.yf(j));
}

}  // namespace

TEST(Operators, IdentityTensorIsVectorLaplacianStencil) {
  const auto g = GridSpec::box(10, 8, 1.0, 0.8);
  const auto u = fixtures::random_velocity(g, 4);
  const auto d = tensor_diffusion(u, identity(g), g);
  const double ihx2 = 1.0 / (g.hx() * g.hx());
  const double ihy2 = 1.0 / (g.hy() * g.hy());
  for (std::size_t j = 1; j + 1 < g.ny; ++j)
    for (std::size_t i = 1; i < g.nx; ++i) {
      const double ref = (u.ux(i + 1, j) - 2 * u.ux(i, j) + u.ux(i - 1, j)) * ihx2 +
                         (u.ux(i, j + 1) - 2 * u.ux(i, j) + u.ux(i, j - 1)) * ihy2;
      EXPECT_NEAR(d.ux(i, j), ref, 1e-10 * ihx2);
    }
  for (std::size_t j = 1; j < g.ny; ++j)
    for (std::size_t i = 1; i + 1 < g.nx; ++i) {
      const double ref = (u.uy(i + 1, j) - 2 * u.uy(i, j) + u.uy(i - 1, j)) * ihx2 +
                         (u.uy(i, j + 1) - 2 * u.uy(i, j) + u.uy(i, j - 1)) * ihy2;
      EXPECT_NEAR(d.uy(i, j), ref, 1e-10 * ihx2);
    }
  // Tangential wall rows use the antisymmetric ghost.
  const std::size_t i = 3;
  const double ref0 = (u.ux(i + 1, 0) - 2 * u.ux(i, 0) + u.ux(i - 1, 0)) * ihx2 + (u.ux(i, 1) - 3 * u.ux(i, 0)) * ihy2;
  EXPECT_NEAR(d.ux(i, 0), ref0, 1e-10 * ihx2);
}

TEST(Operators, QuadraticProfileGivesTwo) {
  const auto g = GridSpec::periodic(16, 16);
  GridSpec box = GridSpec::box(16, 16);
  box.periodic_y = true;
  StaggeredVecField u(box);
  fill_ux(u, box, [](double x, double) { return x * (1.0 - x); });
  const auto d = tensor_diffusion(u, identity(box), box);
  for (std::size_t j = 0; j < box.ny; ++j)
    for (std::size_t i = 1; i < box.nx; ++i) EXPECT_NEAR(d.ux(i, j), -2.0, 1e-9);
  (void)g;
}

TEST(Operators, ScalesLinearlyWithViscosity) {
  const auto g = GridSpec::box(9, 9);
  const auto u = fixtures::random_velocity(g, 8);
  const auto a = tensor_diffusion(u, identity(g), g);
  auto b = tensor_diffusion(u, identity(g, 3.0), g);
  b.axpy(-3.0, a);
  EXPECT_LT(b.max_abs(), 1e-10 * a.max_abs());
}

TEST(Operators, NonEllipticSampleThrows) {
  const auto g = GridSpec::box(6, 6);
  EXPECT_THROW(sample_viscosity(g, [](double, double) { return ViscositySample{1.0, 2.0, 1.0}; }), CoefficientError);
  EXPECT_THROW(sample_viscosity(g, [](double, double) { return ViscositySample{0.0, 0.0, 1.0}; }), CoefficientError);
}

TEST(Operators, EnergyFormIsSymmetricAndMatchesOperator) {
  for (auto g : {GridSpec::box(9, 7), GridSpec::periodic(8, 8), GridSpec{8, 9, 1.0, 1.0, false, true}}) {
    const auto c = sample_viscosity(g, aniso);
    const auto u = fixtures::random_velocity(g, 21);
    const auto v = fixtures::random_velocity(g, 31);
    StaggeredVecField lu(g);
    apply_viscous(g, c, u, lu);
    const double b_uv = viscous_bilinear(g, c, u, v);
    const double b_vu = viscous_bilinear(g, c, v, u);
    const double scale = viscous_bilinear(g, c, u, u) + viscous_bilinear(g, c, v, v);
    EXPECT_NEAR(b_uv, b_vu, 1e-13 * scale);
    EXPECT_NEAR(face_inner(lu, v, g), b_uv, 1e-12 * scale);
    EXPECT_GT(viscous_bilinear(g, c, u, u), 0.0);
  }
}

TEST(Operators, CoupledTensorFormIsSymmetricAndMatchesOperator) {
  for (auto g : {GridSpec::box(9, 7), GridSpec::periodic(8, 8), GridSpec{8, 9, 1.0, 1.0, true, false}}) {
    const auto t = coupled_tensor();
    const auto c = sample_tensor(g, [&](double, double) { return t; });
    ASSERT_TRUE(c.cross.active);
    const auto u = fixtures::random_velocity(g, 41);
    const auto v = fixtures::random_velocity(g, 51);
    StaggeredVecField lu(g);
    apply_viscous(g, c, u, lu);
    const double b_uv = viscous_bilinear(g, c, u, v);
    const double scale = viscous_bilinear(g, c, u, u) + viscous_bilinear(g, c, v, v);
    EXPECT_NEAR(b_uv, viscous_bilinear(g, c, v, u), 1e-13 * scale);
    EXPECT_NEAR(face_inner(lu, v, g), b_uv, 1e-12 * scale);
  }
}

namespace {

double manufactured_error(std::size_t n) {
  const auto g = GridSpec::periodic(n, n);
  const double k = 2 * pi;
  StaggeredVecField u(g);
  fill_ux(u, g, [&](double x, double y) { return std::sin(k * x) * std::cos(k * y); });
  const auto c = sample_viscosity(g, aniso);
  const auto d = tensor_diffusion(u, c, g);
  double err = 0.0;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double x = g.xf(i);
      const double y = g.yc(j);
      const double w = std::sin(k * x) * std::cos(k * y);
      const double wx = k * std::cos(k * x) * std::cos(k * y);
      const double wxx = -k * k * w;
      const double wyy = -k * k * w;
      const double wxy = -k * k * std::cos(k * x) * std::sin(k * y);
      const double a11 = 2.0 + std::sin(k * x);
      const double a11x = k * std::cos(k * x);
      const double a12 = 0.3 * std::cos(k * y);
      const double a12y = -0.3 * k * std::sin(k * y);
      const double a22 = 2.0 + std::cos(k * x);
      const double ref = a11x * wx + a11 * wxx + 2 * a12 * wxy + a12y * wx + a22 * wyy;
      err = std::max(err, std::abs(d.ux(i, j) - ref));
    }
  return err;
}

double layered_box_error(std::size_t n) {
  // a = 2 + sin(2 pi y1) with y1 = x; u vanishes with zero curvature at the walls.
  const auto g = GridSpec::box(n, n);
  StaggeredVecField u(g);
  fill_ux(u, g, [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); });
  fill_uy(u, g, [](double x, double y) { return std::sin(2 * pi * x) * std::sin(pi * y); });
  const auto c = sample_viscosity(g, [](double x, double) {
    const double a = 2.0 + std::sin(2 * pi * x);
    return ViscositySample{a, 0.0, a};
  });
  const auto d = tensor_diffusion(u, c, g);
  double err = 0.0;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 1; i < g.nx; ++i) {
      const double x = g.xf(i);
      const double y = g.yc(j);
      const double a = 2.0 + std::sin(2 * pi * x);
      const double ax = 2 * pi * std::cos(2 * pi * x);
      const double ref = ax * pi * std::cos(pi * x) * std::sin(pi * y) - a * 2 * pi * pi * std::sin(pi * x) * std::sin(pi * y);
      err = std::max(err, std::abs(d.ux(i, j) - ref));
    }
  for (std::size_t j = 1; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double x = g.xc(i);
      const double y = g.yf(j);
      const double a = 2.0 + std::sin(2 * pi * x);
      const double ax = 2 * pi * std::cos(2 * pi * x);
      const double ref = ax * 2 * pi * std::cos(2 * pi * x) * std::sin(pi * y) -
                         a * 5 * pi * pi * std::sin(2 * pi * x) * std::sin(pi * y);
      err = std::max(err, std::abs(d.uy(i, j) - ref));
    }
  return err;
}

double coupled_error(std::size_t n) {
  const auto g = GridSpec::periodic(n, n);
  const auto t = coupled_tensor();
  const auto c = sample_tensor(g, [&](double, double) { return t; });
  const double k = 2 * pi;
  // u^0 = sin(kx) cos(ky), u^1 = cos(kx) sin(2ky)
  StaggeredVecField u(g);
  fill_ux(u, g, [&](double x, double y) { return std::sin(k * x) * std::cos(k * y); });
  fill_uy(u, g, [&](double x, double y) { return std::cos(k * x) * std::sin(2 * k * y); });
  // Hessians H[l][i][j] = d_i d_j u^l
  auto hess = [&](int l, double x, double y, int i, int j) {
    if (l == 0) {
      if (i == 0 && j == 0) return -k * k * std::sin(k * x) * std::cos(k * y);
      if (i == 1 && j == 1) return -k * k * std::sin(k * x) * std::cos(k * y);
      return -k * k * std::cos(k * x) * std::sin(k * y);
    }
    if (i == 0 && j == 0) return -k * k * std::cos(k * x) * std::sin(2 * k * y);
    if (i == 1 && j == 1) return -4 * k * k * std::cos(k * x) * std::sin(2 * k * y);
    return -2 * k * k * std::sin(k * x) * std::cos(2 * k * y);
  };
  const auto d = tensor_diffusion(u, c, g);
  double err = 0.0;
  for (int comp = 0; comp < 2; ++comp) {
    const std::size_t nx = comp == 0 ? g.nx : g.nx;
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        const double x = comp == 0 ? g.xf(i) : g.xc(i);
        const double y = comp == 0 ? g.yc(j) : g.yf(j);
        double ref = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int l = 0; l < 2; ++l) ref += t(a, b, comp, l) * hess(l, x, y, a, b);
        const double got = comp == 0 ? d.ux(i, j) : d.uy(i, j);
        err = std::max(err, std::abs(got - ref));
      }
  }
  return err;
}

}  // namespace

TEST(Operators, ManufacturedAnisotropicSecondOrder) {
  const double e1 = manufactured_error(32);
  const double e2 = manufactured_error(64);
  EXPECT_GE(std::log2(e1 / e2), 1.9) << e1 << " " << e2;
}

TEST(Operators, ManufacturedLayeredBoxSecondOrder) {
  const double e1 = layered_box_error(32);
  const double e2 = layered_box_error(64);
  EXPECT_GE(std::log2(e1 / e2), 1.9) << e1 << " " << e2;
}

TEST(Operators, ManufacturedCoupledTensorSecondOrder) {
  const double e1 = coupled_error(32);
  const double e2 = coupled_error(64);
  EXPECT_GE(std::log2(e1 / e2), 1.9) << e1 << " " << e2;
}

TEST(Operators, ComponentwiseTensorMatchesScalarSampling) {
  const auto g = GridSpec::box(8, 8);
  const auto a = sample_viscosity(g, aniso);
  const auto b = sample_tensor(g, [](double x, double y) { return Tensor4::componentwise(aniso(x, y)); });
  EXPECT_FALSE(b.cross.active);
  const auto u = fixtures::random_velocity(g, 77);
  auto da = tensor_diffusion(u, a, g);
  da -= tensor_diffusion(u, b, g);
  EXPECT_EQ(da.max_abs(), 0.0);
}

TEST(Operators, ConvectionIsSkewSymmetric) {
  for (auto g : {GridSpec::box(12, 10), GridSpec::periodic(8, 12), GridSpec{10, 8, 1.0, 1.0, true, false}}) {
    const auto a = streamfunction_velocity(g, 5);
    ASSERT_LT(divergence(a, g).max_abs(), 1e-10);
    const auto v = fixtures::random_velocity(g, 6);
    const double s = face_inner(convect(a, v, g), v, g);
    EXPECT_LT(std::abs(s), 1e-12 * a.max_abs() * face_inner(v, v, g) / g.hx());
  }
}

TEST(Operators, ScalarAdvectionConservesAndIsSkew) {
  for (auto g : {GridSpec::box(12, 10), GridSpec::periodic(8, 8)}) {
    const auto u = streamfunction_velocity(g, 15);
    const auto phi = fixtures::random_cell(g, 16);
    const auto adv = advect_scalar(u, phi, g);
    EXPECT_LT(std::abs(adv.sum()), 1e-11 * adv.max_abs() * static_cast<double>(adv.size()));
    EXPECT_LT(std::abs(cell_inner(adv, phi, g)), 1e-12 * u.max_abs() * cell_inner(phi, phi, g) / g.hx());
  }
}

TEST(Operators, GradientCentersOfLinearField) {
  GridSpec g = GridSpec::periodic(8, 8);
  g.periodic_x = false;
  g.periodic_y = false;
  StaggeredVecField u(g);
  fill_ux(u, g, [](double x, double y) { return 0.3 * x + 0.7 * y; });
  fill_uy(u, g, [](double x, double y) { return -0.2 * x + 0.5 * y; });
  const auto gr = velocity_gradient_centers(u, g);
  // interior cells only: wall data here is not no-slip
  for (std::size_t j = 1; j + 1 < g.ny; ++j)
    for (std::size_t i = 1; i + 1 < g.nx; ++i) {
      EXPECT_NEAR(gr[0](i, j), 0.3, 1e-12);
      EXPECT_NEAR(gr[1](i, j), -0.2, 1e-12);
      EXPECT_NEAR(gr[2](i, j), 0.7, 1e-12);
      EXPECT_NEAR(gr[3](i, j), 0.5, 1e-12);
    }
}
