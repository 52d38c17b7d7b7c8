#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "chns/grid.hpp"
#include "test_util.hpp"

using namespace chns;

TEST(Grid, ValidateRejectsSmallOrEmpty) {
  EXPECT_THROW(GridSpec::box(3, 8).validate(), StructuralError);
  GridSpec g = GridSpec::box(8, 8);
  g.lx = 0.0;
  EXPECT_THROW(g.validate(), StructuralError);
  EXPECT_NO_THROW(GridSpec::box(4, 4).validate());
}

TEST(Grid, DivergenceOfConstantIsZero) {
  const auto g = GridSpec::box(8, 6);
  StaggeredVecField u(g);
  u.ux.fill(1.0);
  u.uy.fill(1.0);
  EXPECT_EQ(divergence(u, g).max_abs(), 0.0);
}

TEST(Grid, DivergenceExactOnAffine) {
  const auto g = GridSpec::box(9, 7, 1.3, 0.8);
  StaggeredVecField a(g);
  StaggeredVecField b(g);
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i <= g.nx; ++i) {
      a.ux(i, j) = g.xf(i);
      b.ux(i, j) = g.xf(i);
    }
  for (std::size_t j = 0; j <= g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      a.uy(i, j) = -g.yf(j);
      b.uy(i, j) = g.yf(j);
    }
  EXPECT_LT(divergence(a, g).max_abs(), 1e-14);
  const auto d = divergence(b, g);
  for (double v : d.flat()) EXPECT_NEAR(v, 2.0, 1e-13);
}

TEST(Grid, GradientOfConstantAndLinear) {
  const auto g = GridSpec::box(8, 8);
  CellField c(g, 3.5);
  EXPECT_EQ(gradient(c, g).max_abs(), 0.0);
  CellField p(g);
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) p(i, j) = g.xc(i);
  const auto gp = gradient(p, g);
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 1; i < g.nx; ++i) EXPECT_NEAR(gp.ux(i, j), 1.0, 1e-13);
  EXPECT_LT(gp.uy.max_abs(), 1e-14);
}

TEST(Grid, GradientIsNegativeAdjointOfDivergence) {
  for (auto g : {GridSpec::box(12, 9, 1.0, 0.7), GridSpec::periodic(8, 10), GridSpec{10, 6, 1.0, 1.0, true, false}}) {
    const auto p = fixtures::random_cell(g, 11);
    const auto u = fixtures::random_velocity(g, 12);
    const double lhs = face_inner(gradient(p, g), u, g);
    const double rhs = -cell_inner(p, divergence(u, g), g);
    const double scale = std::sqrt(face_inner(u, u, g) * cell_inner(p, p, g)) / g.hx();
    EXPECT_LE(std::abs(lhs - rhs), 1e-13 * scale);
  }
}

TEST(Grid, DivGradIsFivePointLaplacian) {
  const auto g = GridSpec::box(10, 8, 1.0, 0.9);
  const auto p = fixtures::random_cell(g, 3);
  const auto a = divergence(gradient(p, g), g);
  const auto b = laplacian(p, g);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a.flat()[k], b.flat()[k], 1e-10);
  const double ihx2 = 1.0 / (g.hx() * g.hx());
  const double ihy2 = 1.0 / (g.hy() * g.hy());
  const std::size_t i = 4;
  const std::size_t j = 3;
  const double ref = (p(i + 1, j) - 2 * p(i, j) + p(i - 1, j)) * ihx2 + (p(i, j + 1) - 2 * p(i, j) + p(i, j - 1)) * ihy2;
  EXPECT_NEAR(b(i, j), ref, 1e-10);
}

TEST(Grid, ShapeMismatchThrows) {
  const auto g = GridSpec::box(8, 8);
  const auto h = GridSpec::box(8, 9);
  EXPECT_THROW(divergence(StaggeredVecField(h), g), StructuralError);
  EXPECT_THROW(gradient(CellField(h), g), StructuralError);
}

TEST(Grid, OperatorsAreLinear) {
  const auto g = GridSpec::box(8, 8);
  const auto u = fixtures::random_velocity(g, 1);
  const auto v = fixtures::random_velocity(g, 2);
  StaggeredVecField w = u;
  w *= 2.5;
  w.axpy(-1.5, v);
  auto d = divergence(u, g);
  d *= 2.5;
  d.axpy(-1.5, divergence(v, g));
  const auto dw = divergence(w, g);
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(dw.flat()[k], d.flat()[k], 1e-12);
}

TEST(Grid, NoSlipZeroesWallFaces) {
  const auto g = GridSpec::box(6, 5);
  const auto u = fixtures::random_velocity(g, 9);
  for (std::size_t j = 0; j < g.ny; ++j) {
    EXPECT_EQ(u.ux(0, j), 0.0);
    EXPECT_EQ(u.ux(g.nx, j), 0.0);
  }
  for (std::size_t i = 0; i < g.nx; ++i) {
    EXPECT_EQ(u.uy(i, 0), 0.0);
    EXPECT_EQ(u.uy(i, g.ny), 0.0);
  }
}

TEST(Grid, FieldDumpRoundTrip) {
  const auto g = GridSpec::box(7, 5, 2.0, 1.0);
  auto f = fixtures::random_cell(g, 5);
  const auto dir = std::filesystem::temp_directory_path() / "chns_dump_test";
  std::filesystem::create_directories(dir);
  const auto stem = (dir / "phi").string();
  write_field(stem, f, g, {"phi", Stagger::Cell, 0.125, "abc"});
  GridSpec g2;
  DumpMeta m;
  const auto back = read_field(stem, &g2, &m);
  EXPECT_EQ(back, static_cast<const Array2D&>(f));
  EXPECT_EQ(g2.nx, 7u);
  EXPECT_EQ(m.field, "phi");
  EXPECT_EQ(m.stagger, Stagger::Cell);
  EXPECT_DOUBLE_EQ(m.t, 0.125);
  EXPECT_EQ(std::filesystem::file_size(stem + ".bin"), 7u * 5u * 8u);
  std::filesystem::remove_all(dir);
}
