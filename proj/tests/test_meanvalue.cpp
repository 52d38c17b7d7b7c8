#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "chns/meanvalue.hpp"
#include "chns/viscosity.hpp"

using namespace chns;
using std::numbers::pi;

namespace {

CellTrajectory steady(const GridSpec& g, double T, std::size_t steps, const std::function<double(double, double)>& f) {
  CellTrajectory tr;
  for (std::size_t s = 0; s <= steps; ++s) {
    CellField c(g);
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) c(i, j) = f(g.xc(i), g.yc(j));
    tr.push(T * static_cast<double>(s) / static_cast<double>(steps), std::move(c));
  }
  return tr;
}

}  // namespace

TEST(MeanValue, ConstantIsExact) {
  const auto est = mean_value([](std::span<const double>) { return 2.5; }, {1.0, 4.0, 16.0});
  for (double p : est.partials) EXPECT_DOUBLE_EQ(p, 2.5);
  EXPECT_TRUE(est.converged);
  EXPECT_EQ(est.partials.size(), est.radii.size());
}

TEST(MeanValue, ZeroMeanCosine) {
  const auto est = mean_value([](std::span<const double> y) { return std::cos(2 * pi * y[0]); }, {25.0, 50.0});
  EXPECT_LE(std::abs(est.value), 1e-3);
}

TEST(MeanValue, DistinctFrequenciesHaveZeroMean) {
  MeanValueOptions o;
  o.max_frequency = 1.0 + std::sqrt(2.0);
  const auto est =
      mean_value([](std::span<const double> y) { return std::cos(y[0]) * std::cos(std::sqrt(2.0) * y[0]); }, {100.0, 200.0}, o);
  EXPECT_LE(std::abs(est.value), 1e-2);
}

TEST(MeanValue, PeriodicSamplerDecaysAtFirstOrder) {
  const auto f = [](std::span<const double> y) { return 1.0 + std::cos(2 * pi * y[0]); };
  const auto est = mean_value(f, {4.25, 8.25});
  const double e1 = std::abs(est.partials[0] - 1.0);
  const double e2 = std::abs(est.partials[1] - 1.0);
  EXPECT_GE(std::log(e1 / e2) / std::log(8.25 / 4.25), 0.9);
  EXPECT_NEAR(est.defect, std::abs(est.partials[1] - est.partials[0]), 0.0);
}

TEST(MeanValue, PeriodicModelMatchesCellAverage) {
  const auto m = ViscosityModel::smooth_periodic();
  MeanValueOptions o;
  o.dim = 2;
  const auto est = mean_value([&](std::span<const double> y) { return m.sample(0, 0, 0, 0.0, y[0], y[1]).a11; }, {25.0, 50.0}, o);
  // One-cell integral of 1 + 0.5 cos cos is 1.
  EXPECT_NEAR(est.value, 1.0, 1e-3);
}

TEST(MeanValue, Linearity) {
  auto f = [](std::span<const double> y) { return std::sin(3.0 * y[0]) + 0.2; };
  auto g = [](std::span<const double> y) { return std::cos(1.3 * y[0]); };
  MeanValueOptions o;
  o.max_frequency = 3.0;
  const double a = mean_value(f, {7.0}, o).value;
  const double b = mean_value(g, {7.0}, o).value;
  const double c = mean_value([&](std::span<const double> y) { return 2.0 * f(y) - 3.0 * g(y); }, {7.0}, o).value;
  EXPECT_NEAR(c, 2.0 * a - 3.0 * b, 1e-13);
}

TEST(MeanValue, RejectsBadInput) {
  MeanValueOptions o;
  o.dim = 4;
  EXPECT_THROW(mean_value([](std::span<const double>) { return 0.0; }, {1.0}, o), StructuralError);
  EXPECT_THROW(mean_value([](std::span<const double>) { return 0.0; }, {2.0, 1.0}), StructuralError);
}

TEST(TwoScale, UnitFieldAgainstZeroMeanPsi) {
  const auto g = GridSpec::box(256, 8);
  const auto tr = steady(g, 1.0, 4, [](double, double) { return 1.0; });
  for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    EXPECT_LE(std::abs(two_scale_pairing(tr, TestFunction::cos_y1(), eps, g)), 5 * eps);
  }
}

TEST(TwoScale, CalibrationCosSquared) {
  const double eps = 1.0 / 32;
  const auto g = GridSpec::box(512, 8);
  const auto tr = steady(g, 1.0, 8, [&](double x, double) { return std::cos(2 * pi * x / eps); });
  const double v = two_scale_pairing(tr, TestFunction::cos_y1(), eps, g);
  EXPECT_NEAR(v, 0.5, 0.05 * 0.5);
}

TEST(TwoScale, NonOscillatingPsiIsPlainPairing) {
  const auto g = GridSpec::box(16, 12);
  const auto tr = steady(g, 0.5, 5, [](double x, double y) { return x * x + y; });
  TestFunction psi;
  psi.poly_x1 = {1.0, -2.0};
  psi.poly_t = {0.5, 1.0};
  const auto w = trapezoid_weights(tr.times);
  double ref = 0.0;
  for (std::size_t s = 0; s < tr.size(); ++s)
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i)
        ref += w[s] * tr.fields[s](i, j) * (1.0 - 2.0 * g.xc(i)) * (0.5 + tr.times[s]) * g.cell_volume();
  EXPECT_NEAR(two_scale_pairing(tr, psi, 0.01, g), ref, 1e-14);
  EXPECT_NEAR(two_scale_pairing(tr, psi, 0.3, g), ref, 1e-14);
}

TEST(TwoScale, MeanZeroPsiDecaysLinearly) {
  const auto g = GridSpec::box(1024, 4);
  const auto tr = steady(g, 1.0, 2, [](double x, double) { return std::exp(x); });
  TestFunction psi;
  psi.waves.push_back({{0.0, 2 * pi, 0.0}, -pi / 2});  // sin(2 pi y1)
  double prev = 0.0;
  for (double eps : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    const double v = std::abs(two_scale_pairing(tr, psi, eps, g));
    if (prev > 0.0) EXPECT_GE(std::log2(prev / v), 0.9);
    prev = v;
  }
}
