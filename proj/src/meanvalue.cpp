#include "chns/meanvalue.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace chns {

MeanValueEstimate mean_value(const Sampler& f, const std::vector<double>& radii, const MeanValueOptions& opts) {
  if (opts.dim < 1 || opts.dim > 3) throw StructuralError(fmt::format("mean_value: dimension {} not in 1..3", opts.dim));
  if (radii.empty()) throw StructuralError("mean_value: empty radius schedule");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0) || (k > 0 && !(radii[k] > radii[k - 1]))) {
      throw StructuralError("mean_value: radii must be positive and increasing");
    }
  }
  MeanValueEstimate est;
  est.radii = radii;
  const double waves_per_unit = std::abs(opts.max_frequency) / (2.0 * std::numbers::pi);
  for (double R : radii) {
    const auto n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(2.0 * R * waves_per_unit * static_cast<double>(opts.points_per_wavelength))));
    const double total = std::pow(static_cast<double>(n), static_cast<double>(opts.dim));
    if (total > 5e8) throw StructuralError(fmt::format("mean_value: {:.3g} quadrature nodes at R = {} is too many", total, R));
    const double h = 2.0 * R / static_cast<double>(n);
    std::array<double, 3> y{};
    std::array<std::size_t, 3> idx{};
    double sum = 0.0;
    const auto count = static_cast<std::size_t>(total);
    for (std::size_t k = 0; k < count; ++k) {
      std::size_t r = k;
      for (std::size_t d = 0; d < opts.dim; ++d) {
        idx[d] = r % n;
        r /= n;
        y[d] = -R + (static_cast<double>(idx[d]) + 0.5) * h;
      }
      sum += f(std::span<const double>(y.data(), opts.dim));
    }
    est.partials.push_back(sum / total);
  }
  est.value = est.partials.back();
  if (est.partials.size() >= 2) {
    est.defect = std::abs(est.partials.back() - est.partials[est.partials.size() - 2]);
    est.converged = est.defect <= opts.tol;
  }
  return est;
}

namespace {

double horner(const std::vector<double>& c, double x) {
  if (c.empty()) return 1.0;
  double s = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
  return s;
}

}  // namespace

double TestFunction::operator()(double t, double x1, double x2, double tau, double y1, double y2) const {
  double v = horner(poly_t, t) * horner(poly_x1, x1) * horner(poly_x2, x2);
  for (const auto& w : waves) v *= std::cos(w.omega[0] * tau + w.omega[1] * y1 + w.omega[2] * y2 + w.phase);
  return v;
}

TestFunction TestFunction::constant(double c) {
  TestFunction f;
  f.poly_t = {c};
  f.name = "constant";
  return f;
}

TestFunction TestFunction::cos_y1() {
  TestFunction f;
  f.waves.push_back({{0.0, 2.0 * std::numbers::pi, 0.0}, 0.0});
  f.name = "cos_2pi_y1";
  return f;
}

std::vector<double> trapezoid_weights(const std::vector<double>& times) {
  std::vector<double> w(times.size(), 0.0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double dt = times[k] - times[k - 1];
    if (!(dt > 0.0)) throw StructuralError("trajectory times must be strictly increasing");
    w[k - 1] += 0.5 * dt;
    w[k] += 0.5 * dt;
  }
  return w;
}

double two_scale_pairing(const CellTrajectory& field, const TestFunction& psi, double eps, const GridSpec& g) {
  if (!(eps > 0.0)) throw StructuralError("two_scale_pairing: eps must be positive");
  if (field.times.size() != field.fields.size()) throw StructuralError("two_scale_pairing: ragged trajectory");
  const auto w = trapezoid_weights(field.times);
  const double vol = g.cell_volume();
  double total = 0.0;
  for (std::size_t s = 0; s < field.size(); ++s) {
    if (w[s] == 0.0) continue;
    const auto& f = field.fields[s];
    check_shape(f, g, "two_scale_pairing");
    const double t = field.times[s];
    double acc = 0.0;
    for (std::size_t j = 0; j < g.ny; ++j) {
      const double y = g.yc(j);
      for (std::size_t i = 0; i < g.nx; ++i) {
        const double x = g.xc(i);
        acc += f(i, j) * psi(t, x, y, t / eps, x / eps, y / eps);
      }
    }
    total += w[s] * acc * vol;
  }
  return total;
}

}  // namespace chns
