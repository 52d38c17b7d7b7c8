#include "chns/viscosity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "chns/grid.hpp"

namespace chns {

using std::numbers::pi;

double ViscositySample::min_eig() const {
  const double m = 0.5 * (a11 + a22);
  const double d = std::hypot(0.5 * (a11 - a22), a12);
  return m - d;
}

double ViscositySample::max_eig() const {
  const double m = 0.5 * (a11 + a22);
  const double d = std::hypot(0.5 * (a11 - a22), a12);
  return m + d;
}

const char* to_string(ViscosityKind k) {
  switch (k) {
    case ViscosityKind::Constant:
      return "constant";
    case ViscosityKind::SmoothPeriodic:
      return "smooth_periodic";
    case ViscosityKind::Layered:
      return "layered";
    case ViscosityKind::QuasiPeriodic:
      return "quasi_periodic";
    case ViscosityKind::SeparableMacro:
      return "separable_macro";
  }
  return "constant";
}

ViscosityKind viscosity_kind_from(const std::string& name) {
  for (auto k : {ViscosityKind::Constant, ViscosityKind::SmoothPeriodic, ViscosityKind::Layered,
                 ViscosityKind::QuasiPeriodic, ViscosityKind::SeparableMacro}) {
    if (name == to_string(k)) return k;
  }
  throw CoefficientError("unknown viscosity kind '" + name + "'");
}

namespace {

ViscositySample smooth_periodic_sample(const ViscosityModel& m, double tau, double y1, double y2) {
  const double s = m.nu * (1.0 + m.amp * std::cos(2 * pi * tau) * std::cos(2 * pi * y1) * std::cos(2 * pi * y2));
  if (m.beta == 0.0) return {s, 0.0, s};
  const double th = 2 * pi * (y1 + y2);
  const double c = std::cos(th);
  const double sn = std::sin(th);
  return {s * (1.0 + m.beta * c), s * m.beta * sn, s * (1.0 - m.beta * c)};
}

double layered_profile(const ViscosityModel& m, double y1) {
  const double r = std::tanh(std::cos(2 * pi * y1) / m.delta) / std::tanh(1.0 / m.delta);
  return m.a_minus + (m.a_plus - m.a_minus) * 0.5 * (1.0 + r);
}

}  // namespace

ViscositySample ViscosityModel::sample(double /*t*/, double x1, double x2, double tau, double y1, double y2) const {
  switch (kind) {
    case ViscosityKind::Constant:
      return {nu, 0.0, nu};
    case ViscosityKind::SmoothPeriodic:
      return smooth_periodic_sample(*this, tau, y1, y2);
    case ViscosityKind::Layered: {
      const double a = layered_profile(*this, y1);
      return {a, 0.0, a};
    }
    case ViscosityKind::QuasiPeriodic: {
      const double a = nu * (1.0 + amp * 0.5 * (std::cos(omega1 * y1) + std::cos(omega2 * y1)));
      return {a, 0.0, a};
    }
    case ViscosityKind::SeparableMacro: {
      const double f = 1.0 + macro_amp * std::cos(pi * x1) * std::cos(pi * x2);
      auto s = smooth_periodic_sample(*this, tau, y1, y2);
      return {f * s.a11, f * s.a12, f * s.a22};
    }
  }
  return {nu, 0.0, nu};
}

bool ViscosityModel::depends_on_tau() const {
  return (kind == ViscosityKind::SmoothPeriodic || kind == ViscosityKind::SeparableMacro) && amp != 0.0;
}

bool ViscosityModel::depends_on_macro() const { return kind == ViscosityKind::SeparableMacro && macro_amp != 0.0; }

std::array<double, 2> ViscosityModel::eigen_bounds() const {
  switch (kind) {
    case ViscosityKind::Constant:
      return {nu, nu};
    case ViscosityKind::SmoothPeriodic:
      return {nu * (1 - std::abs(amp)) * (1 - std::abs(beta)), nu * (1 + std::abs(amp)) * (1 + std::abs(beta))};
    case ViscosityKind::Layered:
      return {std::min(a_minus, a_plus), std::max(a_minus, a_plus)};
    case ViscosityKind::QuasiPeriodic:
      return {nu * (1 - std::abs(amp)), nu * (1 + std::abs(amp))};
    case ViscosityKind::SeparableMacro: {
      const double lo = nu * (1 - std::abs(amp)) * (1 - std::abs(beta));
      const double hi = nu * (1 + std::abs(amp)) * (1 + std::abs(beta));
      return {lo * (1 - std::abs(macro_amp)), hi * (1 + std::abs(macro_amp))};
    }
  }
  return {nu, nu};
}

double ViscosityModel::max_frequency() const {
  switch (kind) {
    case ViscosityKind::Constant:
      return 0.0;
    case ViscosityKind::QuasiPeriodic:
      return std::max(std::abs(omega1), std::abs(omega2));
    case ViscosityKind::Layered:
      // tanh sharpening adds harmonics; count them as a few multiples of the base frequency.
      return 2 * pi * std::max(1.0, std::ceil(1.0 / delta));
    default:
      return 2 * pi * (beta != 0.0 ? 2.0 : 1.0);
  }
}

double ViscosityModel::fast_wavelength() const {
  if (kind == ViscosityKind::QuasiPeriodic) return 2 * pi / std::max(std::abs(omega1), std::abs(omega2));
  return 1.0;
}

void ViscosityModel::validate() const {
  if (!(gamma > 0.0) || gamma > 1.0) throw CoefficientError(fmt::format("viscosity.gamma must be in (0,1], got {}", gamma));
  if (kind == ViscosityKind::Layered && !(delta > 0.0)) {
    throw CoefficientError(fmt::format("viscosity.delta must be positive, got {}", delta));
  }
  if (kind == ViscosityKind::QuasiPeriodic && (omega1 == 0.0 || omega2 == 0.0)) {
    throw CoefficientError("viscosity.omega1/omega2 must be nonzero");
  }
  const auto [lo, hi] = eigen_bounds();
  if (!(lo >= gamma) || !(hi <= 1.0 / gamma)) {
    throw CoefficientError(fmt::format("{} model eigenvalue range [{}, {}] leaves [gamma, 1/gamma] = [{}, {}]",
                                       to_string(kind), lo, hi, gamma, 1.0 / gamma));
  }
}

ViscosityModel ViscosityModel::constant(double nu, double gamma) {
  ViscosityModel m;
  m.kind = ViscosityKind::Constant;
  m.nu = nu;
  m.gamma = gamma;
  m.validate();
  return m;
}

ViscosityModel ViscosityModel::smooth_periodic(double nu, double amp, double beta, double gamma) {
  ViscosityModel m;
  m.kind = ViscosityKind::SmoothPeriodic;
  m.nu = nu;
  m.amp = amp;
  m.beta = beta;
  m.gamma = gamma;
  m.validate();
  return m;
}

ViscosityModel ViscosityModel::layered(double a_minus, double a_plus, double delta, double gamma) {
  ViscosityModel m;
  m.kind = ViscosityKind::Layered;
  m.a_minus = a_minus;
  m.a_plus = a_plus;
  m.delta = delta;
  m.gamma = gamma;
  m.validate();
  return m;
}

ViscosityModel ViscosityModel::quasi_periodic(double nu, double amp, double omega1, double omega2, double gamma) {
  ViscosityModel m;
  m.kind = ViscosityKind::QuasiPeriodic;
  m.nu = nu;
  m.amp = amp;
  m.omega1 = omega1;
  m.omega2 = omega2;
  m.gamma = gamma;
  m.validate();
  return m;
}

ViscosityModel ViscosityModel::separable_macro(double nu, double amp, double macro_amp, double gamma) {
  ViscosityModel m;
  m.kind = ViscosityKind::SeparableMacro;
  m.nu = nu;
  m.amp = amp;
  m.macro_amp = macro_amp;
  m.gamma = gamma;
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------

namespace {

double halton(std::size_t index, unsigned base) {
  double f = 1.0;
  double r = 0.0;
  std::size_t i = index;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace

EllipticityReport verify_ellipticity(const ViscosityModel& m, std::size_t n_probe) {
  if (n_probe == 0) throw StructuralError("verify_ellipticity needs at least one probe");
  // Quasi-periodic kinds are probed over a long window so both frequencies decorrelate.
  const double extent = m.is_periodic() ? 1.0 : 64.0 * m.fast_wavelength() * 2.0;
  const bool macro = m.depends_on_macro();
  EllipticityReport rep;
  rep.min_eig = INFINITY;
  rep.max_eig = -INFINITY;
  const double lo = m.gamma;
  const double hi = 1.0 / m.gamma;
  for (std::size_t k = 0; k < n_probe; ++k) {
    ProbePoint p;
    // Index 0 of a Halton sequence is the origin; include it deliberately.
    p.tau = halton(k, 2);
    p.y1 = extent * halton(k, 3);
    p.y2 = extent * halton(k, 5);
    if (macro) {
      p.x1 = halton(k, 7);
      p.x2 = halton(k, 11);
    }
    const auto s = m.sample(p.t, p.x1, p.x2, p.tau, p.y1, p.y2);
    const double e0 = s.min_eig();
    const double e1 = s.max_eig();
    rep.min_eig = std::min(rep.min_eig, e0);
    rep.max_eig = std::max(rep.max_eig, e1);
    if (!rep.violation && (e0 < lo || e1 > hi || !std::isfinite(e0) || !std::isfinite(e1))) rep.violation = p;
  }
  rep.pass = !rep.violation.has_value();
  return rep;
}

}  // namespace chns
