#pragma once

#include <array>
#include <optional>
#include <string>

#include "chns/errors.hpp"

namespace chns {

/// Symmetric 2x2 viscosity value; a21 == a12 by representation.
struct ViscositySample {
  double a11 = 0.0;
  double a12 = 0.0;
  double a22 = 0.0;

  [[nodiscard]] double min_eig() const;
  [[nodiscard]] double max_eig() const;
  /// A xi . xi
  [[nodiscard]] double quad(double xi1, double xi2) const { return a11 * xi1 * xi1 + 2 * a12 * xi1 * xi2 + a22 * xi2 * xi2; }

  friend bool operator==(const ViscositySample&, const ViscositySample&) = default;
};

enum class ViscosityKind { Constant, SmoothPeriodic, Layered, QuasiPeriodic, SeparableMacro };

const char* to_string(ViscosityKind k);
ViscosityKind viscosity_kind_from(const std::string& name);

/**
 * Closed-form oscillating viscosity A0(t, x, tau, y).
 *
 *  - Constant:        nu * I
 *  - SmoothPeriodic:  s(tau,y) (I + beta R(y)),  s = nu (1 + amp cos 2pi tau cos 2pi y1 cos 2pi y2),
 *                     R = [[cos th, sin th], [sin th, -cos th]], th = 2pi (y1 + y2). beta = 0 gives a scalar model.
 *  - Layered:         a(y1) I, a = a_minus + (a_plus - a_minus)/2 (1 + tanh(cos(2pi y1)/delta) / tanh(1/delta))
 *  - QuasiPeriodic:   nu (1 + amp (cos(w1 y1) + cos(w2 y1)) / 2) I
 *  - SeparableMacro:  (1 + macro_amp cos(pi x1) cos(pi x2)) * SmoothPeriodic(tau, y)
 *
 * Periodic kinds are 1-periodic in tau and in each y component. All parameters
 * are plain data; the factory functions validate them against gamma.
 */
struct ViscosityModel {
  ViscosityKind kind = ViscosityKind::Constant;
  double nu = 1.0;
  double amp = 0.5;
  double beta = 0.0;
  double a_minus = 1.0;
  double a_plus = 2.0;
  double delta = 0.3;
  double omega1 = 1.0;
  double omega2 = 1.4142135623730951;
  double macro_amp = 0.2;
  double gamma = 0.5;

  [[nodiscard]] ViscositySample sample(double t, double x1, double x2, double tau, double y1, double y2) const;

  [[nodiscard]] bool depends_on_tau() const;
  [[nodiscard]] bool depends_on_macro() const;
  [[nodiscard]] bool is_periodic() const { return kind != ViscosityKind::QuasiPeriodic; }
  [[nodiscard]] bool depends_on_y1() const { return kind != ViscosityKind::Constant; }
  [[nodiscard]] bool depends_on_y2() const {
    return kind == ViscosityKind::SmoothPeriodic || kind == ViscosityKind::SeparableMacro;
  }
  /// Analytic eigenvalue range implied by the parameters.
  [[nodiscard]] std::array<double, 2> eigen_bounds() const;
  /// Largest angular frequency in the fast variable y (rad per unit y).
  [[nodiscard]] double max_frequency() const;
  /// Shortest spatial wavelength in y of the oscillation (1 for periodic kinds).
  [[nodiscard]] double fast_wavelength() const;

  /// Throws CoefficientError when parameters are out of range or the bounds leave [gamma, 1/gamma].
  void validate() const;

  static ViscosityModel constant(double nu, double gamma = 0.5);
  static ViscosityModel smooth_periodic(double nu = 1.0, double amp = 0.5, double beta = 0.0, double gamma = 0.3);
  static ViscosityModel anisotropic(double nu = 1.0, double gamma = 0.3) { return smooth_periodic(nu, 0.5, 0.3, gamma); }
  static ViscosityModel layered(double a_minus = 1.0, double a_plus = 2.0, double delta = 0.3, double gamma = 0.5);
  static ViscosityModel quasi_periodic(double nu = 1.0, double amp = 0.3, double omega1 = 1.0,
                                       double omega2 = 1.4142135623730951, double gamma = 0.5);
  static ViscosityModel separable_macro(double nu = 1.0, double amp = 0.5, double macro_amp = 0.2,
                                        double gamma = 0.25);
};

struct ProbePoint {
  double t = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
  double tau = 0.0;
  double y1 = 0.0;
  double y2 = 0.0;
};

struct EllipticityReport {
  double min_eig = 0.0;
  double max_eig = 0.0;
  bool pass = false;
  std::optional<ProbePoint> violation;
};

/// Probes eigenvalues on a Halton set over (tau, y) (and over the macro box
/// for SeparableMacro); passes iff every eigenvalue lies in [gamma, 1/gamma].
/// The first violating probe, if any, is reported.
EllipticityReport verify_ellipticity(const ViscosityModel& m, std::size_t n_probe);

}  // namespace chns
