#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "chns/grid.hpp"

namespace chns {

/// Scalar function on R^d (d <= 3).
using Sampler = std::function<double(std::span<const double> y)>;

struct MeanValueEstimate {
  double value = 0.0;
  std::vector<double> radii;
  std::vector<double> partials;
  bool converged = false;
  double defect = 0.0;  ///< |last - previous| partial average
};

struct MeanValueOptions {
  std::size_t dim = 1;
  /// Highest angular frequency present in the integrand (rad per unit length).
  double max_frequency = 2.0 * 3.141592653589793;
  std::size_t points_per_wavelength = 16;
  /// Convergence flag threshold on the last defect.
  double tol = 1e-3;
};

/**
 * Averages f over the boxes [-R, R]^d by the composite midpoint rule with at
 * least `points_per_wavelength` nodes per shortest wavelength. Cost grows as
 * (R * max_frequency)^d; more than 5e8 nodes is rejected.
 */
MeanValueEstimate mean_value(const Sampler& f, const std::vector<double>& radii, const MeanValueOptions& opts = {});

/**
 * psi(t, x, tau, y) = p_t(t) p_1(x1) p_2(x2) prod_m cos(w_m . (tau, y1, y2) + phase_m).
 * Polynomials are stored lowest degree first; an empty polynomial means 1.
 */
struct TestFunction {
  struct Wave {
    std::array<double, 3> omega{};  ///< angular frequencies in (tau, y1, y2)
    double phase = 0.0;
  };
  std::vector<double> poly_t;
  std::vector<double> poly_x1;
  std::vector<double> poly_x2;
  std::vector<Wave> waves;
  std::string name;

  [[nodiscard]] double operator()(double t, double x1, double x2, double tau, double y1, double y2) const;
  [[nodiscard]] bool oscillates() const { return !waves.empty(); }

  static TestFunction constant(double c = 1.0);
  /// cos(2 pi y1)
  static TestFunction cos_y1();
};

/// Time-indexed cell fields on one grid; times strictly increasing.
struct CellTrajectory {
  std::vector<double> times;
  std::vector<CellField> fields;

  void push(double t, CellField f) {
    times.push_back(t);
    fields.push_back(std::move(f));
  }
  [[nodiscard]] std::size_t size() const { return times.size(); }
};

/// Trapezoid weights for the given sample times (a single time gets weight 0).
std::vector<double> trapezoid_weights(const std::vector<double>& times);

/// int_{Q_T} field(t, x) psi(t, x, t/eps, x/eps): midpoint rule in space, trapezoid in time.
double two_scale_pairing(const CellTrajectory& field, const TestFunction& psi, double eps, const GridSpec& g);

}  // namespace chns
