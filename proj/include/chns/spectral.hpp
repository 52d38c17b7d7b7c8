#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "chns/grid.hpp"

namespace chns {

/// Boundary treatment along one axis of a spectral solve.
enum class SpectralAxis {
  Periodic,          ///< n unique nodes, wrap-around.
  NeumannMidway,     ///< cell-centered nodes, mirror ghost at the wall.
  DirichletMidway,   ///< cell-centered nodes, antisymmetric ghost (wall between ghost and node).
  DirichletNodes,    ///< interior nodes of a lattice whose end nodes sit on the wall at zero.
};

/**
 * Fast direct solver for separable constant-coefficient operators on a
 * uniform tensor lattice, diagonalized by FFTW real-to-real transforms.
 *
 * The 3-point second difference along each axis has eigenvalues
 * lambda_k = 4/h^2 sin^2(theta_k); solve() applies an arbitrary spectral
 * multiplier 1/symbol(lambda_x, lambda_y). Modes where the symbol vanishes are
 * set to zero (mean-free solution of singular problems).
 *
 * Instances own their buffers and plans; one instance must not be used from
 * two threads at once, distinct instances may.
 */
class SpectralSolver2D {
 public:
  SpectralSolver2D(std::size_t nx, std::size_t ny, double hx, double hy, SpectralAxis ax, SpectralAxis ay);
  ~SpectralSolver2D();
  SpectralSolver2D(const SpectralSolver2D&) = delete;
  SpectralSolver2D& operator=(const SpectralSolver2D&) = delete;
  SpectralSolver2D(SpectralSolver2D&&) noexcept;
  SpectralSolver2D& operator=(SpectralSolver2D&&) noexcept;

  [[nodiscard]] std::size_t nx() const { return nx_; }
  [[nodiscard]] std::size_t ny() const { return ny_; }
  /// Eigenvalues of the negative second difference along x (size nx) and y (size ny).
  [[nodiscard]] const std::vector<double>& eig_x() const { return eig_x_; }
  [[nodiscard]] const std::vector<double>& eig_y() const { return eig_y_; }

  /// In-place solve of symbol(-d_xx, -d_yy) u = rhs. `rhs` is nx*ny with x fastest.
  template <typename Symbol>
  void solve(double* data, Symbol&& symbol) {
    forward(data);
    for (std::size_t j = 0; j < ny_; ++j) {
      for (std::size_t i = 0; i < nx_; ++i) {
        const double s = symbol(eig_x_[i], eig_y_[j]);
        double& c = work_[j * nx_ + i];
        c = (s == 0.0) ? 0.0 : c / s;
      }
    }
    backward(data);
  }

  /// Poisson-type solve: (shift + cx*(-d_xx) + cy*(-d_yy)) u = rhs.
  void solve_shifted(double* data, double shift, double cx = 1.0, double cy = 1.0) {
    solve(data, [=](double lx, double ly) { return shift + cx * lx + cy * ly; });
  }

 private:
  void forward(const double* data);
  void backward(double* data);

  struct Plans;
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  double norm_ = 1.0;
  std::vector<double> eig_x_;
  std::vector<double> eig_y_;
  std::vector<double> work_;
  std::vector<double> io_;
  std::unique_ptr<Plans> plans_;
};

}  // namespace chns
