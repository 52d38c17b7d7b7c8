#include "chns/spectral.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace chns {

namespace {

// FFTW planning is not thread-safe; execution with new-array execute is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct AxisSetup {
  fftw_r2r_kind fwd;
  fftw_r2r_kind bwd;
  double norm;
  std::vector<double> eig;
};

AxisSetup setup_axis(std::size_t n, double h, SpectralAxis kind) {
  using std::numbers::pi;
  AxisSetup s;
  s.eig.resize(n);
  const double nn = static_cast<double>(n);
  const double c = 4.0 / (h * h);
  auto sq = [](double v) { return v * v; };
  switch (kind) {
    case SpectralAxis::Periodic:
      s.fwd = FFTW_R2HC;
      s.bwd = FFTW_HC2R;
      s.norm = nn;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t m = (k <= n / 2) ? k : n - k;
        s.eig[k] = c * sq(std::sin(pi * static_cast<double>(m) / nn));
      }
      break;
    case SpectralAxis::NeumannMidway:
      s.fwd = FFTW_REDFT10;
      s.bwd = FFTW_REDFT01;
      s.norm = 2.0 * nn;
      for (std::size_t k = 0; k < n; ++k) s.eig[k] = c * sq(std::sin(pi * static_cast<double>(k) / (2.0 * nn)));
      break;
    case SpectralAxis::DirichletMidway:
      s.fwd = FFTW_RODFT10;
      s.bwd = FFTW_RODFT01;
      s.norm = 2.0 * nn;
      for (std::size_t k = 0; k < n; ++k) s.eig[k] = c * sq(std::sin(pi * static_cast<double>(k + 1) / (2.0 * nn)));
      break;
    case SpectralAxis::DirichletNodes:
      s.fwd = FFTW_RODFT00;
      s.bwd = FFTW_RODFT00;
      s.norm = 2.0 * (nn + 1.0);
      for (std::size_t k = 0; k < n; ++k) {
        s.eig[k] = c * sq(std::sin(pi * static_cast<double>(k + 1) / (2.0 * (nn + 1.0))));
      }
      break;
  }
  return s;
}

}  // namespace

struct SpectralSolver2D::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }
};

SpectralSolver2D::SpectralSolver2D(std::size_t nx, std::size_t ny, double hx, double hy, SpectralAxis ax,
                                   SpectralAxis ay)
    : nx_(nx), ny_(ny), work_(nx * ny), io_(nx * ny), plans_(std::make_unique<Plans>()) {
  auto sx = setup_axis(nx, hx, ax);
  auto sy = setup_axis(ny, hy, ay);
  eig_x_ = std::move(sx.eig);
  eig_y_ = std::move(sy.eig);
  norm_ = sx.norm * sy.norm;
  std::lock_guard lock(planner_mutex());
  // Row-major with x fastest: FFTW's first dimension is y.
  plans_->fwd = fftw_plan_r2r_2d(static_cast<int>(ny), static_cast<int>(nx), io_.data(), work_.data(), sy.fwd,
                                 sx.fwd, FFTW_ESTIMATE);
  plans_->bwd = fftw_plan_r2r_2d(static_cast<int>(ny), static_cast<int>(nx), work_.data(), io_.data(), sy.bwd,
                                 sx.bwd, FFTW_ESTIMATE);
}

SpectralSolver2D::~SpectralSolver2D() = default;
SpectralSolver2D::SpectralSolver2D(SpectralSolver2D&&) noexcept = default;
SpectralSolver2D& SpectralSolver2D::operator=(SpectralSolver2D&&) noexcept = default;

void SpectralSolver2D::forward(const double* data) {
  std::copy(data, data + io_.size(), io_.begin());
  fftw_execute_r2r(plans_->fwd, io_.data(), work_.data());
}

void SpectralSolver2D::backward(double* data) {
  fftw_execute_r2r(plans_->bwd, work_.data(), io_.data());
  const double s = 1.0 / norm_;
  for (std::size_t k = 0; k < io_.size(); ++k) data[k] = io_[k] * s;
}

}  // namespace chns
