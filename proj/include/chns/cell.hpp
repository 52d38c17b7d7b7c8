#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chns/grid.hpp"
#include "chns/operators.hpp"
#include "chns/viscosity.hpp"

namespace chns {

/// Macroscopic point (t, x) at which a cell problem is posed.
struct MacroPoint {
  double t = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
};

/// Unit strain r_j^l: the 2x2 matrix with a single 1 in row j, column l (0-based).
/// Its affine field is P^k(y) = delta_kl y_j.
struct UnitStrain {
  int j = 0;
  int l = 0;

  [[nodiscard]] Background background() const;
  [[nodiscard]] std::size_t index() const { return static_cast<std::size_t>(j * 2 + l); }
  static std::array<UnitStrain, 4> all() { return {UnitStrain{0, 0}, {0, 1}, {1, 0}, {1, 1}}; }
};

class CellNonConvergence : public std::runtime_error {
 public:
  CellNonConvergence(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  [[nodiscard]] double residual() const { return residual_; }

 private:
  double residual_;
};

struct CellSolveOptions {
  double tol = 1e-10;
  std::size_t max_iter = 5000;
};

/// Periodic cell solution (eta, pi) for one unit strain.
struct Corrector {
  StaggeredVecField eta;
  CellField pi;
  double momentum_residual = 0.0;    ///< RMS over unique faces
  double divergence_residual = 0.0;  ///< max over cells
  std::size_t iterations = 0;
};

/**
 * Solves -div_y(A (r + grad eta)) + grad pi = 0, div_y eta = 0 on a doubly
 * periodic cell by projected preconditioned CG on the divergence-free,
 * mean-free subspace. The pressure follows from one Poisson solve.
 * Throws CellNonConvergence if the residual is not below tol after max_iter.
 */
Corrector solve_cell_problem(const VelocityCoefficients& a, UnitStrain r, const GridSpec& g,
                             const CellSolveOptions& opts = {}, const StaggeredVecField* initial = nullptr);
/// General constant strain: strain[k][j] = d_j P^k.
Corrector solve_cell_problem(const VelocityCoefficients& a, const Background& strain, const GridSpec& g,
                             const CellSolveOptions& opts = {}, const StaggeredVecField* initial = nullptr);
Corrector solve_cell_problem(const ViscosityModel& m, MacroPoint macro, double tau, UnitStrain r, const GridSpec& g,
                             const CellSolveOptions& opts = {}, const StaggeredVecField* initial = nullptr);

/// Flux-point samples of A0(t, x, tau, .) on a periodic cell grid.
VelocityCoefficients cell_coefficients(const ViscosityModel& m, MacroPoint macro, double tau, const GridSpec& g);

struct EffectiveTensor {
  Tensor4 a_hat;
  GridSpec grid;
  std::size_t n_tau = 1;
  double tol = 0.0;
  std::vector<double> residuals;  ///< momentum residual per solve, tau-major then strain
  /// max |a_per(P+eta, P'+eta') - B(P+eta, P')| over entries
  double assembly_defect = 0.0;

  /// max |a_ij^kl - a_ji^lk| / max |a|
  [[nodiscard]] double symmetry_defect() const;
  /// Eigenvalue range of the symmetric quadratic form xi -> a_ij^kl xi_jl xi_ik on 2x2 matrices.
  [[nodiscard]] std::array<double, 2> ellipticity_range() const;
};

struct EffectiveTensorOptions {
  std::size_t n_tau = 8;  ///< ignored (forced to 1) for tau-independent models
  CellSolveOptions solve;
  std::size_t jobs = 1;
};

/// Effective tensor a_ij^kl = a_per(eta_j^l + P_j^l, eta_i^k + P_i^k), averaged over
/// tau midpoints and normalized by the cell area.
EffectiveTensor effective_tensor(const ViscosityModel& m, MacroPoint macro, const GridSpec& g,
                                 const EffectiveTensorOptions& opts = {});
/// Same from pre-sampled coefficient sets (one per tau sample).
EffectiveTensor effective_tensor(const std::vector<VelocityCoefficients>& per_tau, const GridSpec& g,
                                 const EffectiveTensorOptions& opts = {});

/// The four correctors at a single tau, ordered by UnitStrain::index().
std::array<Corrector, 4> solve_correctors(const ViscosityModel& m, MacroPoint macro, double tau, const GridSpec& g,
                                          const EffectiveTensorOptions& opts = {});

struct TruncatedTensor {
  EffectiveTensor tensor;  ///< largest radius
  std::vector<double> radii;
  std::vector<Tensor4> tensors;
  std::vector<double> defects;  ///< max |a(R_n) - a(R_{n-1})|, one per consecutive pair
  std::optional<std::string> warning;
};

/// Box [-R, R]^2 with periodic wrap as a surrogate for the whole-plane cell problem.
/// The grid uses `cells_per_unit` cells per unit length along each axis on which the
/// model varies (8 cells otherwise).
TruncatedTensor effective_tensor_truncated(const ViscosityModel& m, MacroPoint macro,
                                           const std::vector<double>& radii, double cells_per_unit,
                                           const EffectiveTensorOptions& opts = {});

/// u1(x) = sum_{j,l} d_j u0^l(x) eta_j^l(x / eps), evaluated at the macro faces.
/// grad_u0 is cell-centered on g_macro (index j*2 + l); eta lives on the periodic g_cell.
StaggeredVecField reconstruct_corrector_velocity(const std::array<CellField, 4>& grad_u0,
                                                 const std::array<StaggeredVecField, 4>& eta, double eps,
                                                 const GridSpec& g_macro, const GridSpec& g_cell);

/// Effective tensor as a function of the macro position: constant, or tabulated
/// on a lattice and interpolated bilinearly.
class MacroTensorField {
 public:
  MacroTensorField() = default;
  explicit MacroTensorField(const Tensor4& t) : nx_(1), ny_(1), values_{t} {}
  MacroTensorField(std::size_t nx, std::size_t ny, double lx, double ly, std::vector<Tensor4> values);

  static MacroTensorField tabulate(const ViscosityModel& m, double t, const GridSpec& macro, std::size_t lattice,
                                   const GridSpec& cell, const EffectiveTensorOptions& opts);

  [[nodiscard]] Tensor4 at(double x1, double x2) const;
  [[nodiscard]] bool is_constant() const { return values_.size() == 1; }
  [[nodiscard]] const std::vector<Tensor4>& values() const { return values_; }
  [[nodiscard]] std::size_t nx() const { return nx_; }
  [[nodiscard]] std::size_t ny() const { return ny_; }

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  double lx_ = 1.0;
  double ly_ = 1.0;
  std::vector<Tensor4> values_;
};

}  // namespace chns
