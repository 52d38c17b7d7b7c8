#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "chns/grid.hpp"
#include "chns/viscosity.hpp"

namespace chns {

/// Fourth-order tensor C[i][j][k][l] stored flat, index ((i*2 + j)*2 + k)*2 + l.
/// C_ij^{kl} couples the derivative d_j u^l to the flux of component k in direction i.
struct Tensor4 {
  std::array<double, 16> a{};

  double& operator()(int i, int j, int k, int l) { return a[static_cast<std::size_t>(((i * 2 + j) * 2 + k) * 2 + l)]; }
  [[nodiscard]] double operator()(int i, int j, int k, int l) const {
    return a[static_cast<std::size_t>(((i * 2 + j) * 2 + k) * 2 + l)];
  }
  /// nu * delta_ij delta_kl
  static Tensor4 isotropic(double nu);
  /// a_ij delta_kl
  static Tensor4 componentwise(const ViscositySample& s);
  [[nodiscard]] double max_abs() const;
  [[nodiscard]] bool has_cross_component() const;

  friend bool operator==(const Tensor4&, const Tensor4&) = default;
};

/// One axis of a staggered node lattice.
enum class AxisKind {
  Periodic,    ///< count unique nodes, wrap-around
  NodeOnWall,  ///< count nodes including the two wall nodes, which are pinned to zero
  WallMidway,  ///< count nodes; the wall lies half a spacing outside each end (ghost = -value)
};

struct LatticeAxis {
  struct Edge {
    long lo = 0;
    long hi = 0;
    double weight = 1.0;  ///< fraction of the dual length inside the domain
    double pos = 0.0;     ///< physical coordinate of the edge midpoint
  };
  struct Ref {
    std::size_t idx = 0;
    double sign = 0.0;  ///< 0 for pinned or ghost-of-pinned nodes
  };

  AxisKind kind = AxisKind::Periodic;
  std::size_t count = 0;
  double h = 1.0;
  double first = 0.0;
  std::vector<Edge> edges;

  static LatticeAxis make(AxisKind kind, std::size_t count, double h, double first);
  [[nodiscard]] Ref resolve(long k) const;
  [[nodiscard]] bool is_unknown(std::size_t k) const {
    return kind != AxisKind::NodeOnWall || (k > 0 && k + 1 < count);
  }
  [[nodiscard]] double node_pos(long k) const { return first + static_cast<double>(k) * h; }
};

/// Node lattice of one velocity component on the MAC grid.
struct ComponentLattice {
  LatticeAxis x;
  LatticeAxis y;
  std::size_t sx = 0;  ///< storage extent along x
  std::size_t sy = 0;
};

/// component 0: ux on x-faces; component 1: uy on y-faces.
ComponentLattice component_lattice(const GridSpec& g, int component);

/// Coefficients of one velocity component's 2x2 diffusion tensor sampled at flux points:
/// a11 on x-edges (edge x row), a22 on y-edges (column x edge), a12 at quad centers.
struct ComponentCoefficients {
  Array2D a11;
  Array2D a22;
  Array2D a12;  ///< empty when the tensor has no off-diagonal entry
  [[nodiscard]] bool has_cross() const { return a12.size() != 0; }
};

/// Coupling between different velocity components, C_ij^{kl} with k != l.
/// Sampled at cell centers (nx x ny) and at vertices; entry index e = ((i*2 + j)*2 + k) >> ... see cross_index().
struct CrossCoefficients {
  std::array<Array2D, 8> center;
  std::array<Array2D, 8> vertex;
  bool active = false;
};

/// Index into CrossCoefficients arrays for (i, j, k) with l = 1 - k.
constexpr std::size_t cross_index(int i, int j, int k) { return static_cast<std::size_t>((i * 2 + j) * 2 + k); }

struct VelocityCoefficients {
  std::array<ComponentCoefficients, 2> comp;
  CrossCoefficients cross;
};

using SampleFn = std::function<ViscositySample(double x, double y)>;
using TensorFn = std::function<Tensor4(double x, double y)>;

/// Componentwise tensor: A(x) acts on the gradient of each velocity component.
/// Throws CoefficientError if any sample is not symmetric positive definite.
VelocityCoefficients sample_viscosity(const GridSpec& g, const SampleFn& a);
/// General fourth-order tensor field (homogenized problems).
VelocityCoefficients sample_tensor(const GridSpec& g, const TensorFn& c);

/**
 * Positive viscous operator L u = -div(C (grad u + bg)) in conservative flux
 * form, assembled as the gradient of the discrete energy 1/2 B(u,u).
 * `bg[k]` is a constant background gradient of component k
 * (bg[k][j] = d_j P^k), used by periodic cell problems; pass zeros otherwise.
 * Pinned wall faces of `out` are zero and periodic duplicates are synced.
 */
using Background = std::array<std::array<double, 2>, 2>;
void apply_viscous(const GridSpec& g, const VelocityCoefficients& c, const StaggeredVecField& u, const Background& bg,
                   StaggeredVecField& out);
inline void apply_viscous(const GridSpec& g, const VelocityCoefficients& c, const StaggeredVecField& u,
                          StaggeredVecField& out) {
  apply_viscous(g, c, u, Background{}, out);
}

/// Discrete bilinear form B(u + P_bu, v + P_bv) = sum over flux points of C grad(u) : grad(v).
double viscous_bilinear(const GridSpec& g, const VelocityCoefficients& c, const StaggeredVecField& u,
                        const Background& bu, const StaggeredVecField& v, const Background& bv);
inline double viscous_bilinear(const GridSpec& g, const VelocityCoefficients& c, const StaggeredVecField& u,
                               const StaggeredVecField& v) {
  return viscous_bilinear(g, c, u, Background{}, v, Background{});
}

/// div(A grad u) with A given as flux-point samples (the negative of apply_viscous).
StaggeredVecField tensor_diffusion(const StaggeredVecField& u, const VelocityCoefficients& a, const GridSpec& g);

/// Centered, skew-symmetric convection (a . grad) v in flux form on the MAC grid.
/// For discretely divergence-free `a` with no-slip data, <adv(a, v), v> = 0.
StaggeredVecField convect(const StaggeredVecField& a, const StaggeredVecField& v, const GridSpec& g);
/// Conservative centered advection div(u phi) of a cell field.
CellField advect_scalar(const StaggeredVecField& u, const CellField& phi, const GridSpec& g);

/// Gradient tensor of a velocity field at cell centers: out[j*2 + l] = d_j u^l
/// (compact differences for j == l, averaged vertex differences otherwise).
std::array<CellField, 4> velocity_gradient_centers(const StaggeredVecField& u, const GridSpec& g);

}  // namespace chns
