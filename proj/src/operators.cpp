#include "chns/operators.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace chns {

Tensor4 Tensor4::isotropic(double nu) {
  Tensor4 t;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) t(i, i, k, k) = nu;
  return t;
}

Tensor4 Tensor4::componentwise(const ViscositySample& s) {
  Tensor4 t;
  for (int k = 0; k < 2; ++k) {
    t(0, 0, k, k) = s.a11;
    t(0, 1, k, k) = s.a12;
    t(1, 0, k, k) = s.a12;
    t(1, 1, k, k) = s.a22;
  }
  return t;
}

double Tensor4::max_abs() const {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

bool Tensor4::has_cross_component() const {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        if ((*this)(i, j, k, 1 - k) != 0.0) return true;
  return false;
}

// ---------------------------------------------------------------------------

LatticeAxis LatticeAxis::make(AxisKind kind, std::size_t count, double h, double first) {
  LatticeAxis ax;
  ax.kind = kind;
  ax.count = count;
  ax.h = h;
  ax.first = first;
  const long n = static_cast<long>(count);
  auto mid = [&](long k) { return first + (static_cast<double>(k) + 0.5) * h; };
  switch (kind) {
    case AxisKind::Periodic:
      for (long k = 0; k < n; ++k) ax.edges.push_back({k, k + 1, 1.0, mid(k)});
      break;
    case AxisKind::NodeOnWall:
      for (long k = 0; k + 1 < n; ++k) ax.edges.push_back({k, k + 1, 1.0, mid(k)});
      break;
    case AxisKind::WallMidway:
      ax.edges.push_back({-1, 0, 0.5, mid(-1)});
      for (long k = 0; k + 1 < n; ++k) ax.edges.push_back({k, k + 1, 1.0, mid(k)});
      ax.edges.push_back({n - 1, n, 0.5, mid(n - 1)});
      break;
  }
  return ax;
}

LatticeAxis::Ref LatticeAxis::resolve(long k) const {
  const long n = static_cast<long>(count);
  switch (kind) {
    case AxisKind::Periodic: {
      long r = k % n;
      if (r < 0) r += n;
      return {static_cast<std::size_t>(r), 1.0};
    }
    case AxisKind::NodeOnWall:
      if (k <= 0) return {0, 0.0};
      if (k >= n - 1) return {static_cast<std::size_t>(n - 1), 0.0};
      return {static_cast<std::size_t>(k), 1.0};
    case AxisKind::WallMidway:
      if (k < 0) return {0, -1.0};
      if (k >= n) return {static_cast<std::size_t>(n - 1), -1.0};
      return {static_cast<std::size_t>(k), 1.0};
  }
  return {0, 0.0};
}

ComponentLattice component_lattice(const GridSpec& g, int component) {
  ComponentLattice L;
  const double hx = g.hx();
  const double hy = g.hy();
  if (component == 0) {
    L.x = g.periodic_x ? LatticeAxis::make(AxisKind::Periodic, g.nx, hx, g.x0)
                       : LatticeAxis::make(AxisKind::NodeOnWall, g.nx + 1, hx, g.x0);
    L.y = LatticeAxis::make(g.periodic_y ? AxisKind::Periodic : AxisKind::WallMidway, g.ny, hy, g.y0 + 0.5 * hy);
    L.sx = g.nx + 1;
    L.sy = g.ny;
  } else {
    L.x = LatticeAxis::make(g.periodic_x ? AxisKind::Periodic : AxisKind::WallMidway, g.nx, hx, g.x0 + 0.5 * hx);
    L.y = g.periodic_y ? LatticeAxis::make(AxisKind::Periodic, g.ny, hy, g.y0)
                       : LatticeAxis::make(AxisKind::NodeOnWall, g.ny + 1, hy, g.y0);
    L.sx = g.nx;
    L.sy = g.ny + 1;
  }
  return L;
}

// ---------------------------------------------------------------------------

namespace {

void check_spd(const ViscositySample& s, double x, double y) {
  if (!(s.min_eig() > 0.0) || !std::isfinite(s.a11) || !std::isfinite(s.a12) || !std::isfinite(s.a22)) {
    throw CoefficientError(fmt::format("viscosity sample at ({}, {}) is not positive definite: [{} {}; {} {}]", x, y,
                                       s.a11, s.a12, s.a12, s.a22));
  }
}

template <typename Get>
ComponentCoefficients sample_component(const ComponentLattice& L, Get&& get) {
  ComponentCoefficients c;
  c.a11 = Array2D(L.x.edges.size(), L.y.count);
  c.a22 = Array2D(L.x.count, L.y.edges.size());
  for (std::size_t j = 0; j < L.y.count; ++j) {
    const double y = L.y.node_pos(static_cast<long>(j));
    for (std::size_t e = 0; e < L.x.edges.size(); ++e) c.a11(e, j) = get(L.x.edges[e].pos, y, 0);
  }
  for (std::size_t e = 0; e < L.y.edges.size(); ++e) {
    const double y = L.y.edges[e].pos;
    for (std::size_t i = 0; i < L.x.count; ++i) c.a22(i, e) = get(L.x.node_pos(static_cast<long>(i)), y, 2);
  }
  Array2D a12(L.x.edges.size(), L.y.edges.size());
  bool any = false;
  for (std::size_t ey = 0; ey < L.y.edges.size(); ++ey) {
    for (std::size_t ex = 0; ex < L.x.edges.size(); ++ex) {
      const double v = get(L.x.edges[ex].pos, L.y.edges[ey].pos, 1);
      a12(ex, ey) = v;
      any = any || v != 0.0;
    }
  }
  if (any) c.a12 = std::move(a12);
  return c;
}

std::size_t vertex_count(std::size_t n, bool periodic) { return periodic ? n : n + 1; }

double vertex_weight(std::size_t i, std::size_t n, bool periodic) {
  if (periodic) return 1.0;
  return (i == 0 || i == n) ? 0.5 : 1.0;
}

}  // namespace

VelocityCoefficients sample_viscosity(const GridSpec& g, const SampleFn& a) {
  VelocityCoefficients vc;
  for (int k = 0; k < 2; ++k) {
    const auto L = component_lattice(g, k);
    vc.comp[static_cast<std::size_t>(k)] = sample_component(L, [&](double x, double y, int which) {
      const auto s = a(x, y);
      check_spd(s, x, y);
      return which == 0 ? s.a11 : (which == 1 ? s.a12 : s.a22);
    });
  }
  return vc;
}

VelocityCoefficients sample_tensor(const GridSpec& g, const TensorFn& c) {
  VelocityCoefficients vc;
  for (int k = 0; k < 2; ++k) {
    const auto L = component_lattice(g, k);
    vc.comp[static_cast<std::size_t>(k)] = sample_component(L, [&](double x, double y, int which) {
      const auto t = c(x, y);
      const ViscositySample s{t(0, 0, k, k), 0.5 * (t(0, 1, k, k) + t(1, 0, k, k)), t(1, 1, k, k)};
      check_spd(s, x, y);
      return which == 0 ? s.a11 : (which == 1 ? s.a12 : s.a22);
    });
  }
  const std::size_t nvx = vertex_count(g.nx, g.periodic_x);
  const std::size_t nvy = vertex_count(g.ny, g.periodic_y);
  bool any = false;
  for (std::size_t e = 0; e < 8; ++e) {
    vc.cross.center[e] = Array2D(g.nx, g.ny);
    vc.cross.vertex[e] = Array2D(nvx, nvy);
  }
  auto fill = [&](std::array<Array2D, 8>& arr, std::size_t i0, std::size_t j0, const Tensor4& t) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          const double v = t(i, j, k, 1 - k);
          arr[cross_index(i, j, k)](i0, j0) = v;
          any = any || v != 0.0;
        }
  };
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) fill(vc.cross.center, i, j, c(g.xc(i), g.yc(j)));
  for (std::size_t j = 0; j < nvy; ++j)
    for (std::size_t i = 0; i < nvx; ++i) fill(vc.cross.vertex, i, j, c(g.xf(i), g.yf(j)));
  vc.cross.active = any;
  if (!any) vc.cross = CrossCoefficients{};
  return vc;
}

// ---------------------------------------------------------------------------

namespace {

struct CompView {
  const ComponentLattice& L;
  const Array2D& w;
  double val(long i, long j) const {
    const auto rx = L.x.resolve(i);
    const auto ry = L.y.resolve(j);
    const double s = rx.sign * ry.sign;
    return s == 0.0 ? 0.0 : s * w(rx.idx, ry.idx);
  }
};

void sync_storage(const ComponentLattice& L, Array2D& out) {
  if (L.x.kind == AxisKind::Periodic && L.sx > L.x.count) {
    for (std::size_t j = 0; j < out.ny(); ++j) out(L.x.count, j) = out(0, j);
  }
  if (L.y.kind == AxisKind::Periodic && L.sy > L.y.count) {
    for (std::size_t i = 0; i < out.nx(); ++i) out(i, L.y.count) = out(i, 0);
  }
}

// out += L w for one component (out must be pre-sized).
void apply_component(const ComponentLattice& L, const ComponentCoefficients& c, const Array2D& w,
                     const std::array<double, 2>& bg, Array2D& out) {
  const double hx = L.x.h;
  const double hy = L.y.h;
  for (std::size_t j = 0; j < L.y.count; ++j) {
    if (!L.y.is_unknown(j)) continue;
    for (std::size_t e = 0; e < L.x.edges.size(); ++e) {
      const auto& ed = L.x.edges[e];
      const auto ra = L.x.resolve(ed.lo);
      const auto rb = L.x.resolve(ed.hi);
      const double wa = ra.sign * w(ra.idx, j);
      const double wb = rb.sign * w(rb.idx, j);
      const double f = c.a11(e, j) * ((wb - wa) / hx + bg[0]) * ed.weight / hx;
      out(ra.idx, j) -= ra.sign * f;
      out(rb.idx, j) += rb.sign * f;
    }
  }
  for (std::size_t e = 0; e < L.y.edges.size(); ++e) {
    const auto& ed = L.y.edges[e];
    const auto ra = L.y.resolve(ed.lo);
    const auto rb = L.y.resolve(ed.hi);
    for (std::size_t i = 0; i < L.x.count; ++i) {
      if (!L.x.is_unknown(i)) continue;
      const double wa = ra.sign * w(i, ra.idx);
      const double wb = rb.sign * w(i, rb.idx);
      const double f = c.a22(i, e) * ((wb - wa) / hy + bg[1]) * ed.weight / hy;
      out(i, ra.idx) -= ra.sign * f;
      out(i, rb.idx) += rb.sign * f;
    }
  }
  if (c.has_cross()) {
    for (std::size_t qy = 0; qy < L.y.edges.size(); ++qy) {
      const auto& ey = L.y.edges[qy];
      const auto ry0 = L.y.resolve(ey.lo);
      const auto ry1 = L.y.resolve(ey.hi);
      for (std::size_t qx = 0; qx < L.x.edges.size(); ++qx) {
        const auto& ex = L.x.edges[qx];
        const auto rx0 = L.x.resolve(ex.lo);
        const auto rx1 = L.x.resolve(ex.hi);
        const double sll = rx0.sign * ry0.sign;
        const double shl = rx1.sign * ry0.sign;
        const double slh = rx0.sign * ry1.sign;
        const double shh = rx1.sign * ry1.sign;
        const double ll = sll * w(rx0.idx, ry0.idx);
        const double hl = shl * w(rx1.idx, ry0.idx);
        const double lh = slh * w(rx0.idx, ry1.idx);
        const double hh = shh * w(rx1.idx, ry1.idx);
        const double dx = ((hl - ll) + (hh - lh)) / (2 * hx) + bg[0];
        const double dy = ((lh - ll) + (hh - hl)) / (2 * hy) + bg[1];
        const double a = c.a12(qx, qy) * ex.weight * ey.weight;
        const double cx = a * dy / (2 * hx);
        const double cy = a * dx / (2 * hy);
        out(rx0.idx, ry0.idx) += sll * (-cx - cy);
        out(rx1.idx, ry0.idx) += shl * (cx - cy);
        out(rx0.idx, ry1.idx) += slh * (-cx + cy);
        out(rx1.idx, ry1.idx) += shh * (cx + cy);
      }
    }
  }
}

double bilinear_component(const ComponentLattice& L, const ComponentCoefficients& c, const Array2D& u,
                          const std::array<double, 2>& bu, const Array2D& w, const std::array<double, 2>& bw) {
  const double hx = L.x.h;
  const double hy = L.y.h;
  double s = 0.0;
  for (std::size_t j = 0; j < L.y.count; ++j) {
    if (!L.y.is_unknown(j)) continue;
    for (std::size_t e = 0; e < L.x.edges.size(); ++e) {
      const auto& ed = L.x.edges[e];
      const auto ra = L.x.resolve(ed.lo);
      const auto rb = L.x.resolve(ed.hi);
      const double gu = (rb.sign * u(rb.idx, j) - ra.sign * u(ra.idx, j)) / hx + bu[0];
      const double gw = (rb.sign * w(rb.idx, j) - ra.sign * w(ra.idx, j)) / hx + bw[0];
      s += c.a11(e, j) * gu * gw * ed.weight;
    }
  }
  for (std::size_t e = 0; e < L.y.edges.size(); ++e) {
    const auto& ed = L.y.edges[e];
    const auto ra = L.y.resolve(ed.lo);
    const auto rb = L.y.resolve(ed.hi);
    for (std::size_t i = 0; i < L.x.count; ++i) {
      if (!L.x.is_unknown(i)) continue;
      const double gu = (rb.sign * u(i, rb.idx) - ra.sign * u(i, ra.idx)) / hy + bu[1];
      const double gw = (rb.sign * w(i, rb.idx) - ra.sign * w(i, ra.idx)) / hy + bw[1];
      s += c.a22(i, e) * gu * gw * ed.weight;
    }
  }
  if (c.has_cross()) {
    const CompView vu{L, u};
    const CompView vw{L, w};
    for (std::size_t qy = 0; qy < L.y.edges.size(); ++qy) {
      const auto& ey = L.y.edges[qy];
      for (std::size_t qx = 0; qx < L.x.edges.size(); ++qx) {
        const auto& ex = L.x.edges[qx];
        auto grads = [&](const CompView& v, const std::array<double, 2>& b) {
          const double ll = v.val(ex.lo, ey.lo);
          const double hl = v.val(ex.hi, ey.lo);
          const double lh = v.val(ex.lo, ey.hi);
          const double hh = v.val(ex.hi, ey.hi);
          return std::array<double, 2>{((hl - ll) + (hh - lh)) / (2 * hx) + b[0],
                                       ((lh - ll) + (hh - hl)) / (2 * hy) + b[1]};
        };
        const auto gu = grads(vu, bu);
        const auto gw = grads(vw, bw);
        s += c.a12(qx, qy) * (gu[0] * gw[1] + gu[1] * gw[0]) * ex.weight * ey.weight;
      }
    }
  }
  return s * hx * hy;
}

// ---------------------------------------------------------------------------
// Cross-component coupling. Gradients d_j u^l are evaluated at cell centers
// and at vertices; the compact difference is used where it is natural
// (j == l at centers, j != l at vertices) and a local average elsewhere.
// The same enumeration drives the forward gradient and its adjoint.

struct GradGeometry {
  const GridSpec& g;
  ComponentLattice L[2];
  std::size_t nvx;
  std::size_t nvy;

  explicit GradGeometry(const GridSpec& grid)
      : g(grid),
        L{component_lattice(grid, 0), component_lattice(grid, 1)},
        nvx(vertex_count(grid.nx, grid.periodic_x)),
        nvy(vertex_count(grid.ny, grid.periodic_y)) {}

  std::size_t storage(int comp, const LatticeAxis::Ref& rx, const LatticeAxis::Ref& ry) const {
    return ry.idx * L[comp].sx + rx.idx;
  }

  // d_j u^l at vertex (i, j) for j != l (compact). emit(comp, idx, coef)
  template <typename Emit>
  void vertex_compact(int jl, long i, long j, double scale, Emit&& emit) const {
    if (jl == 2) {  // d_y ux
      const auto& A = L[0];
      const auto rx = A.x.resolve(i);
      if (rx.sign == 0.0) return;
      const auto r1 = A.y.resolve(j);
      const auto r0 = A.y.resolve(j - 1);
      const double c = scale / g.hy();
      if (r1.sign != 0.0) emit(0, storage(0, rx, r1), c * rx.sign * r1.sign);
      if (r0.sign != 0.0) emit(0, storage(0, rx, r0), -c * rx.sign * r0.sign);
    } else {  // jl == 1: d_x uy
      const auto& B = L[1];
      const auto ry = B.y.resolve(j);
      if (ry.sign == 0.0) return;
      const auto r1 = B.x.resolve(i);
      const auto r0 = B.x.resolve(i - 1);
      const double c = scale / g.hx();
      if (r1.sign != 0.0) emit(1, storage(1, r1, ry), c * r1.sign * ry.sign);
      if (r0.sign != 0.0) emit(1, storage(1, r0, ry), -c * r0.sign * ry.sign);
    }
  }

  // d_j u^l at center (i, j) for j == l (compact).
  template <typename Emit>
  void center_compact(int jl, long i, long j, double scale, Emit&& emit) const {
    if (jl == 0) {  // d_x ux
      const auto& A = L[0];
      const auto ry = A.y.resolve(j);
      const auto r1 = A.x.resolve(i + 1);
      const auto r0 = A.x.resolve(i);
      const double c = scale / g.hx();
      if (r1.sign != 0.0) emit(0, storage(0, r1, ry), c * r1.sign * ry.sign);
      if (r0.sign != 0.0) emit(0, storage(0, r0, ry), -c * r0.sign * ry.sign);
    } else {  // jl == 3: d_y uy
      const auto& B = L[1];
      const auto rx = B.x.resolve(i);
      const auto r1 = B.y.resolve(j + 1);
      const auto r0 = B.y.resolve(j);
      const double c = scale / g.hy();
      if (r1.sign != 0.0) emit(1, storage(1, rx, r1), c * rx.sign * r1.sign);
      if (r0.sign != 0.0) emit(1, storage(1, rx, r0), -c * rx.sign * r0.sign);
    }
  }

  long wrapv(long k, std::size_t n, bool periodic) const {
    if (!periodic) return k;
    const long m = static_cast<long>(n);
    long r = k % m;
    return r < 0 ? r + m : r;
  }

  // All terms of d_j u^l at a center.
  template <typename Emit>
  void center_terms(int jl, long i, long j, Emit&& emit) const {
    if (jl == 0 || jl == 3) {
      center_compact(jl, i, j, 1.0, emit);
      return;
    }
    for (long dj = 0; dj <= 1; ++dj)
      for (long di = 0; di <= 1; ++di)
        vertex_compact(jl, wrapv(i + di, g.nx, g.periodic_x), wrapv(j + dj, g.ny, g.periodic_y), 0.25, emit);
  }

  // All terms of d_j u^l at a vertex.
  template <typename Emit>
  void vertex_terms(int jl, long i, long j, Emit&& emit) const {
    if (jl == 1 || jl == 2) {
      vertex_compact(jl, i, j, 1.0, emit);
      return;
    }
    long cells[4][2];
    int n = 0;
    for (long dj = -1; dj <= 0; ++dj) {
      for (long di = -1; di <= 0; ++di) {
        long ci = i + di;
        long cj = j + dj;
        if (g.periodic_x) ci = wrapv(ci, g.nx, true);
        if (g.periodic_y) cj = wrapv(cj, g.ny, true);
        if (ci < 0 || cj < 0 || ci >= static_cast<long>(g.nx) || cj >= static_cast<long>(g.ny)) continue;
        cells[n][0] = ci;
        cells[n][1] = cj;
        ++n;
      }
    }
    for (int q = 0; q < n; ++q) center_compact(jl, cells[q][0], cells[q][1], 1.0 / n, emit);
  }
};

// Weight of the (i,k) x (j,l) coupling at centers (loc 0) or vertices (loc 1).
double location_weight(int loc, int i, int j, int k, int l) {
  const bool nat_u = (j == l);
  const bool nat_v = (i == k);
  if (nat_u && nat_v) return loc == 0 ? 1.0 : 0.0;
  if (!nat_u && !nat_v) return loc == 1 ? 1.0 : 0.0;
  return 0.5;
}

struct GradSet {
  std::array<Array2D, 4> center;
  std::array<Array2D, 4> vertex;
};

GradSet gradients(const GradGeometry& G, const StaggeredVecField& u, bool with_vertices) {
  GradSet s;
  const Array2D* comp[2] = {&u.ux, &u.uy};
  for (int jl = 0; jl < 4; ++jl) {
    auto& c = s.center[static_cast<std::size_t>(jl)];
    c = Array2D(G.g.nx, G.g.ny);
    for (std::size_t j = 0; j < G.g.ny; ++j)
      for (std::size_t i = 0; i < G.g.nx; ++i) {
        double acc = 0.0;
        G.center_terms(jl, static_cast<long>(i), static_cast<long>(j),
                       [&](int k, std::size_t idx, double coef) { acc += coef * comp[k]->flat()[idx]; });
        c(i, j) = acc;
      }
    if (!with_vertices) continue;
    auto& v = s.vertex[static_cast<std::size_t>(jl)];
    v = Array2D(G.nvx, G.nvy);
    for (std::size_t j = 0; j < G.nvy; ++j)
      for (std::size_t i = 0; i < G.nvx; ++i) {
        double acc = 0.0;
        G.vertex_terms(jl, static_cast<long>(i), static_cast<long>(j),
                       [&](int k, std::size_t idx, double coef) { acc += coef * comp[k]->flat()[idx]; });
        v(i, j) = acc;
      }
  }
  return s;
}

// Flux F[i*2+k] = W * sum_{j,l} w_loc C_ij^{kl} G[j*2+l] over k != l.
GradSet cross_flux(const GradGeometry& G, const CrossCoefficients& cc, const GradSet& gs) {
  GradSet f;
  for (int loc = 0; loc < 2; ++loc) {
    const auto& grads = loc == 0 ? gs.center : gs.vertex;
    const auto& coef = loc == 0 ? cc.center : cc.vertex;
    auto& out = loc == 0 ? f.center : f.vertex;
    const std::size_t nx = loc == 0 ? G.g.nx : G.nvx;
    const std::size_t ny = loc == 0 ? G.g.ny : G.nvy;
    for (auto& a : out) a = Array2D(nx, ny);
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const double w = loc == 0 ? 1.0
                                  : vertex_weight(i, G.g.nx, G.g.periodic_x) * vertex_weight(j, G.g.ny, G.g.periodic_y);
        for (int fi = 0; fi < 2; ++fi)
          for (int k = 0; k < 2; ++k) {
            const int l = 1 - k;
            double acc = 0.0;
            for (int dj = 0; dj < 2; ++dj) {
              const double lw = location_weight(loc, fi, dj, k, l);
              if (lw == 0.0) continue;
              acc += lw * coef[cross_index(fi, dj, k)](i, j) * grads[static_cast<std::size_t>(dj * 2 + l)](i, j);
            }
            out[static_cast<std::size_t>(fi * 2 + k)](i, j) = w * acc;
          }
      }
    }
  }
  return f;
}

void cross_apply(const GridSpec& g, const CrossCoefficients& cc, const StaggeredVecField& u, StaggeredVecField& out) {
  const GradGeometry G(g);
  const auto gs = gradients(G, u, true);
  const auto fl = cross_flux(G, cc, gs);
  Array2D* comp[2] = {&out.ux, &out.uy};
  for (int ik = 0; ik < 4; ++ik) {
    const auto& fc = fl.center[static_cast<std::size_t>(ik)];
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) {
        const double f = fc(i, j);
        if (f == 0.0) continue;
        G.center_terms(ik, static_cast<long>(i), static_cast<long>(j),
                       [&](int k, std::size_t idx, double coef) { comp[k]->flat()[idx] += coef * f; });
      }
    const auto& fv = fl.vertex[static_cast<std::size_t>(ik)];
    for (std::size_t j = 0; j < G.nvy; ++j)
      for (std::size_t i = 0; i < G.nvx; ++i) {
        const double f = fv(i, j);
        if (f == 0.0) continue;
        G.vertex_terms(ik, static_cast<long>(i), static_cast<long>(j),
                       [&](int k, std::size_t idx, double coef) { comp[k]->flat()[idx] += coef * f; });
      }
  }
}

double cross_bilinear(const GridSpec& g, const CrossCoefficients& cc, const StaggeredVecField& u,
                      const StaggeredVecField& v) {
  const GradGeometry G(g);
  const auto gu = gradients(G, u, true);
  const auto gv = gradients(G, v, true);
  const auto fl = cross_flux(G, cc, gu);
  double s = 0.0;
  for (std::size_t ik = 0; ik < 4; ++ik) {
    for (std::size_t k = 0; k < fl.center[ik].size(); ++k) s += fl.center[ik].flat()[k] * gv.center[ik].flat()[k];
    for (std::size_t k = 0; k < fl.vertex[ik].size(); ++k) s += fl.vertex[ik].flat()[k] * gv.vertex[ik].flat()[k];
  }
  return s * g.cell_volume();
}

}  // namespace

void apply_viscous(const GridSpec& g, const VelocityCoefficients& c, const StaggeredVecField& u, const Background& bg,
                   StaggeredVecField& out) {
  check_shape(u, g, "apply_viscous");
  if (out.ux.nx() != g.nx + 1) out = StaggeredVecField(g);
  out.ux.fill(0.0);
  out.uy.fill(0.0);
  const auto L0 = component_lattice(g, 0);
  const auto L1 = component_lattice(g, 1);
  apply_component(L0, c.comp[0], u.ux, {bg[0][0], bg[0][1]}, out.ux);
  apply_component(L1, c.comp[1], u.uy, {bg[1][0], bg[1][1]}, out.uy);
  if (c.cross.active) {
    if (bg[0][0] != 0.0 || bg[0][1] != 0.0 || bg[1][0] != 0.0 || bg[1][1] != 0.0) {
      throw StructuralError("background gradients are only supported for componentwise tensors");
    }
    cross_apply(g, c.cross, u, out);
  }
  sync_storage(L0, out.ux);
  sync_storage(L1, out.uy);
}

double viscous_bilinear(const GridSpec& g, const VelocityCoefficients& c, const StaggeredVecField& u,
                        const Background& bu, const StaggeredVecField& v, const Background& bv) {
  check_shape(u, g, "viscous_bilinear");
  check_shape(v, g, "viscous_bilinear");
  const auto L0 = component_lattice(g, 0);
  const auto L1 = component_lattice(g, 1);
  double s = bilinear_component(L0, c.comp[0], u.ux, {bu[0][0], bu[0][1]}, v.ux, {bv[0][0], bv[0][1]}) +
             bilinear_component(L1, c.comp[1], u.uy, {bu[1][0], bu[1][1]}, v.uy, {bv[1][0], bv[1][1]});
  if (c.cross.active) s += cross_bilinear(g, c.cross, u, v);
  return s;
}

StaggeredVecField tensor_diffusion(const StaggeredVecField& u, const VelocityCoefficients& a, const GridSpec& g) {
  StaggeredVecField out(g);
  apply_viscous(g, a, u, out);
  out *= -1.0;
  return out;
}

std::array<CellField, 4> velocity_gradient_centers(const StaggeredVecField& u, const GridSpec& g) {
  check_shape(u, g, "velocity_gradient_centers");
  const GradGeometry G(g);
  auto gs = gradients(G, u, false);
  return {CellField(std::move(gs.center[0])), CellField(std::move(gs.center[1])), CellField(std::move(gs.center[2])),
          CellField(std::move(gs.center[3]))};
}

// ---------------------------------------------------------------------------

namespace {

struct Wrap {
  long n;
  bool periodic;
  [[nodiscard]] long operator()(long k) const {
    if (!periodic) return k;
    long r = k % n;
    return r < 0 ? r + n : r;
  }
};

}  // namespace

StaggeredVecField convect(const StaggeredVecField& a, const StaggeredVecField& v, const GridSpec& g) {
  check_shape(a, g, "convect");
  check_shape(v, g, "convect");
  StaggeredVecField out(g);
  const long nx = static_cast<long>(g.nx);
  const long ny = static_cast<long>(g.ny);
  const Wrap wx{nx, g.periodic_x};
  const Wrap wy{ny, g.periodic_y};
  const double ihx = 1.0 / g.hx();
  const double ihy = 1.0 / g.hy();
  auto AX = [&](long i, long j) { return a.ux(static_cast<std::size_t>(wx(i)), static_cast<std::size_t>(j)); };
  auto AY = [&](long i, long j) { return a.uy(static_cast<std::size_t>(i), static_cast<std::size_t>(wy(j))); };
  // Tangential values beyond a wall only meet zero normal flux; return 0 there.
  auto VX = [&](long i, long j) {
    const long jj = wy(j);
    if (jj < 0 || jj >= ny) return 0.0;
    return v.ux(static_cast<std::size_t>(wx(i)), static_cast<std::size_t>(jj));
  };
  auto VY = [&](long i, long j) {
    const long ii = wx(i);
    if (ii < 0 || ii >= nx) return 0.0;
    return v.uy(static_cast<std::size_t>(ii), static_cast<std::size_t>(wy(j)));
  };
  const long i_lo = g.periodic_x ? 0 : 1;
  const long i_hi = nx;
  for (long j = 0; j < ny; ++j) {
    for (long i = i_lo; i < i_hi; ++i) {
      const double ue = 0.5 * (AX(i, j) + AX(i + 1, j));
      const double uw = 0.5 * (AX(i - 1, j) + AX(i, j));
      const double fe = ue * 0.5 * (VX(i, j) + VX(i + 1, j));
      const double fw = uw * 0.5 * (VX(i - 1, j) + VX(i, j));
      const long im = wx(i - 1);
      const long ic = wx(i);
      double vn = 0.0;
      double vs = 0.0;
      if (g.periodic_y || j + 1 < ny) vn = 0.5 * (a.uy(static_cast<std::size_t>(im), static_cast<std::size_t>(wy(j + 1))) +
                                                 a.uy(static_cast<std::size_t>(ic), static_cast<std::size_t>(wy(j + 1))));
      if (g.periodic_y || j > 0) vs = 0.5 * (a.uy(static_cast<std::size_t>(im), static_cast<std::size_t>(j)) +
                                            a.uy(static_cast<std::size_t>(ic), static_cast<std::size_t>(j)));
      const double fn = vn * 0.5 * (VX(i, j) + VX(i, j + 1));
      const double fs = vs * 0.5 * (VX(i, j - 1) + VX(i, j));
      out.ux(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = (fe - fw) * ihx + (fn - fs) * ihy;
    }
  }
  const long j_lo = g.periodic_y ? 0 : 1;
  const long j_hi = ny;
  for (long j = j_lo; j < j_hi; ++j) {
    for (long i = 0; i < nx; ++i) {
      const double vn = 0.5 * (AY(i, j) + AY(i, j + 1));
      const double vs = 0.5 * (AY(i, j - 1) + AY(i, j));
      const double fn = vn * 0.5 * (VY(i, j) + VY(i, j + 1));
      const double fs = vs * 0.5 * (VY(i, j - 1) + VY(i, j));
      const long jm = wy(j - 1);
      const long jc = wy(j);
      double ue = 0.0;
      double uw = 0.0;
      if (g.periodic_x || i + 1 < nx) ue = 0.5 * (a.ux(static_cast<std::size_t>(wx(i + 1)), static_cast<std::size_t>(jm)) +
                                                 a.ux(static_cast<std::size_t>(wx(i + 1)), static_cast<std::size_t>(jc)));
      if (g.periodic_x || i > 0) uw = 0.5 * (a.ux(static_cast<std::size_t>(i), static_cast<std::size_t>(jm)) +
                                            a.ux(static_cast<std::size_t>(i), static_cast<std::size_t>(jc)));
      const double fe = ue * 0.5 * (VY(i, j) + VY(i + 1, j));
      const double fw = uw * 0.5 * (VY(i - 1, j) + VY(i, j));
      out.uy(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = (fe - fw) * ihx + (fn - fs) * ihy;
    }
  }
  sync_periodic(out, g);
  return out;
}

CellField advect_scalar(const StaggeredVecField& u, const CellField& phi, const GridSpec& g) {
  check_shape(u, g, "advect_scalar");
  check_shape(phi, g, "advect_scalar");
  CellField out(g);
  const long nx = static_cast<long>(g.nx);
  const long ny = static_cast<long>(g.ny);
  const Wrap wx{nx, g.periodic_x};
  const Wrap wy{ny, g.periodic_y};
  auto P = [&](long i, long j) { return phi(static_cast<std::size_t>(wx(i)), static_cast<std::size_t>(wy(j))); };
  const double ihx = 1.0 / g.hx();
  const double ihy = 1.0 / g.hy();
  for (long j = 0; j < ny; ++j) {
    for (long i = 0; i < nx; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const auto uj = static_cast<std::size_t>(j);
      const double fe = (g.periodic_x || i + 1 < nx) ? u.ux(ui + 1, uj) * 0.5 * (P(i, j) + P(i + 1, j)) : 0.0;
      const double fw = (g.periodic_x || i > 0) ? u.ux(ui, uj) * 0.5 * (P(i - 1, j) + P(i, j)) : 0.0;
      const double fn = (g.periodic_y || j + 1 < ny) ? u.uy(ui, uj + 1) * 0.5 * (P(i, j) + P(i, j + 1)) : 0.0;
      const double fs = (g.periodic_y || j > 0) ? u.uy(ui, uj) * 0.5 * (P(i, j - 1) + P(i, j)) : 0.0;
      out(ui, uj) = (fe - fw) * ihx + (fn - fs) * ihy;
    }
  }
  return out;
}

}  // namespace chns
