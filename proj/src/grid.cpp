#include "chns/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace chns {

void GridSpec::validate() const {
  if (nx < 4 || ny < 4) {
    throw StructuralError(fmt::format("grid needs at least 4 cells per axis, got {}x{}", nx, ny));
  }
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
    throw StructuralError(fmt::format("grid lengths must be positive, got {} x {}", lx, ly));
  }
}

GridSpec GridSpec::box(std::size_t nx, std::size_t ny, double lx, double ly) {
  GridSpec g{nx, ny, lx, ly, false, false, 0.0, 0.0};
  g.validate();
  return g;
}

GridSpec GridSpec::periodic(std::size_t nx, std::size_t ny, double lx, double ly, double x0, double y0) {
  GridSpec g{nx, ny, lx, ly, true, true, x0, y0};
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------

void Array2D::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double Array2D::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Array2D::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

bool Array2D::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Array2D& Array2D::operator+=(const Array2D& o) {
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

Array2D& Array2D::operator-=(const Array2D& o) {
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
  return *this;
}

Array2D& Array2D::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

void Array2D::axpy(double s, const Array2D& o) {
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * o.data_[k];
}

StaggeredVecField& StaggeredVecField::operator+=(const StaggeredVecField& o) {
  ux += o.ux;
  uy += o.uy;
  return *this;
}

StaggeredVecField& StaggeredVecField::operator-=(const StaggeredVecField& o) {
  ux -= o.ux;
  uy -= o.uy;
  return *this;
}

StaggeredVecField& StaggeredVecField::operator*=(double s) {
  ux *= s;
  uy *= s;
  return *this;
}

void StaggeredVecField::axpy(double s, const StaggeredVecField& o) {
  ux.axpy(s, o.ux);
  uy.axpy(s, o.uy);
}

double StaggeredVecField::max_abs() const { return std::max(ux.max_abs(), uy.max_abs()); }

bool StaggeredVecField::all_finite() const { return ux.all_finite() && uy.all_finite(); }

// ---------------------------------------------------------------------------

void check_shape(const CellField& f, const GridSpec& g, const char* what) {
  if (f.nx() != g.nx || f.ny() != g.ny) {
    throw StructuralError(
        fmt::format("{}: cell field is {}x{}, grid is {}x{}", what, f.nx(), f.ny(), g.nx, g.ny));
  }
}

void check_shape(const StaggeredVecField& u, const GridSpec& g, const char* what) {
  if (u.ux.nx() != g.nx + 1 || u.ux.ny() != g.ny || u.uy.nx() != g.nx || u.uy.ny() != g.ny + 1) {
    throw StructuralError(fmt::format("{}: staggered field ({}x{}, {}x{}) does not match grid {}x{}", what,
                                      u.ux.nx(), u.ux.ny(), u.uy.nx(), u.uy.ny(), g.nx, g.ny));
  }
}

void sync_periodic(StaggeredVecField& u, const GridSpec& g) {
  if (g.periodic_x) {
    for (std::size_t j = 0; j < g.ny; ++j) u.ux(g.nx, j) = u.ux(0, j);
  }
  if (g.periodic_y) {
    for (std::size_t i = 0; i < g.nx; ++i) u.uy(i, g.ny) = u.uy(i, 0);
  }
}

void apply_no_slip(StaggeredVecField& u, const GridSpec& g) {
  if (!g.periodic_x) {
    for (std::size_t j = 0; j < g.ny; ++j) {
      u.ux(0, j) = 0.0;
      u.ux(g.nx, j) = 0.0;
    }
  }
  if (!g.periodic_y) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      u.uy(i, 0) = 0.0;
      u.uy(i, g.ny) = 0.0;
    }
  }
}

CellField divergence(const StaggeredVecField& u, const GridSpec& g) {
  check_shape(u, g, "divergence");
  CellField d(g);
  const double ihx = 1.0 / g.hx();
  const double ihy = 1.0 / g.hy();
  // Periodic duplicates are read through index 0 so unsynchronized input still wraps.
  for (std::size_t j = 0; j < g.ny; ++j) {
    const std::size_t jp = (g.periodic_y && j + 1 == g.ny) ? 0 : j + 1;
    for (std::size_t i = 0; i < g.nx; ++i) {
      const std::size_t ip = (g.periodic_x && i + 1 == g.nx) ? 0 : i + 1;
      d(i, j) = (u.ux(ip, j) - u.ux(i, j)) * ihx + (u.uy(i, jp) - u.uy(i, j)) * ihy;
    }
  }
  return d;
}

StaggeredVecField gradient(const CellField& p, const GridSpec& g) {
  check_shape(p, g, "gradient");
  StaggeredVecField gr(g);
  const double ihx = 1.0 / g.hx();
  const double ihy = 1.0 / g.hy();
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 1; i < g.nx; ++i) gr.ux(i, j) = (p(i, j) - p(i - 1, j)) * ihx;
    if (g.periodic_x) {
      const double w = (p(0, j) - p(g.nx - 1, j)) * ihx;
      gr.ux(0, j) = w;
      gr.ux(g.nx, j) = w;
    }
  }
  for (std::size_t j = 1; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) gr.uy(i, j) = (p(i, j) - p(i, j - 1)) * ihy;
  }
  if (g.periodic_y) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double w = (p(i, 0) - p(i, g.ny - 1)) * ihy;
      gr.uy(i, 0) = w;
      gr.uy(i, g.ny) = w;
    }
  }
  return gr;
}

CellField laplacian(const CellField& f, const GridSpec& g) {
  check_shape(f, g, "laplacian");
  return divergence(gradient(f, g), g);
}

double cell_inner(const CellField& a, const CellField& b, const GridSpec& g) {
  check_shape(a, g, "cell_inner");
  check_shape(b, g, "cell_inner");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a.flat()[k] * b.flat()[k];
  return s * g.cell_volume();
}

double face_inner(const StaggeredVecField& a, const StaggeredVecField& b, const GridSpec& g) {
  check_shape(a, g, "face_inner");
  check_shape(b, g, "face_inner");
  double s = 0.0;
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i <= g.nx; ++i) {
      double w = 1.0;
      if (g.periodic_x) {
        if (i == g.nx) continue;
      } else if (i == 0 || i == g.nx) {
        w = 0.5;
      }
      s += w * a.ux(i, j) * b.ux(i, j);
    }
  }
  for (std::size_t j = 0; j <= g.ny; ++j) {
    double w = 1.0;
    if (g.periodic_y) {
      if (j == g.ny) continue;
    } else if (j == 0 || j == g.ny) {
      w = 0.5;
    }
    for (std::size_t i = 0; i < g.nx; ++i) s += w * a.uy(i, j) * b.uy(i, j);
  }
  return s * g.cell_volume();
}

double cell_mean(const CellField& f, const GridSpec& g) {
  check_shape(f, g, "cell_mean");
  return f.sum() / static_cast<double>(f.size());
}

double cell_gradient_sq(const CellField& f, const GridSpec& g) {
  const auto gr = gradient(f, g);
  return face_inner(gr, gr, g);
}

// ---------------------------------------------------------------------------

namespace {

// Linear interpolation weights along one axis of a node lattice.
// Nodes sit at first + k*h for k in [0, count). Returns lower node, fraction,
// and for wall axes handles the region outside the node range.
struct AxisInterp {
  long lo;
  double frac;
};

AxisInterp locate(double coord, double first, double h) {
  const double s = (coord - first) / h;
  const double fl = std::floor(s);
  return {static_cast<long>(fl), s - fl};
}

long wrap(long k, long n) {
  long r = k % n;
  return r < 0 ? r + n : r;
}

// Value of a lattice along an axis at logical index k (may be outside [0,count)).
// kind: 0 periodic (count unique), 1 node-on-wall (clamped, ends pinned), 2 wall-midway (ghost = -edge).
template <typename Get>
double axis_value(Get&& get, long k, long count, int kind) {
  switch (kind) {
    case 0:
      return get(wrap(k, count));
    case 1:
      if (k < 0 || k >= count) return 0.0;
      return get(k);
    default:
      if (k < 0) return -get(0);
      if (k >= count) return -get(count - 1);
      return get(k);
  }
}

double bilinear(const Array2D& a, const GridSpec& g, double x, double y, double x_first, double y_first,
                long cx, long cy, int kx, int ky) {
  const auto ax = locate(x, x_first, g.hx());
  const auto ay = locate(y, y_first, g.hy());
  auto at = [&](long i, long j) {
    auto row = [&](long jj) {
      return axis_value([&](long ii) { return a(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj)); },
                        i, cx, kx);
    };
    return axis_value(row, j, cy, ky);
  };
  const double v00 = at(ax.lo, ay.lo);
  const double v10 = at(ax.lo + 1, ay.lo);
  const double v01 = at(ax.lo, ay.lo + 1);
  const double v11 = at(ax.lo + 1, ay.lo + 1);
  return (1 - ax.frac) * (1 - ay.frac) * v00 + ax.frac * (1 - ay.frac) * v10 + (1 - ax.frac) * ay.frac * v01 +
         ax.frac * ay.frac * v11;
}

}  // namespace

double interpolate_ux(const StaggeredVecField& u, const GridSpec& g, double x, double y) {
  const long cx = static_cast<long>(g.periodic_x ? g.nx : g.nx + 1);
  const long cy = static_cast<long>(g.ny);
  return bilinear(u.ux, g, x, y, g.x0, g.y0 + 0.5 * g.hy(), cx, cy, g.periodic_x ? 0 : 1, g.periodic_y ? 0 : 2);
}

double interpolate_uy(const StaggeredVecField& u, const GridSpec& g, double x, double y) {
  const long cx = static_cast<long>(g.nx);
  const long cy = static_cast<long>(g.periodic_y ? g.ny : g.ny + 1);
  return bilinear(u.uy, g, x, y, g.x0 + 0.5 * g.hx(), g.y0, cx, cy, g.periodic_x ? 0 : 2, g.periodic_y ? 0 : 1);
}

double interpolate_cell(const CellField& f, const GridSpec& g, double x, double y) {
  // Neumann walls: clamp to the nearest interior value (mirror ghost).
  const auto ax = locate(x, g.x0 + 0.5 * g.hx(), g.hx());
  const auto ay = locate(y, g.y0 + 0.5 * g.hy(), g.hy());
  const long nx = static_cast<long>(g.nx);
  const long ny = static_cast<long>(g.ny);
  auto idx = [](long k, long n, bool periodic) {
    if (periodic) return wrap(k, n);
    return std::clamp(k, 0L, n - 1);
  };
  auto at = [&](long i, long j) {
    return f(static_cast<std::size_t>(idx(i, nx, g.periodic_x)), static_cast<std::size_t>(idx(j, ny, g.periodic_y)));
  };
  return (1 - ax.frac) * (1 - ay.frac) * at(ax.lo, ay.lo) + ax.frac * (1 - ay.frac) * at(ax.lo + 1, ay.lo) +
         (1 - ax.frac) * ay.frac * at(ax.lo, ay.lo + 1) + ax.frac * ay.frac * at(ax.lo + 1, ay.lo + 1);
}

// ---------------------------------------------------------------------------

const char* to_string(Stagger s) {
  switch (s) {
    case Stagger::Cell:
      return "cell";
    case Stagger::FaceX:
      return "face_x";
    case Stagger::FaceY:
      return "face_y";
  }
  return "cell";
}

namespace {

Stagger stagger_from(const std::string& s) {
  if (s == "cell") return Stagger::Cell;
  if (s == "face_x") return Stagger::FaceX;
  if (s == "face_y") return Stagger::FaceY;
  throw StructuralError("unknown stagger '" + s + "'");
}

void put_le(std::ofstream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

double get_le(std::ifstream& in) {
  std::uint64_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), sizeof bits);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_field(const std::string& stem, const Array2D& a, const GridSpec& g, const DumpMeta& meta) {
  {
    std::ofstream out(stem + ".bin", std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + stem + ".bin for writing");
    for (double v : a.flat()) put_le(out, v);
  }
  nlohmann::ordered_json j;
  j["field"] = meta.field;
  j["nx"] = g.nx;
  j["ny"] = g.ny;
  j["lx"] = g.lx;
  j["ly"] = g.ly;
  j["t"] = meta.t;
  j["stagger"] = to_string(meta.stagger);
  j["dtype"] = "float64";
  j["byte_order"] = "little";
  j["shape"] = {a.ny(), a.nx()};  // x index fastest
  if (!meta.config_hash.empty()) j["config_hash"] = meta.config_hash;
  std::ofstream side(stem + ".json");
  if (!side) throw std::runtime_error("cannot open " + stem + ".json for writing");
  side << j.dump(2) << '\n';
}

Array2D read_field(const std::string& stem, GridSpec* grid, DumpMeta* meta) {
  std::ifstream side(stem + ".json");
  if (!side) throw std::runtime_error("cannot open " + stem + ".json");
  const auto j = nlohmann::json::parse(side);
  GridSpec g;
  g.nx = j.at("nx").get<std::size_t>();
  g.ny = j.at("ny").get<std::size_t>();
  g.lx = j.at("lx").get<double>();
  g.ly = j.at("ly").get<double>();
  DumpMeta m;
  m.field = j.at("field").get<std::string>();
  m.t = j.at("t").get<double>();
  m.stagger = stagger_from(j.at("stagger").get<std::string>());
  if (j.contains("config_hash")) m.config_hash = j["config_hash"].get<std::string>();

  std::size_t nx = g.nx;
  std::size_t ny = g.ny;
  if (m.stagger == Stagger::FaceX) nx += 1;
  if (m.stagger == Stagger::FaceY) ny += 1;
  Array2D a(nx, ny);
  std::ifstream in(stem + ".bin", std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open " + stem + ".bin");
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != a.size() * sizeof(double)) {
    throw StructuralError(fmt::format("{}.bin holds {} bytes, sidecar implies {}", stem, bytes, a.size() * 8));
  }
  in.seekg(0);
  for (double& v : a.flat()) v = get_le(in);
  if (grid) *grid = g;
  if (meta) *meta = m;
  return a;
}

}  // namespace chns
