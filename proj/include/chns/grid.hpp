#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "chns/errors.hpp"

namespace chns {

/**
 * Uniform rectangular grid of nx x ny cells covering [x0, x0+lx] x [y0, y0+ly].
 *
 * A periodic axis identifies the two ends of the domain. A non-periodic axis
 * carries walls: no-slip for velocities and homogeneous Neumann for cell fields.
 * Spacings are always derived from the lengths, never stored.
 */
struct GridSpec {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double lx = 1.0;
  double ly = 1.0;
  bool periodic_x = false;
  bool periodic_y = false;
  double x0 = 0.0;
  double y0 = 0.0;

  [[nodiscard]] double hx() const { return lx / static_cast<double>(nx); }
  [[nodiscard]] double hy() const { return ly / static_cast<double>(ny); }
  [[nodiscard]] double area() const { return lx * ly; }
  [[nodiscard]] double cell_volume() const { return hx() * hy(); }
  [[nodiscard]] std::size_t cell_count() const { return nx * ny; }

  /// Cell-center coordinates.
  [[nodiscard]] double xc(std::size_t i) const { return x0 + (static_cast<double>(i) + 0.5) * hx(); }
  [[nodiscard]] double yc(std::size_t j) const { return y0 + (static_cast<double>(j) + 0.5) * hy(); }
  /// Vertex / face-line coordinates.
  [[nodiscard]] double xf(std::size_t i) const { return x0 + static_cast<double>(i) * hx(); }
  [[nodiscard]] double yf(std::size_t j) const { return y0 + static_cast<double>(j) * hy(); }

  /// Throws StructuralError unless nx, ny >= 4 and lx, ly > 0.
  void validate() const;

  static GridSpec box(std::size_t nx, std::size_t ny, double lx = 1.0, double ly = 1.0);
  static GridSpec periodic(std::size_t nx, std::size_t ny, double lx = 1.0, double ly = 1.0,
                           double x0 = 0.0, double y0 = 0.0);

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Dense 2D array, x index fastest: element (i, j) lives at j * nx + i.
class Array2D {
 public:
  Array2D() = default;
  Array2D(std::size_t nx, std::size_t ny, double fill = 0.0) : nx_(nx), ny_(ny), data_(nx * ny, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data_[j * nx_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * nx_ + i]; }

  [[nodiscard]] std::size_t nx() const { return nx_; }
  [[nodiscard]] std::size_t ny() const { return ny_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool same_shape(const Array2D& o) const { return nx_ == o.nx_ && ny_ == o.ny_; }

  std::span<double> flat() { return data_; }
  [[nodiscard]] std::span<const double> flat() const { return data_; }
  double* data() { return data_.data(); }
  [[nodiscard]] const double* data() const { return data_.data(); }

  void fill(double v);
  [[nodiscard]] double max_abs() const;
  [[nodiscard]] double sum() const;
  [[nodiscard]] bool all_finite() const;

  Array2D& operator+=(const Array2D& o);
  Array2D& operator-=(const Array2D& o);
  Array2D& operator*=(double s);
  /// this += s * o
  void axpy(double s, const Array2D& o);

  friend bool operator==(const Array2D&, const Array2D&) = default;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> data_;
};

/// Cell-centered scalar (pressure, order parameter, chemical potential).
class CellField : public Array2D {
 public:
  CellField() = default;
  explicit CellField(const GridSpec& g, double fill = 0.0) : Array2D(g.nx, g.ny, fill) {}
  explicit CellField(Array2D a) : Array2D(std::move(a)) {}
};

/// Face-normal velocities on the MAC grid: ux is (nx+1) x ny, uy is nx x (ny+1).
/// On periodic axes the last face duplicates the first.
struct StaggeredVecField {
  Array2D ux;
  Array2D uy;

  StaggeredVecField() = default;
  explicit StaggeredVecField(const GridSpec& g) : ux(g.nx + 1, g.ny), uy(g.nx, g.ny + 1) {}

  StaggeredVecField& operator+=(const StaggeredVecField& o);
  StaggeredVecField& operator-=(const StaggeredVecField& o);
  StaggeredVecField& operator*=(double s);
  void axpy(double s, const StaggeredVecField& o);
  [[nodiscard]] double max_abs() const;
  [[nodiscard]] bool all_finite() const;

  friend bool operator==(const StaggeredVecField&, const StaggeredVecField&) = default;
};

void check_shape(const CellField& f, const GridSpec& g, const char* what);
void check_shape(const StaggeredVecField& u, const GridSpec& g, const char* what);

/// Copies face 0 onto the duplicate face nx (resp. ny) along periodic axes.
void sync_periodic(StaggeredVecField& u, const GridSpec& g);
/// Zeroes boundary-normal faces along wall axes.
void apply_no_slip(StaggeredVecField& u, const GridSpec& g);

/// Central divergence per cell.
CellField divergence(const StaggeredVecField& u, const GridSpec& g);
/// Face-centered pressure gradient. Wall faces are zero; periodic faces wrap.
StaggeredVecField gradient(const CellField& p, const GridSpec& g);
/// 5-point Laplacian with homogeneous Neumann walls (periodic where flagged).
CellField laplacian(const CellField& f, const GridSpec& g);

/// Discrete L2 inner product over cells.
double cell_inner(const CellField& a, const CellField& b, const GridSpec& g);
/// Discrete L2 inner product over unique faces (wall faces carry half weight, duplicates excluded).
double face_inner(const StaggeredVecField& a, const StaggeredVecField& b, const GridSpec& g);
double cell_mean(const CellField& f, const GridSpec& g);
/// Sum of squared face-gradient differences times cell volume: the discrete Dirichlet energy of a cell field.
double cell_gradient_sq(const CellField& f, const GridSpec& g);

/// Velocity at an arbitrary point by bilinear interpolation of the face lattices.
/// Wall axes use the no-slip ghost for the tangential component; periodic axes wrap.
double interpolate_ux(const StaggeredVecField& u, const GridSpec& g, double x, double y);
double interpolate_uy(const StaggeredVecField& u, const GridSpec& g, double x, double y);
double interpolate_cell(const CellField& f, const GridSpec& g, double x, double y);

/// Field dump: raw little-endian float64 array plus JSON sidecar.
enum class Stagger { Cell, FaceX, FaceY };
const char* to_string(Stagger s);

struct DumpMeta {
  std::string field;
  Stagger stagger = Stagger::Cell;
  double t = 0.0;
  std::string config_hash;
};

/// Writes <stem>.bin and <stem>.json.
void write_field(const std::string& stem, const Array2D& a, const GridSpec& g, const DumpMeta& meta);
/// Reads back a dump written by write_field. Validates the sidecar against the payload size.
Array2D read_field(const std::string& stem, GridSpec* grid = nullptr, DumpMeta* meta = nullptr);

}  // namespace chns
