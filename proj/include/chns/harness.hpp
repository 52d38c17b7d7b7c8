#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "chns/cell.hpp"
#include "chns/chns.hpp"
#include "chns/meanvalue.hpp"

namespace chns {

/// Snapshots of one run on one grid.
struct Trajectory {
  GridSpec grid;
  std::vector<Snapshot> snapshots;

  static Trajectory from(const SimulationResult& r, const GridSpec& g) { return Trajectory{g, r.snapshots}; }
  [[nodiscard]] std::vector<double> times() const;
};

enum class FieldKind { Velocity, Phi, Mu, Pressure };

/// Conservative restriction by averaging the fine cells inside each coarse cell.
/// The fine grid must refine the coarse one by integer factors.
CellField restrict_cells(const CellField& f, const GridSpec& fine, const GridSpec& coarse);
/// Face-wise restriction: each coarse face carries the mean of the fine faces it covers.
StaggeredVecField restrict_faces(const StaggeredVecField& u, const GridSpec& fine, const GridSpec& coarse);

/// sqrt(sum_t w_t ||a - b||^2_L2(Q)) with trapezoid weights, both restricted to `common`.
/// Throws std::invalid_argument if the snapshot schedules differ.
double error_l2_spacetime(const Trajectory& a, const Trajectory& b, const GridSpec& common, FieldKind field);

/// Cell-field history of a trajectory (phi, mu or p).
CellTrajectory cell_history(const Trajectory& t, FieldKind field);

/// Throws StructuralError naming the minimum admissible grid when fewer than
/// `min_cells` grid cells span one period eps * wavelength along an axis the model varies on.
void check_resolvable(const ViscosityModel& m, double eps, const GridSpec& g, double min_cells = 8.0);

struct GradientDefect {
  double plain = 0.0;      ///< ||grad u_eps - grad u_0||_L2(Q_T)
  double corrected = 0.0;  ///< ||grad u_eps - grad u_0 - grad_y u_1(., ./eps)||_L2(Q_T)
};

/// Gradient defects on the heterogeneous grid. grad u_0 is prolonged bilinearly
/// from the homogenized grid; correctors are solved on `cell` (periodic models only).
GradientDefect corrector_gradient_defect(const Trajectory& het, const Trajectory& hom, const ViscosityModel& m,
                                         double eps, const GridSpec& cell, const EffectiveTensorOptions& opts);

struct StudySetup {
  SimulationSetup hetero;  ///< heterogeneous grid and shared physics, time and initial data
  GridSpec homog_grid = GridSpec::box(64, 64);
  ViscosityModel model;
  GridSpec cell_grid = GridSpec::periodic(64, 64);
  EffectiveTensorOptions cell;
  std::size_t macro_lattice = 9;  ///< tensor table size for macro-dependent models
  std::vector<double> truncation_radii{4.0, 8.0, 16.0};
  double truncation_cells_per_unit = 8.0;
  std::vector<TestFunction> test_functions;
  bool resolved_reference = false;
  std::size_t jobs = 1;
};

struct ConvergenceReport {
  std::vector<double> epsilons;
  std::vector<double> err_u_l2;
  std::vector<double> err_phi_l2;
  std::vector<double> pair_p;  ///< max over test functions
  std::vector<double> pair_mu;
  std::vector<std::vector<double>> pair_p_each;
  std::vector<std::vector<double>> pair_mu_each;
  std::vector<double> corr_grad_defect;
  std::vector<double> plain_grad_defect;
  std::vector<double> rate_u;  ///< log2(err[k-1] / err[k]); NaN for the first entry
  std::vector<double> rate_phi;
  std::vector<BoundMonitors> monitors;
  Tensor4 a_hat;
  std::string reference;
  std::string config_hash;
};

/// Smooth separable pairing function used when none is configured: (1 + t) x1 x2^2.
TestFunction default_pairing_function();

/// Effective coefficient for the homogenized run of a study.
MacroTensorField homogenized_coefficient(const StudySetup& s);

/// Effective tensor once, homogenized run once, one heterogeneous run per eps.
ConvergenceReport convergence_study(const StudySetup& s, const std::vector<double>& eps);

/// report.csv contents: a config-hash comment line, then the fixed columns.
std::string to_csv(const ConvergenceReport& r);

}  // namespace chns
