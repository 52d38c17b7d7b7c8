#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chns/cell.hpp"
#include "chns/grid.hpp"
#include "chns/meanvalue.hpp"
#include "chns/operators.hpp"
#include "chns/viscosity.hpp"

namespace chns {

/// Thrown when dt exceeds the advective or diffusive step limit.
class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when an inner linear solve does not reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed-form body force g(t, x).
struct Forcing {
  enum class Kind { None, Uniform, Swirl };
  Kind kind = Kind::None;
  double amp = 0.0;
  std::array<double, 2> dir{1.0, 0.0};

  /// Swirl: amp * (sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y)).
  [[nodiscard]] std::array<double, 2> operator()(double t, double x, double y) const;
  [[nodiscard]] bool is_zero() const { return kind == Kind::None || amp == 0.0; }
};

const char* to_string(Forcing::Kind k);

struct PhysParams {
  double kappa = 1.0;
  double lambda = 0.01;
  double alpha = 0.1;
  Forcing forcing;

  /// Throws std::invalid_argument naming the key; returns warnings (lambda >= alpha).
  [[nodiscard]] std::vector<std::string> validate() const;
};

/// f(s) = s^3 - s
inline double f_double_well(double s) { return s * s * s - s; }
/// F(s) = (s^2 - 1)^2 / 4
inline double potential_F(double s) {
  const double q = s * s - 1.0;
  return 0.25 * q * q;
}

struct StaggeredState {
  double t = 0.0;
  StaggeredVecField u;
  CellField p;
  CellField phi;
  CellField mu;

  StaggeredState() = default;
  explicit StaggeredState(const GridSpec& g) : u(g), p(g), phi(g), mu(g) {}
  [[nodiscard]] bool all_finite() const { return u.all_finite() && p.all_finite() && phi.all_finite() && mu.all_finite(); }
};

/// Viscous coefficient of the momentum equation: the oscillating model at scale
/// eps, or an effective tensor field.
class Coefficient {
 public:
  static Coefficient heterogeneous(ViscosityModel m, double eps);
  static Coefficient homogenized(MacroTensorField a);

  [[nodiscard]] bool is_heterogeneous() const { return hetero_; }
  [[nodiscard]] bool time_dependent() const;
  [[nodiscard]] const ViscosityModel& model() const { return model_; }
  [[nodiscard]] double eps() const { return eps_; }
  [[nodiscard]] const MacroTensorField& tensor() const { return tensor_; }
  /// Flux-point samples at time t; A(t, x, t/eps, x/eps) or the tensor field.
  [[nodiscard]] VelocityCoefficients sample(const GridSpec& g, double t) const;

 private:
  bool hetero_ = true;
  ViscosityModel model_;
  double eps_ = 1.0;
  MacroTensorField tensor_;
};

struct EnergyRecord {
  double t = 0.0;
  double kinetic = 0.0;
  double interfacial = 0.0;
  double potential = 0.0;
  double total = 0.0;
  double visc_dissipation = 0.0;
  double mu_dissipation = 0.0;
  double work = 0.0;
  double mass = 0.0;
};

/// Midpoint quadrature of each energy term; `a` are the viscous coefficients at state.t.
EnergyRecord energy(const StaggeredState& s, const VelocityCoefficients& a, const PhysParams& phys, const GridSpec& g);

/// Per-step record and running norms of the a priori bound monitors.
struct DiagnosticsRecord {
  double t = 0.0;
  double div_max = 0.0;
  double mass = 0.0;
  double phi_max = 0.0;
  double u_l2 = 0.0;
  double grad_u_l2 = 0.0;
  double phi_h1 = 0.0;
  double mu_h1 = 0.0;
  double p_l2 = 0.0;
  double p_mean = 0.0;
  std::size_t ns_iterations = 0;
};

struct BoundMonitors {
  double u_linf_l2 = 0.0;    ///< max_t ||u||_L2
  double u_l2_h1 = 0.0;      ///< (int ||grad u||^2 dt)^1/2
  double phi_linf_h1 = 0.0;  ///< max_t ||phi||_H1
  double mu_l2_h1 = 0.0;     ///< (int ||mu||_H1^2 dt)^1/2
  double p_l2 = 0.0;         ///< (int ||p||^2 dt)^1/2
  std::vector<std::string> flags;

  [[nodiscard]] std::array<double, 5> values() const { return {u_linf_l2, u_l2_h1, phi_linf_h1, mu_l2_h1, p_l2}; }
  static std::array<const char*, 5> names() { return {"u_linf_l2", "u_l2_h1", "phi_linf_h1", "mu_l2_h1", "p_l2"}; }
};

/// Running accumulation of the bound monitors. The reference scale of each monitor is its
/// largest value over the first `warmup` records; later values beyond 10x that scale are flagged.
class Diagnostics {
 public:
  explicit Diagnostics(const GridSpec& g, std::size_t warmup = 1);
  DiagnosticsRecord record(const StaggeredState& s, double dt_weight, std::size_t ns_iterations = 0);
  [[nodiscard]] const BoundMonitors& monitors() const { return mon_; }

 private:
  GridSpec g_;
  VelocityCoefficients identity_;
  BoundMonitors mon_;
  double u2_int_ = 0.0;
  double mu2_int_ = 0.0;
  double p2_int_ = 0.0;
  std::size_t warmup_ = 1;
  std::size_t count_ = 0;
  std::array<double, 5> scale_{};
  std::array<bool, 5> flagged_{};
};

/// Single-state report (the `diagnostics(state, trajectory)` operation for one time level).
DiagnosticsRecord diagnostics(const StaggeredState& s, const GridSpec& g);

struct TimeParams {
  double dt = 1.0 / 1024.0;
  double T = 0.25;
  std::size_t snapshot_stride = 16;
  double cfl_diffusive_factor = 1000.0;
};

struct InitialData {
  enum class Velocity { Zero, Vortex };
  double cx = 0.5;
  double cy = 0.5;
  double ax = 0.3;
  double ay = 0.2;
  double width = 0.05;
  double phi_shift = 0.0;  ///< added to the tanh profile (0 keeps pure phases at +-1)
  Velocity velocity = Velocity::Zero;
  double velocity_amp = 0.0;
};

const char* to_string(InitialData::Velocity v);

struct SolverParams {
  double ns_tol = 1e-10;
  std::size_t ns_max_iter = 2000;
  double ch_stabilization = -1.0;  ///< S; negative selects 2 alpha
};

struct SimulationSetup {
  GridSpec grid = GridSpec::box(128, 128);
  PhysParams phys;
  TimeParams time;
  InitialData init;
  SolverParams solver;
  std::string config_hash;

  [[nodiscard]] std::size_t steps() const;
  [[nodiscard]] double stabilization() const { return solver.ch_stabilization < 0 ? 2.0 * phys.alpha : solver.ch_stabilization; }
};

/// Closed-form initial state: elliptic tanh blob, optional projected vortex, and mu from phi.
StaggeredState initial_state(const SimulationSetup& setup);

/**
 * Owns the spectral solvers and coefficient cache for one grid. A step is a
 * stabilized semi-implicit Cahn-Hilliard update with the old velocity,
 * followed by a Chorin projection step with implicit viscous diffusion.
 */
class Stepper {
 public:
  Stepper(const SimulationSetup& setup, Coefficient coeff);
  ~Stepper();
  Stepper(const Stepper&) = delete;
  Stepper& operator=(const Stepper&) = delete;

  void ch_substep(StaggeredState& s, double dt);
  /// Returns PCG iterations of the viscous solve.
  std::size_t ns_substep(StaggeredState& s, double dt);
  /// Advances s.t by dt.
  std::size_t step(StaggeredState& s, double dt);

  /// dt limit; throws StepSizeError when dt exceeds it.
  void check_cfl(const StaggeredState& s, double dt) const;
  [[nodiscard]] const VelocityCoefficients& coefficients(double t);
  [[nodiscard]] const GridSpec& grid() const { return setup_.grid; }
  [[nodiscard]] const SimulationSetup& setup() const { return setup_; }
  [[nodiscard]] const Coefficient& coefficient() const { return coeff_; }

 private:
  struct Impl;
  SimulationSetup setup_;
  Coefficient coeff_;
  std::unique_ptr<Impl> impl_;
};

/// Convenience wrappers building a Stepper for one call.
void ch_substep(StaggeredState& s, double dt, const PhysParams& phys, const GridSpec& g, double stabilization = -1.0);
void ns_substep(StaggeredState& s, double dt, const Coefficient& coeff, const PhysParams& phys, const GridSpec& g);
void step(StaggeredState& s, double dt, const Coefficient& coeff, const PhysParams& phys, const GridSpec& g);

struct Snapshot {
  double t = 0.0;
  std::size_t step = 0;
  StaggeredState state;
};

/// Receives run output; the file writer below is the only implementation that touches disk.
class TrajectorySink {
 public:
  virtual ~TrajectorySink() = default;
  virtual void on_energy(const EnergyRecord&) {}
  virtual void on_diagnostics(const DiagnosticsRecord&) {}
  virtual void on_snapshot(const Snapshot&) {}
  virtual void on_failure(const std::string&) {}
  virtual void on_finish(const BoundMonitors&) {}
};

struct SimulationResult {
  std::vector<Snapshot> snapshots;
  std::vector<EnergyRecord> energies;
  std::vector<DiagnosticsRecord> diagnostics;
  BoundMonitors monitors;
  std::size_t steps = 0;
  std::vector<std::string> warnings;
};

struct RunOptions {
  bool keep_snapshots = true;
  TrajectorySink* sink = nullptr;
  std::string log_phase = "simulate";
};

/// Fixed-step march to T. Snapshots at step 0, every stride, and the final step.
/// On failure the sink receives on_failure before the exception propagates.
SimulationResult run_simulation(const SimulationSetup& setup, const Coefficient& coeff, const RunOptions& opts = {});

/// Writes energy.csv, diagnostics.csv, field dumps per snapshot, and monitors.json into a directory.
class DirectoryWriter : public TrajectorySink {
 public:
  DirectoryWriter(std::string dir, const SimulationSetup& setup, std::string mode);
  ~DirectoryWriter() override;
  void on_energy(const EnergyRecord& e) override;
  void on_diagnostics(const DiagnosticsRecord& d) override;
  void on_snapshot(const Snapshot& s) override;
  void on_failure(const std::string& what) override;
  void on_finish(const BoundMonitors& m) override;

 private:
  struct Files;
  std::string dir_;
  SimulationSetup setup_;
  std::string mode_;
  std::unique_ptr<Files> files_;
};

}  // namespace chns
