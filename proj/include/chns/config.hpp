#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "chns/cell.hpp"
#include "chns/chns.hpp"
#include "chns/harness.hpp"
#include "chns/viscosity.hpp"

namespace chns {

/// Configuration error naming the offending dotted key ("" for file-level problems).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what) : std::runtime_error(what), key_(std::move(key)) {}
  [[nodiscard]] const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct RunConfig {
  GridSpec grid = GridSpec::box(128, 128);
  GridSpec homog_grid = GridSpec::box(64, 64);
  GridSpec cell_grid = GridSpec::periodic(64, 64);
  std::size_t macro_lattice = 9;
  EffectiveTensorOptions cell;
  std::vector<double> truncation_radii{4.0, 8.0, 16.0};
  double truncation_cells_per_unit = 8.0;
  MacroPoint macro_point{0.0, 0.5, 0.5};

  ViscosityModel viscosity = ViscosityModel::layered();
  std::optional<double> epsilon;

  PhysParams physics;
  TimeParams time;
  InitialData init;
  SolverParams solver;

  std::vector<double> epsilons{0.25, 0.125, 0.0625};
  bool resolved_reference = false;
  std::vector<TestFunction> test_functions;

  std::size_t mv_points_per_wavelength = 16;
  double mv_tol = 1e-3;

  std::string output_dir;
  std::string hash;  ///< FNV-1a of the canonical form

  [[nodiscard]] SimulationSetup simulation_setup(const GridSpec& g) const;
  [[nodiscard]] StudySetup study_setup(std::size_t jobs) const;
};

/// Reads and validates a TOML file. Unknown keys are errors.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_string(std::string_view text, std::string_view source = "<string>");

/// Canonical JSON of every resolved setting; the config hash is computed from it.
std::string canonical_json(const RunConfig& c);
/// 64-bit FNV-1a, lowercase hex.
std::string fnv1a_hex(std::string_view data);

/// Documented key list with types and defaults.
std::string config_schema();

}  // namespace chns
