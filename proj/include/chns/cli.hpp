#pragma once

#include <string>
#include <vector>

#include "chns/cell.hpp"
#include "chns/config.hpp"

namespace chns {

inline constexpr const char* kVersion = "0.1.0";

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitRuntime = 4,
};

/// Entry point of the `chns` tool; returns the process exit status.
int run_cli(int argc, const char* const* argv);

/// Effective coefficient stored by `chns cell`: the tensor at the configured
/// macro point and, for macro-dependent models, the lattice table.
struct TensorArtifact {
  EffectiveTensor tensor;
  MacroTensorField field;
  std::vector<double> truncation_defects;
};

TensorArtifact compute_tensor_artifact(const RunConfig& cfg, std::size_t jobs);
std::string tensor_json(const TensorArtifact& a, const RunConfig& cfg);
/// Reads a tensor.json back into a coefficient field.
MacroTensorField read_tensor_json(const std::string& path);

struct VerifyRow {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
};

/// Built-in invariant suite run by `chns verify`.
std::vector<VerifyRow> verify_suite(const RunConfig& cfg);

}  // namespace chns
