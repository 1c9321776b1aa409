#pragma once

#include "chpsim/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

/// Command implementations behind the CLI, exposed as functions so tests
/// can drive them directly.  Exit codes:
///   0 success
///   1 usage error (handled by the CLI layer)
///   2 malformed config or failed validation
///   3 numeric failure (divergence, unbalanced system)
///   4 storage-function audit failure
namespace chpsim {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitAudit = 4;

struct SimulateArgs {
  std::string config_path;
  std::optional<std::string> out_dir;  // overrides outputs.directory
  bool to_steady = false;
};

struct AuditArgs {
  std::string config_path;
  bool force_invalid = false;  // audit even a system that fails validation
  double tol = 1e-9;           // monotonicity slack
  double decay_tol = 1e-8;     // final-value bound on converged runs
};

struct AnalyzeArgs {
  std::string csv_path;
  std::optional<std::string> config_path;  // enables sharing ratios + t_from
  double band = 5e-4;
  double hold = 2.0;
};

struct BatchArgs {
  std::vector<std::string> config_paths;
  std::string out_root = "batch_out";
  int jobs = 0;  // 0: hardware concurrency
};

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
int cmd_equilibrium(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_audit(const AuditArgs& args, std::ostream& out, std::ostream& err);
int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err);
int cmd_batch(const BatchArgs& args, std::ostream& out, std::ostream& err);

}  // namespace chpsim
