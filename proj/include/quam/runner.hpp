#pragma once

#include "quam/metrics.hpp"
#include "quam/scenario.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace quam::runner {

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kRuntimeFailure = 2, kPartialFailure = 3 };

/// Environment variable that, when set, replaces the default output root.
inline constexpr const char* kOutRootEnv = "QUAM_OUT_ROOT";

/// Output directory for a run: the explicit value wins, then $QUAM_OUT_ROOT/<name>, then out/<name>.
std::filesystem::path resolve_out_dir(const std::string& explicit_out, const std::string& scenario_name);

struct CellResult {
  std::string label;  // "base" when the scenario has no sweep
  std::vector<std::pair<std::string, nlohmann::json>> assignment;
  std::uint64_t seed = 0;
  int n_nodes = 0;
  bool ok = false;
  std::string error;
  double wall_s = 0.0;
  metrics::RunSummary summary;
};

/// Runs every seed of `cfg` (seed .. seed+seeds-1). One seed writes straight
/// into out_dir; several seeds get seed-<k> subdirectories plus sweep_summary.csv.
int run_experiment(const scenario::ScenarioConfig& cfg, const std::filesystem::path& out_dir, int parallelism = 1);

/// Expands the sweep axes and runs every (cell, seed) pair into
/// out_dir/<cell>/seed-<k>, then writes out_dir/sweep_summary.csv.
int run_sweep(const scenario::ScenarioConfig& cfg, const std::filesystem::path& out_dir, int parallelism);

/// Lower level entry used by both of the above and by tests.
std::vector<CellResult> run_cells(const scenario::ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                                  int parallelism, bool flat_single);

/// Deterministic CSV: rows ordered by (cell order, seed), independent of scheduling.
void write_sweep_summary(const std::filesystem::path& path, const std::vector<CellResult>& results);

/// Closed-form quantum curves, written to out_dir/analytic_<curve>.csv.
int run_analytic(const scenario::ScenarioConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace quam::runner
