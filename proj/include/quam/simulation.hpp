#pragma once

#include "quam/metrics.hpp"
#include "quam/scenario.hpp"

namespace quam::sim {

/// Runs one scenario with `cfg.seed` as the master seed and returns the full
/// log. Bit-identical for identical (config, seed).
metrics::RunLog simulate(const scenario::ScenarioConfig& cfg);

/// simulate() followed by summarize().
metrics::RunSummary run(const scenario::ScenarioConfig& cfg);

}  // namespace quam::sim
