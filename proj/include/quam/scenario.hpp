#pragma once

#include "quam/network.hpp"
#include "quam/physical.hpp"
#include "quam/quantum.hpp"
#include "quam/threat.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace quam::scenario {

inline constexpr int kSchemaVersion = 1;

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Carries the dotted key path of the offending field.
class ValidationError : public std::invalid_argument {
public:
  ValidationError(std::string key_path, const std::string& what)
      : std::invalid_argument(key_path + ": " + what), key_path_(std::move(key_path)) {}
  [[nodiscard]] const std::string& key_path() const { return key_path_; }

private:
  std::string key_path_;
};

struct PhysicalConfig {
  double import_cap_kw = 35.0;
  physical::Battery battery;
  physical::GenerationProfile generation;
  physical::LoadModel load;
  physical::SolarWindow solar_window;
  double wind_alpha = 2.0;
  double wind_beta = 5.0;
  double wind_rho = 0.9;
  double inertia_h_s = 5.0;
  double droop_d = 1.0;
  double base_kw = 100.0;  // per-unit base for the swing equation
  /// Per-node profile multipliers are drawn from [1 - h, 1 + h].
  double heterogeneity = 0.0;
  std::vector<threat::Window> islanding;
};

struct ControlConfig {
  double telemetry_interval_s = 3.0;
  double setpoint_ttl_s = 10.0;
  double fallback_fraction = 0.5;  // of the import cap once a setpoint expires
  double allocation_margin_kw = 5.0;
  double shed_hold_s = 60.0;       // a shed command latches at most this long
  double priority_heartbeat_s = 0.0;
  double telemetry_sigma_kw = 1.0;
  double meter_sigma_kw = 0.2;
  double endpoint_stack_ms = 25.5;
  double plausibility_sigma_kw = 2.0;
  double consistency_tolerance_kw = 8.0;
};

struct QuantumConfig {
  double baseline_qber = 0.011;
  double base_keyrate_bps = 1000.0;
  std::int64_t initial_pool_bits = 12500;
  std::int64_t pool_capacity_bits = 12500;  // per link; 0 = unbounded
  double probe_interval_s = 4.0;
  int probe_sample_size = 200;
  double keypool_tick_s = 1.0;
  double kak_stage_fail_prob = 0.013;
  quantum::TokenCosts token;
};

struct DetectionConfig {
  double wls_interval_s = 10.0;
  double alpha = 0.05;
  double challenge_mean_interval_s = 30.0;  // 0 disables challenges
  double challenge_sigma_kw = 0.2;          // noise on a challenged point read
  double ewma_lambda = 0.2;
  double ewma_k_sigma = 4.0;
  double ewma_min_sigma = 0.25;
};

struct AnalyticConfig {
  std::string curve = "swap";  // swap | distillation | key_fraction
  std::vector<double> qber_values = {0.01, 0.015, 0.02, 0.03};
  int max_hops = 10;
  int points = 101;
};

struct SweepAxis {
  std::string axis;  // n_nodes | topology | defense_tier | ablation | attack_kind | intensity | seed
  std::vector<nlohmann::json> values;
};

struct SweepSpec {
  std::vector<SweepAxis> axes;  // cartesian product, first axis outermost
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::string name = "scenario";
  std::string mode = "simulate";  // simulate | analytic
  std::uint64_t seed = 1;
  int seeds = 1;
  double duration_s = 3600.0;
  double physics_dt = 1.0;
  double time_budget_s = 30.0;
  net::TopologyKind topology = net::TopologyKind::Star;
  int n_nodes = 5;
  PhysicalConfig physical;
  ControlConfig control;
  net::LinkParams links;
  QuantumConfig quantum;
  threat::DefenseConfig defense;
  std::optional<threat::AblationCell> ablation;
  DetectionConfig detection;
  threat::AttackCalibration calibration;
  std::vector<threat::AttackPlan> attacks;
  std::optional<SweepSpec> sweep;
  AnalyticConfig analytic;

  /// The document this config was parsed from, after overrides.
  nlohmann::json source;
};

/// Validates and converts a scenario document. Throws ValidationError.
ScenarioConfig from_json(const nlohmann::json& doc);

/// Reads and validates a scenario file. Throws ParseError or ValidationError.
ScenarioConfig parse_scenario(const std::filesystem::path& path);

nlohmann::json load_json(const std::filesystem::path& path);

/// Applies `a.b.c=value` to the document; the value is read as JSON when it
/// parses, otherwise as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Sets the document field addressed by a sweep axis.
void apply_axis(nlohmann::json& doc, const std::string& axis, const nlohmann::json& value);

/// One entry per cartesian combination of the sweep axes.
struct SweepCell {
  std::string label;
  std::vector<std::pair<std::string, nlohmann::json>> assignment;
  nlohmann::json doc;
};
std::vector<SweepCell> expand_sweep(const ScenarioConfig& cfg);

}  // namespace quam::scenario
