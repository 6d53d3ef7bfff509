#pragma once

#include "quam/engine.hpp"

#include <string>
#include <vector>

namespace quam::physical {

struct GenerationProfile {
  double solar_peak_kw = 30.0;
  double wind_capacity_kw = 20.0;
  double smr_rating_kw = 20.0;
};

struct Battery {
  double capacity_kwh = 60.0;
  double soc_kwh = 15.0;
  double reserve_kwh = 5.0;  // discharge stops at this floor
  double max_charge_kw = 50.0;
  double max_discharge_kw = 50.0;
  double round_trip_efficiency = 0.9;
};

struct PriorityTier {
  std::string name;
  double fraction = 0.0;
};

/// Tiers ordered from most to least critical; shedding starts at the back.
std::vector<PriorityTier> default_tiers();

struct LoadModel {
  double base_kw = 60.0;
  double noise_sigma_kw = 3.0;
  std::vector<PriorityTier> tiers = default_tiers();
};

/// Throws std::invalid_argument when fractions are outside [0,1] or do not
/// sum to one.
void validate_tiers(const std::vector<PriorityTier>& tiers);

struct FrequencyState {
  double delta_f_hz = 0.0;
  double inertia_h_s = 5.0;
  double droop_d = 1.0;
};

struct SolarWindow {
  double start_s = 0.0;
  double end_s = 3600.0;
};

/// Half-sine over the daylight window, `peak` at its midpoint.
double solar_output(double t, double peak_kw, SolarWindow window);

/// Wind capacity factor: Beta(a, b) innovations smoothed by AR(1).
class WindModel {
public:
  WindModel(double alpha = 2.0, double beta = 5.0, double rho = 0.9);

  /// Advances the smoothed capacity factor by one draw; returns capacity x cf.
  double next(double capacity_kw, engine::RngStream& stream);

  [[nodiscard]] double mean_cf() const { return alpha_ / (alpha_ + beta_); }
  [[nodiscard]] double current_cf() const { return cf_; }

private:
  double alpha_;
  double beta_;
  double rho_;
  double cf_;
};

/// One-shot output for a given factor draw.
double wind_output(double capacity_kw, double capacity_factor);

double sample_load(const LoadModel& model, engine::RngStream& stream);

struct NodeState {
  GenerationProfile generation;
  Battery battery;
  LoadModel load;
  FrequencyState frequency;
  /// Tiers held off by command, indexed like `load.tiers`.
  std::vector<bool> commanded_shed;
};

struct DispatchInputs {
  double solar_kw = 0.0;
  double wind_kw = 0.0;
  double smr_kw = 0.0;
  [[nodiscard]] double renewables() const { return solar_kw + wind_kw; }
  [[nodiscard]] double total() const { return solar_kw + wind_kw + smr_kw; }
};

struct DispatchResult {
  double demand_kw = 0.0;
  double generation_kw = 0.0;
  double served_kw = 0.0;
  double shed_kw = 0.0;
  double import_kw = 0.0;
  double battery_flow_kw = 0.0;  // positive = discharge
  double charge_input_kw = 0.0;  // power drawn into the battery (before losses)
  double curtailed_kw = 0.0;
  std::vector<double> shed_by_tier;

  /// generation + import + discharge - (served + charge_input + curtailed)
  [[nodiscard]] double balance_error() const;
};

/// Merit-order dispatch for one step of length `dt_s`. `commanded_shed`
/// tiers are dropped before balancing. Mutates the battery's SOC.
DispatchResult dispatch(NodeState& node, const DispatchInputs& gen, double demand_kw, double import_cap_kw,
                        bool islanded, double dt_s);

/// Explicit Euler step of 2H d(df)/dt = P - D df.
FrequencyState step_frequency(FrequencyState state, double imbalance_pu, double dt_s);

double accumulate_eens(double shed_kw, double dt_s, double acc_kwh);

}  // namespace quam::physical
