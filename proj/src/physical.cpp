#include "quam/physical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace quam::physical {

std::vector<PriorityTier> default_tiers() {
  return {{"critical", 0.3}, {"important", 0.3}, {"deferrable", 0.4}};
}

void validate_tiers(const std::vector<PriorityTier>& tiers) {
  if (tiers.empty()) throw std::invalid_argument("priority tiers: empty");
  double sum = 0.0;
  for (const auto& t : tiers) {
    if (t.fraction < 0.0 || t.fraction > 1.0) {
      throw std::invalid_argument("priority tier '" + t.name + "': fraction outside [0,1]");
    }
    sum += t.fraction;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("priority tiers: fractions must sum to 1");
}

double solar_output(double t, double peak_kw, SolarWindow window) {
  if (peak_kw <= 0.0 || t <= window.start_s || t >= window.end_s) return 0.0;
  const double phase = (t - window.start_s) / (window.end_s - window.start_s);
  return std::clamp(peak_kw * std::sin(M_PI * phase), 0.0, peak_kw);
}

WindModel::WindModel(double alpha, double beta, double rho)
    : alpha_(alpha), beta_(beta), rho_(rho), cf_(alpha / (alpha + beta)) {}

double WindModel::next(double capacity_kw, engine::RngStream& stream) {
  const double draw = stream.beta(alpha_, beta_);
  cf_ = std::clamp(rho_ * cf_ + (1.0 - rho_) * draw, 0.0, 1.0);
  return wind_output(capacity_kw, cf_);
}

double wind_output(double capacity_kw, double capacity_factor) {
  return std::max(0.0, capacity_kw) * std::clamp(capacity_factor, 0.0, 1.0);
}

double sample_load(const LoadModel& model, engine::RngStream& stream) {
  return std::max(0.0, stream.normal(model.base_kw, model.noise_sigma_kw));
}

double DispatchResult::balance_error() const {
  const double discharge = std::max(0.0, battery_flow_kw);
  return generation_kw + import_kw + discharge - (served_kw + charge_input_kw + curtailed_kw);
}

DispatchResult dispatch(NodeState& node, const DispatchInputs& gen, double demand_kw, double import_cap_kw,
                        bool islanded, double dt_s) {
  auto& tiers = node.load.tiers;
  auto& bat = node.battery;
  if (node.commanded_shed.size() != tiers.size()) node.commanded_shed.assign(tiers.size(), false);

  DispatchResult r;
  r.demand_kw = std::max(0.0, demand_kw);
  r.generation_kw = gen.total();
  r.shed_by_tier.assign(tiers.size(), 0.0);

  std::vector<double> tier_kw(tiers.size());
  double need = 0.0;
  for (std::size_t i = 0; i < tiers.size(); ++i) {
    tier_kw[i] = r.demand_kw * tiers[i].fraction;
    if (node.commanded_shed[i]) {
      r.shed_by_tier[i] = tier_kw[i];
      tier_kw[i] = 0.0;
    } else {
      need += tier_kw[i];
    }
  }

  const double hours = dt_s / 3600.0;
  double supply = r.generation_kw;

  if (supply >= need) {
    double surplus = supply - need;
    const double headroom_kw = std::max(0.0, bat.capacity_kwh - bat.soc_kwh) / (hours * bat.round_trip_efficiency);
    const double charge = std::min({surplus, bat.max_charge_kw, headroom_kw});
    bat.soc_kwh = std::min(bat.capacity_kwh, bat.soc_kwh + charge * bat.round_trip_efficiency * hours);
    r.charge_input_kw = charge;
    r.battery_flow_kw = -charge;
    r.curtailed_kw = surplus - charge;
    r.served_kw = need;
  } else {
    double deficit = need - supply;
    const double available_kw = std::max(0.0, bat.soc_kwh - bat.reserve_kwh) / hours;
    const double discharge = std::min({deficit, bat.max_discharge_kw, available_kw});
    bat.soc_kwh = std::max(0.0, bat.soc_kwh - discharge * hours);
    r.battery_flow_kw = discharge;
    deficit -= discharge;

    const double cap = islanded ? 0.0 : std::max(0.0, import_cap_kw);
    r.import_kw = std::min(deficit, cap);
    deficit -= r.import_kw;

    // least critical tiers go first
    double unserved = 0.0;
    for (std::size_t k = tiers.size(); k-- > 0 && deficit > 0.0;) {
      const double cut = std::min(deficit, tier_kw[k]);
      r.shed_by_tier[k] += cut;
      unserved += cut;
      deficit -= cut;
    }
    r.served_kw = need - unserved;
  }
  r.shed_kw = std::accumulate(r.shed_by_tier.begin(), r.shed_by_tier.end(), 0.0);
  return r;
}

FrequencyState step_frequency(FrequencyState state, double imbalance_pu, double dt_s) {
  const double rate = (imbalance_pu - state.droop_d * state.delta_f_hz) / (2.0 * state.inertia_h_s);
  state.delta_f_hz += rate * dt_s;
  return state;
}

double accumulate_eens(double shed_kw, double dt_s, double acc_kwh) {
  return acc_kwh + std::max(0.0, shed_kw) * dt_s / 3600.0;
}

}  // namespace quam::physical
