#include "quam/scenario.hpp"

#include <charconv>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace quam::scenario {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

/// Walks one JSON object, tracking which keys were consumed so that
/// leftovers can be reported as unknown.
class Reader {
public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string path(const std::string& key) const { return join(path_, key); }

  const json* raw(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void num(const std::string& key, double& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number()) throw ValidationError(path(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ValidationError(path(key), "must be finite");
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number_integer()) throw ValidationError(path(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned() || v->get<long long>() >= 0) {
          out = v->get<Int>();
        } else {
          throw ValidationError(path(key), "must be >= 0");
        }
      } else {
        out = v->get<Int>();
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = raw(key)) {
      if (!v->is_boolean()) throw ValidationError(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void str(const std::string& key, std::string& out) {
    if (const json* v = raw(key)) {
      if (!v->is_string()) throw ValidationError(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  std::optional<Reader> object(const std::string& key) {
    if (const json* v = raw(key)) return Reader(*v, path(key));
    return std::nullopt;
  }

  const json* array(const std::string& key) {
    const json* v = raw(key);
    if (v != nullptr && !v->is_array()) throw ValidationError(path(key), "expected a list");
    return v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ValidationError(path(it.key()), "unknown key");
    }
  }

private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ValidationError(path, what);
}

std::vector<threat::Window> read_windows(const json& arr, const std::string& path) {
  std::vector<threat::Window> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    Reader r(arr[i], path + "[" + std::to_string(i) + "]");
    threat::Window w;
    r.num("start_s", w.start_s);
    r.num("end_s", w.end_s);
    r.finish();
    require(w.end_s > w.start_s, r.path("end_s"), "window end must be after start");
    out.push_back(w);
  }
  return out;
}

void read_physical(Reader r, PhysicalConfig& p) {
  r.num("import_cap_kw", p.import_cap_kw);
  require(p.import_cap_kw >= 0.0, r.path("import_cap_kw"), "must be >= 0");
  r.num("battery_kwh", p.battery.capacity_kwh);
  r.num("soc_init_kwh", p.battery.soc_kwh);
  r.num("reserve_kwh", p.battery.reserve_kwh);
  r.num("max_charge_kw", p.battery.max_charge_kw);
  r.num("max_discharge_kw", p.battery.max_discharge_kw);
  r.num("efficiency", p.battery.round_trip_efficiency);
  require(p.battery.capacity_kwh > 0.0, r.path("battery_kwh"), "must be > 0");
  require(p.battery.soc_kwh >= 0.0 && p.battery.soc_kwh <= p.battery.capacity_kwh, r.path("soc_init_kwh"),
          "must be within [0, battery_kwh]");
  require(p.battery.reserve_kwh >= 0.0 && p.battery.reserve_kwh <= p.battery.capacity_kwh, r.path("reserve_kwh"),
          "must be within [0, battery_kwh]");
  require(p.battery.max_charge_kw >= 0.0, r.path("max_charge_kw"), "must be >= 0");
  require(p.battery.max_discharge_kw >= 0.0, r.path("max_discharge_kw"), "must be >= 0");
  require(p.battery.round_trip_efficiency > 0.0 && p.battery.round_trip_efficiency <= 1.0, r.path("efficiency"),
          "must be in (0,1]");
  r.num("solar_peak_kw", p.generation.solar_peak_kw);
  r.num("wind_capacity_kw", p.generation.wind_capacity_kw);
  r.num("smr_kw", p.generation.smr_rating_kw);
  require(p.generation.solar_peak_kw >= 0.0, r.path("solar_peak_kw"), "must be >= 0");
  require(p.generation.wind_capacity_kw >= 0.0, r.path("wind_capacity_kw"), "must be >= 0");
  require(p.generation.smr_rating_kw >= 0.0, r.path("smr_kw"), "must be >= 0");
  if (auto w = r.object("solar_window")) {
    w->num("start_s", p.solar_window.start_s);
    w->num("end_s", p.solar_window.end_s);
    w->finish();
    require(p.solar_window.end_s > p.solar_window.start_s, w->path("end_s"), "must be after start_s");
  }
  r.num("wind_alpha", p.wind_alpha);
  r.num("wind_beta", p.wind_beta);
  r.num("wind_rho", p.wind_rho);
  require(p.wind_alpha > 0.0, r.path("wind_alpha"), "must be > 0");
  require(p.wind_beta > 0.0, r.path("wind_beta"), "must be > 0");
  require(p.wind_rho >= 0.0 && p.wind_rho < 1.0, r.path("wind_rho"), "must be in [0,1)");
  r.num("load_base_kw", p.load.base_kw);
  r.num("load_sigma_kw", p.load.noise_sigma_kw);
  require(p.load.base_kw >= 0.0, r.path("load_base_kw"), "must be >= 0");
  require(p.load.noise_sigma_kw >= 0.0, r.path("load_sigma_kw"), "must be >= 0");
  if (const json* tiers = r.array("tiers")) {
    p.load.tiers.clear();
    for (std::size_t i = 0; i < tiers->size(); ++i) {
      Reader t((*tiers)[i], r.path("tiers") + "[" + std::to_string(i) + "]");
      physical::PriorityTier tier;
      t.str("name", tier.name);
      t.num("fraction", tier.fraction);
      t.finish();
      p.load.tiers.push_back(tier);
    }
    try {
      physical::validate_tiers(p.load.tiers);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(r.path("tiers"), e.what());
    }
  }
  r.num("inertia_h_s", p.inertia_h_s);
  r.num("droop_d", p.droop_d);
  r.num("base_kw", p.base_kw);
  require(p.inertia_h_s > 0.0, r.path("inertia_h_s"), "must be > 0");
  require(p.droop_d >= 0.0, r.path("droop_d"), "must be >= 0");
  require(p.base_kw > 0.0, r.path("base_kw"), "must be > 0");
  r.num("heterogeneity", p.heterogeneity);
  require(p.heterogeneity >= 0.0 && p.heterogeneity < 1.0, r.path("heterogeneity"), "must be in [0,1)");
  if (const json* w = r.array("islanding")) p.islanding = read_windows(*w, r.path("islanding"));
  r.finish();
}

void read_control(Reader r, ControlConfig& c) {
  r.num("telemetry_interval_s", c.telemetry_interval_s);
  r.num("setpoint_ttl_s", c.setpoint_ttl_s);
  r.num("fallback_fraction", c.fallback_fraction);
  r.num("allocation_margin_kw", c.allocation_margin_kw);
  r.num("shed_hold_s", c.shed_hold_s);
  r.num("priority_heartbeat_s", c.priority_heartbeat_s);
  r.num("telemetry_sigma_kw", c.telemetry_sigma_kw);
  r.num("meter_sigma_kw", c.meter_sigma_kw);
  r.num("endpoint_stack_ms", c.endpoint_stack_ms);
  r.num("plausibility_sigma_kw", c.plausibility_sigma_kw);
  r.num("consistency_tolerance_kw", c.consistency_tolerance_kw);
  r.finish();
  require(c.telemetry_interval_s > 0.0, r.path("telemetry_interval_s"), "must be > 0");
  require(c.setpoint_ttl_s > 0.0, r.path("setpoint_ttl_s"), "must be > 0");
  require(c.fallback_fraction >= 0.0 && c.fallback_fraction <= 1.0, r.path("fallback_fraction"), "must be in [0,1]");
  require(c.allocation_margin_kw >= 0.0, r.path("allocation_margin_kw"), "must be >= 0");
  require(c.shed_hold_s > 0.0, r.path("shed_hold_s"), "must be > 0");
  require(c.priority_heartbeat_s >= 0.0, r.path("priority_heartbeat_s"), "must be >= 0");
  require(c.telemetry_sigma_kw > 0.0, r.path("telemetry_sigma_kw"), "must be > 0");
  require(c.meter_sigma_kw > 0.0, r.path("meter_sigma_kw"), "must be > 0");
  require(c.endpoint_stack_ms >= 0.0, r.path("endpoint_stack_ms"), "must be >= 0");
  require(c.plausibility_sigma_kw > 0.0, r.path("plausibility_sigma_kw"), "must be > 0");
  require(c.consistency_tolerance_kw > 0.0, r.path("consistency_tolerance_kw"), "must be > 0");
}

void read_links(Reader r, net::LinkParams& p) {
  r.num("latency_ms", p.latency_ms);
  r.num("jitter_ms", p.jitter_ms);
  r.num("bandwidth_kbps", p.bandwidth_kbps);
  r.num("loss_prob", p.loss_prob);
  r.integer("queue_capacity", p.queue_capacity);
  r.finish();
  require(p.latency_ms >= 0.0, r.path("latency_ms"), "must be >= 0");
  require(p.jitter_ms >= 0.0, r.path("jitter_ms"), "must be >= 0");
  require(p.bandwidth_kbps > 0.0, r.path("bandwidth_kbps"), "must be > 0");
  require(p.loss_prob >= 0.0 && p.loss_prob <= 1.0, r.path("loss_prob"), "must be in [0,1]");
  require(p.queue_capacity >= 1, r.path("queue_capacity"), "must be >= 1");
}

void read_quantum(Reader r, QuantumConfig& q) {
  r.num("baseline_qber", q.baseline_qber);
  r.num("base_keyrate_bps", q.base_keyrate_bps);
  r.integer("initial_pool_bits", q.initial_pool_bits);
  r.integer("pool_capacity_bits", q.pool_capacity_bits);
  r.num("probe_interval_s", q.probe_interval_s);
  r.integer("probe_sample_size", q.probe_sample_size);
  r.num("keypool_tick_s", q.keypool_tick_s);
  r.num("kak_stage_fail_prob", q.kak_stage_fail_prob);
  if (auto t = r.object("token")) {
    t->integer("tag_bits", q.token.tag_bits);
    t->integer("encryption_bits", q.token.encryption_bits);
    t->integer("per_extra_hop_bits", q.token.per_extra_hop_bits);
    t->num("validity_s", q.token.validity_s);
    t->finish();
    require(q.token.tag_bits >= 0, t->path("tag_bits"), "must be >= 0");
    require(q.token.encryption_bits >= 0, t->path("encryption_bits"), "must be >= 0");
    require(q.token.per_extra_hop_bits >= 0, t->path("per_extra_hop_bits"), "must be >= 0");
    require(q.token.validity_s > 0.0, t->path("validity_s"), "must be > 0");
  }
  r.finish();
  require(q.baseline_qber >= 0.0 && q.baseline_qber <= 0.5, r.path("baseline_qber"), "must be in [0,0.5]");
  require(q.base_keyrate_bps >= 0.0, r.path("base_keyrate_bps"), "must be >= 0");
  require(q.initial_pool_bits >= 0, r.path("initial_pool_bits"), "must be >= 0");
  require(q.pool_capacity_bits >= 0, r.path("pool_capacity_bits"), "must be >= 0");
  require(q.pool_capacity_bits == 0 || q.initial_pool_bits <= q.pool_capacity_bits, r.path("initial_pool_bits"),
          "must not exceed pool_capacity_bits");
  require(q.probe_interval_s > 0.0, r.path("probe_interval_s"), "must be > 0");
  require(q.probe_sample_size >= 1, r.path("probe_sample_size"), "must be >= 1");
  require(q.keypool_tick_s > 0.0, r.path("keypool_tick_s"), "must be > 0");
  require(q.kak_stage_fail_prob >= 0.0 && q.kak_stage_fail_prob <= 1.0, r.path("kak_stage_fail_prob"),
          "must be in [0,1]");
}

void read_toggles(Reader r, threat::StageToggles& t) {
  r.boolean("acl", t.acl);
  r.boolean("rate_limit", t.rate_limit);
  r.boolean("signature", t.signature);
  r.boolean("qca_token", t.qca_token);
  r.boolean("plausibility", t.plausibility);
  r.boolean("consistency", t.consistency);
  r.boolean("quarantine", t.quarantine);
  r.boolean("classical_ids", t.classical_ids);
  r.boolean("pingpong_ids", t.pingpong_ids);
  r.boolean("qkd_encryption", t.qkd_encryption);
  r.finish();
}

void read_defense(Reader r, threat::DefenseConfig& d, std::optional<threat::AblationCell>& ablation) {
  std::string tier = "none";
  r.str("tier", tier);
  auto parsed = threat::parse_tier(tier);
  require(parsed.has_value(), r.path("tier"), "expected none, classical or quantum");
  threat::DefenseConfig base = d;
  base.tier = *parsed;
  base.toggles = threat::preset_toggles(*parsed);

  r.num("rate_limit_msgs_per_s", base.rate_limit_msgs_per_s);
  r.num("rate_limit_burst", base.rate_limit_burst);
  r.integer("quarantine_threshold", base.quarantine_threshold);
  r.num("quarantine_window_s", base.quarantine_window_s);
  r.num("quarantine_duration_s", base.quarantine_duration_s);
  r.num("forge_success_prob", base.forge_success_prob);
  r.num("plausibility_k", base.plausibility_k);
  require(base.rate_limit_msgs_per_s > 0.0, r.path("rate_limit_msgs_per_s"), "must be > 0");
  require(base.rate_limit_burst >= 1.0, r.path("rate_limit_burst"), "must be >= 1");
  require(base.quarantine_threshold >= 0, r.path("quarantine_threshold"), "must be >= 0");
  require(base.quarantine_window_s > 0.0, r.path("quarantine_window_s"), "must be > 0");
  require(base.quarantine_duration_s >= 0.0, r.path("quarantine_duration_s"), "must be >= 0");
  require(base.forge_success_prob >= 0.0 && base.forge_success_prob <= 1.0, r.path("forge_success_prob"),
          "must be in [0,1]");
  require(base.plausibility_k > 0.0, r.path("plausibility_k"), "must be > 0");
  if (auto dl = r.object("delays_ms")) {
    dl->num("signature", base.delays.signature_ms);
    dl->num("classical_ids", base.delays.classical_ids_ms);
    dl->num("qca_issue", base.delays.qca_issue_ms);
    dl->num("qca_verify", base.delays.qca_verify_ms);
    dl->num("pingpong", base.delays.pingpong_ms);
    dl->num("key_lookup", base.delays.key_lookup_ms);
    dl->finish();
    for (double v : {base.delays.signature_ms, base.delays.classical_ids_ms, base.delays.qca_issue_ms,
                     base.delays.qca_verify_ms, base.delays.pingpong_ms, base.delays.key_lookup_ms})
      require(v >= 0.0, dl->path("*"), "delays must be >= 0");
  }

  std::string cell;
  r.str("ablation", cell);
  if (!cell.empty()) {
    ablation = threat::parse_ablation(cell);
    require(ablation.has_value(), r.path("ablation"), "unknown ablation cell '" + cell + "'");
    base = threat::ablation_config(*ablation, base);
  }
  if (auto t = r.object("toggles")) read_toggles(*t, base.toggles);
  r.finish();
  d = base;
}

void read_detection(Reader r, DetectionConfig& d) {
  r.num("wls_interval_s", d.wls_interval_s);
  r.num("alpha", d.alpha);
  r.num("challenge_mean_interval_s", d.challenge_mean_interval_s);
  r.num("challenge_sigma_kw", d.challenge_sigma_kw);
  r.num("ewma_lambda", d.ewma_lambda);
  r.num("ewma_k_sigma", d.ewma_k_sigma);
  r.num("ewma_min_sigma", d.ewma_min_sigma);
  r.finish();
  require(d.wls_interval_s >= 0.0, r.path("wls_interval_s"), "must be >= 0");
  require(d.alpha > 0.0 && d.alpha < 1.0, r.path("alpha"), "must be in (0,1)");
  require(d.challenge_mean_interval_s >= 0.0, r.path("challenge_mean_interval_s"), "must be >= 0");
  require(d.challenge_sigma_kw >= 0.0, r.path("challenge_sigma_kw"), "must be >= 0");
  require(d.ewma_lambda > 0.0 && d.ewma_lambda <= 1.0, r.path("ewma_lambda"), "must be in (0,1]");
  require(d.ewma_k_sigma >= 0.0, r.path("ewma_k_sigma"), "must be >= 0");
  require(d.ewma_min_sigma >= 0.0, r.path("ewma_min_sigma"), "must be >= 0");
}

void read_calibration(Reader r, threat::AttackCalibration& c) {
  r.num("fdi_max_bias", c.fdi_max_bias);
  r.num("fdi_min_share", c.fdi_min_share);
  r.num("spoof_shed_tiers", c.spoof_shed_tiers);
  r.num("disturbance_qber_delta", c.disturbance_qber_delta);
  r.num("disturbance_fidelity_drop", c.disturbance_fidelity_drop);
  r.num("mitm_delay_ms", c.mitm_delay_ms);
  r.num("mitm_tamper_prob", c.mitm_tamper_prob);
  r.num("mitm_qber_delta", c.mitm_qber_delta);
  r.num("junk_fraction", c.junk_fraction);
  r.num("forged_allocation_fraction", c.forged_allocation_fraction);
  r.finish();
  require(c.fdi_max_bias >= 0.0, r.path("fdi_max_bias"), "must be >= 0");
  require(c.fdi_min_share >= 0.0 && c.fdi_min_share <= 1.0, r.path("fdi_min_share"), "must be in [0,1]");
  require(c.spoof_shed_tiers >= 0.0, r.path("spoof_shed_tiers"), "must be >= 0");
  require(c.mitm_tamper_prob >= 0.0 && c.mitm_tamper_prob <= 1.0, r.path("mitm_tamper_prob"), "must be in [0,1]");
  require(c.junk_fraction >= 0.0 && c.junk_fraction <= 1.0, r.path("junk_fraction"), "must be in [0,1]");
  require(c.forged_allocation_fraction >= 0.0 && c.forged_allocation_fraction <= 1.0,
          r.path("forged_allocation_fraction"), "must be in [0,1]");
}

std::vector<int> read_nodes(const json* arr, const std::string& path, int n_nodes, int min_id = 1) {
  std::vector<int> out;
  if (arr == nullptr) return out;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const auto& v = (*arr)[i];
    const std::string p = path + "[" + std::to_string(i) + "]";
    require(v.is_number_integer(), p, "expected a node id");
    const int id = v.get<int>();
    require(id >= min_id && id < n_nodes, p,
            min_id == 0 ? "must be a node id in [0, n_nodes)" : "must be a microgrid id in [1, n_nodes)");
    out.push_back(id);
  }
  return out;
}

threat::AttackPlan read_attack(Reader r, const ScenarioConfig& cfg) {
  threat::AttackPlan a;
  std::string kind = "FdiPlusSpoof";
  r.str("kind", kind);
  auto k = net::parse_attack_kind(kind);
  require(k.has_value(), r.path("kind"), "unknown attack kind '" + kind + "'");
  a.kind = *k;
  std::string intensity = "S3";
  r.str("intensity", intensity);
  auto in = threat::parse_intensity(intensity);
  require(in.has_value(), r.path("intensity"), "expected S1, S2 or S3");
  a.intensity = *in;
  if (const json* w = r.array("windows")) a.windows = read_windows(*w, r.path("windows"));
  if (auto s = r.object("spread")) {
    int count = 5;
    double length = 240.0;
    s->integer("count", count);
    s->num("length_s", length);
    s->finish();
    require(count >= 0, s->path("count"), "must be >= 0");
    require(length > 0.0 && count * length <= cfg.duration_s, s->path("length_s"), "windows do not fit the horizon");
    auto spread = threat::spread_windows(count, length, cfg.duration_s);
    a.windows.insert(a.windows.end(), spread.begin(), spread.end());
  }
  a.participants = read_nodes(r.array("participants"), r.path("participants"), cfg.n_nodes);
  a.victims = read_nodes(r.array("victims"), r.path("victims"), cfg.n_nodes);
  r.num("rate_msgs_per_s", a.rate_msgs_per_s);
  if (const json* l = r.array("target_link")) {
    auto ends = read_nodes(l, r.path("target_link"), cfg.n_nodes, 0);
    require(ends.size() == 2, r.path("target_link"), "expected two node ids");
    require(net::build_topology(cfg.topology, cfg.n_nodes).edge_index(ends[0], ends[1]) >= 0, r.path("target_link"),
            "not an edge of the topology");
    a.target_link = std::make_pair(ends[0], ends[1]);
  }
  r.finish();
  try {
    threat::validate(a, cfg.duration_s);
  } catch (const threat::InvalidWindows& e) {
    throw ValidationError(r.path("windows"), e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(r.path("participants"), e.what());
  }
  return a;
}

const std::set<std::string>& sweep_axes() {
  static const std::set<std::string> axes = {"n_nodes",     "topology",  "defense_tier", "ablation",
                                             "attack_kind", "intensity", "seed"};
  return axes;
}

void read_sweep(Reader r, ScenarioConfig& cfg) {
  SweepSpec spec;
  const json* axes = r.array("axes");
  require(axes != nullptr && !axes->empty(), r.path("axes"), "at least one axis required");
  for (std::size_t i = 0; i < axes->size(); ++i) {
    Reader a((*axes)[i], r.path("axes") + "[" + std::to_string(i) + "]");
    SweepAxis axis;
    a.str("axis", axis.axis);
    require(sweep_axes().count(axis.axis) > 0, a.path("axis"), "unknown sweep axis '" + axis.axis + "'");
    const json* values = a.array("values");
    require(values != nullptr && !values->empty(), a.path("values"), "values must be non-empty");
    for (const auto& v : *values) axis.values.push_back(v);
    a.finish();
    spec.axes.push_back(std::move(axis));
  }
  r.finish();
  cfg.sweep = std::move(spec);
}

void read_analytic(Reader r, AnalyticConfig& a) {
  r.str("curve", a.curve);
  require(a.curve == "swap" || a.curve == "distillation" || a.curve == "key_fraction", r.path("curve"),
          "expected swap, distillation or key_fraction");
  if (const json* q = r.array("qber_values")) {
    a.qber_values.clear();
    for (const auto& v : *q) {
      require(v.is_number(), r.path("qber_values"), "expected numbers");
      a.qber_values.push_back(v.get<double>());
      require(a.qber_values.back() >= 0.0 && a.qber_values.back() <= 0.5, r.path("qber_values"),
              "values must be in [0,0.5]");
    }
  }
  r.integer("max_hops", a.max_hops);
  r.integer("points", a.points);
  r.finish();
  require(a.max_hops >= 1, r.path("max_hops"), "must be >= 1");
  require(a.points >= 2, r.path("points"), "must be >= 2");
}

}  // namespace

ScenarioConfig from_json(const json& doc) {
  ScenarioConfig cfg;
  cfg.source = doc;
  Reader r(doc, "");
  r.integer("schema_version", cfg.schema_version);
  require(r.has("schema_version"), "schema_version", "missing");
  require(cfg.schema_version == kSchemaVersion, "schema_version",
          "unsupported version " + std::to_string(cfg.schema_version));
  r.str("name", cfg.name);
  r.str("mode", cfg.mode);
  require(cfg.mode == "simulate" || cfg.mode == "analytic", "mode", "expected simulate or analytic");
  r.integer("seed", cfg.seed);
  r.integer("seeds", cfg.seeds);
  require(cfg.seeds >= 1, "seeds", "must be >= 1");
  r.num("duration_s", cfg.duration_s);
  require(cfg.duration_s > 0.0, "duration_s", "must be > 0");
  r.num("physics_dt", cfg.physics_dt);
  require(cfg.physics_dt > 0.0 && cfg.physics_dt <= cfg.duration_s, "physics_dt", "must be in (0, duration_s]");
  r.num("time_budget_s", cfg.time_budget_s);
  require(cfg.time_budget_s > 0.0, "time_budget_s", "must be > 0");

  if (auto t = r.object("topology")) {
    std::string kind = net::to_string(cfg.topology);
    t->str("kind", kind);
    auto k = net::parse_topology(kind);
    require(k.has_value(), t->path("kind"), "expected star, ring, mesh or bridge");
    cfg.topology = *k;
    t->integer("n_nodes", cfg.n_nodes);
    t->finish();
    require(cfg.n_nodes >= 3, t->path("n_nodes"), "need at least 3 nodes");
  }
  if (auto p = r.object("physical")) read_physical(*p, cfg.physical);
  for (const auto& w : cfg.physical.islanding)
    require(w.end_s <= cfg.duration_s, "physical.islanding", "window beyond the horizon");
  if (auto c = r.object("control")) read_control(*c, cfg.control);
  if (auto l = r.object("links")) read_links(*l, cfg.links);
  if (auto q = r.object("quantum")) read_quantum(*q, cfg.quantum);
  if (auto d = r.object("defense")) {
    read_defense(*d, cfg.defense, cfg.ablation);
  } else {
    cfg.defense = threat::preset(threat::Tier::None);
  }
  if (auto d = r.object("detection")) read_detection(*d, cfg.detection);
  if (auto c = r.object("calibration")) read_calibration(*c, cfg.calibration);
  if (const json* attacks = r.array("attacks")) {
    for (std::size_t i = 0; i < attacks->size(); ++i) {
      cfg.attacks.push_back(read_attack(Reader((*attacks)[i], "attacks[" + std::to_string(i) + "]"), cfg));
    }
  }
  if (auto s = r.object("sweep")) read_sweep(*s, cfg);
  if (auto a = r.object("analytic")) read_analytic(*a, cfg.analytic);
  r.finish();
  return cfg;
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

ScenarioConfig parse_scenario(const std::filesystem::path& path) { return from_json(load_json(path)); }

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ValidationError(assignment, "override must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  // numeric segments index into existing arrays: attacks.0.intensity=S2
  auto step = [&](json& node, const std::string& seg, bool last) -> json& {
    if (node.is_array()) {
      std::size_t idx = 0;
      const auto [ptr, ec] = std::from_chars(seg.data(), seg.data() + seg.size(), idx);
      if (ec != std::errc{} || ptr != seg.data() + seg.size() || idx >= node.size()) {
        throw ValidationError(key, "'" + seg + "' is not a valid index");
      }
      return node[idx];
    }
    if (node.is_null()) node = json::object();
    if (!node.is_object()) throw ValidationError(key, "cannot descend into a scalar");
    json& next = node[seg];
    if (!last && next.is_null()) next = json::object();
    return next;
  };
  json* node = &doc;
  for (std::size_t i = 0; i < parts.size(); ++i) node = &step(*node, parts[i], i + 1 == parts.size());
  *node = value;
}

void apply_axis(json& doc, const std::string& axis, const json& value) {
  if (axis == "n_nodes") {
    doc["topology"]["n_nodes"] = value;
  } else if (axis == "topology") {
    doc["topology"]["kind"] = value;
  } else if (axis == "defense_tier") {
    doc["defense"]["tier"] = value;
  } else if (axis == "ablation") {
    doc["defense"]["ablation"] = value;
  } else if (axis == "attack_kind" || axis == "intensity") {
    const char* field = axis == "attack_kind" ? "kind" : "intensity";
    if (!doc.contains("attacks") || doc["attacks"].empty()) throw ValidationError("sweep", "axis needs an attack");
    for (auto& a : doc["attacks"]) a[field] = value;
  } else if (axis == "seed") {
    doc["seed"] = value;
  } else {
    throw ValidationError("sweep.axes", "unknown sweep axis '" + axis + "'");
  }
}

std::vector<SweepCell> expand_sweep(const ScenarioConfig& cfg) {
  json base = cfg.source;
  base.erase("sweep");
  std::vector<SweepCell> cells{SweepCell{"", {}, base}};
  if (!cfg.sweep) return cells;
  for (const auto& axis : cfg.sweep->axes) {
    std::vector<SweepCell> next;
    for (const auto& cell : cells) {
      for (const auto& v : axis.values) {
        SweepCell c = cell;
        apply_axis(c.doc, axis.axis, v);
        c.assignment.emplace_back(axis.axis, v);
        const std::string text = v.is_string() ? v.get<std::string>() : v.dump();
        c.label += (c.label.empty() ? "" : "__") + axis.axis + "-" + text;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  // surface invalid combinations before anything runs
  for (const auto& c : cells) {
    try {
      from_json(c.doc);
    } catch (const ValidationError& e) {
      throw ValidationError(e.key_path(), std::string("sweep cell ") + c.label + ": " + e.what());
    }
  }
  return cells;
}

}  // namespace quam::scenario
