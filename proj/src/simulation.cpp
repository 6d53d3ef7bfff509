#include "quam/simulation.hpp"

#include "quam/detection.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace quam::sim {

namespace {

using engine::EventKind;
using net::NodeId;

enum SendKind : std::int64_t { kTelemetry = 0, kAttackEmit = 1, kHeartbeat = 2 };

struct Node {
  physical::NodeState state;
  physical::WindModel wind;
  double scale = 1.0;
  double allocation_kw = 0.0;
  double allocation_expiry = 0.0;
  int latched_tiers = 0;
  double latch_until = 0.0;
  double generation_kw = 0.0;
  double demand_kw = 0.0;
};

struct View {
  bool have = false;
  double reported_generation_kw = 0.0;
  double reported_load_kw = 0.0;
  double true_generation_kw = 0.0;
  double true_load_kw = 0.0;
};

struct InFlight {
  net::Message msg;
  std::vector<NodeId> path;
  int key_bits = 0;
  std::string kak;
};

struct PlanState {
  threat::AttackPlan plan;
  std::vector<NodeId> victims;
  std::map<NodeId, double> share;  // per-victim FDI bias share
  bool active = false;
  double window_end = 0.0;
  int target_edge = -1;
};

bool has_fdi(net::AttackKind k) { return k == net::AttackKind::FDI || k == net::AttackKind::FdiPlusSpoof; }
bool has_spoof(net::AttackKind k) { return k == net::AttackKind::Spoofing || k == net::AttackKind::FdiPlusSpoof; }

class Simulation {
public:
  explicit Simulation(const scenario::ScenarioConfig& cfg)
      : cfg_(cfg),
        rng_(cfg.seed, engine::standard_stream_labels()),
        network_(net::build_topology(cfg.topology, cfg.n_nodes), cfg.links,
                 quantum::make_link(cfg.quantum.baseline_qber, cfg.quantum.base_keyrate_bps,
                                    cfg.quantum.initial_pool_bits, cfg.quantum.pool_capacity_bits)),
        qca_(engine::derive_seed(cfg.seed, "qca-secret"), cfg.quantum.token),
        qrng_(rng_.rng("qrng")) {
    const int n = cfg.n_nodes;
    for (auto& link : network_.quantum_links()) {
      link.ids.probe_interval_s = cfg.quantum.probe_interval_s;
      link.ids.probe_sample_size = cfg.quantum.probe_sample_size;
    }
    init_uplinks();
    auto& load_rng = rng_.rng("load");
    const auto& p = cfg.physical;
    nodes_.resize(static_cast<std::size_t>(n));
    for (NodeId v = 1; v < n; ++v) {
      auto& node = nodes_[v];
      node.state.generation = p.generation;
      node.state.battery = p.battery;
      node.state.load = p.load;
      node.state.frequency.inertia_h_s = p.inertia_h_s;
      node.state.frequency.droop_d = p.droop_d;
      node.wind = physical::WindModel(p.wind_alpha, p.wind_beta, p.wind_rho);
      node.scale = p.heterogeneity > 0.0 ? load_rng.uniform(1.0 - p.heterogeneity, 1.0 + p.heterogeneity) : 1.0;
      node.allocation_kw = p.import_cap_kw;
      node.allocation_expiry = cfg.control.setpoint_ttl_s;
    }
    views_.resize(static_cast<std::size_t>(n));
    for (NodeId v = 0; v < n; ++v) pipelines_.emplace_back(cfg.defense);
    tracker_.lambda = cfg.detection.ewma_lambda;
    tracker_.k_sigma = cfg.detection.ewma_k_sigma;
    tracker_.min_sigma = cfg.detection.ewma_min_sigma;
    layout_ = detection::build_measurement_layout(network_.topology(), cfg.control.telemetry_sigma_kw,
                                                  cfg.control.meter_sigma_kw);
    init_plans();
  }

  metrics::RunLog run() {
    schedule_initial();
    const double horizon = cfg_.duration_s;
    while (true) {
      auto next = queue_.next_time();
      if (!next || *next >= horizon) break;
      auto ev = queue_.pop();
      handle(*ev);
    }
    for (auto& [id, f] : inflight_) finalize(f, metrics::Outcome::Dropped, "horizon", 0.0, "");
    inflight_.clear();
    std::sort(log_.messages.begin(), log_.messages.end(),
              [](const metrics::MessageRecord& a, const metrics::MessageRecord& b) { return a.id < b.id; });
    log_.meta.n_nodes = cfg_.n_nodes;
    log_.meta.duration_s = cfg_.duration_s;
    log_.meta.physics_dt = cfg_.physics_dt;
    log_.meta.seed = cfg_.seed;
    std::set<NodeId> compromised;
    for (const auto& ps : plans_)
      if (has_fdi(ps.plan.kind)) compromised.insert(ps.victims.begin(), ps.victims.end());
    log_.meta.compromised.assign(compromised.begin(), compromised.end());
    return std::move(log_);
  }

private:
  // -------------------------------------------------------------------------
  // setup

  void init_uplinks() {
    const auto& topo = network_.topology();
    const auto dist = topo.distances(net::kController);
    uplink_.assign(static_cast<std::size_t>(topo.n_nodes()), -1);
    active_link_.assign(topo.edges().size(), false);
    for (NodeId v = 1; v < topo.n_nodes(); ++v) {
      NodeId parent = -1;
      for (NodeId u : topo.neighbors(v))
        if (dist[u] == dist[v] - 1 && (parent < 0 || u < parent)) parent = u;
      uplink_[v] = topo.edge_index(v, parent);
      active_link_[uplink_[v]] = true;
    }
  }

  void init_plans() {
    auto& attack = rng_.rng("attack");
    for (const auto& plan : cfg_.attacks) {
      PlanState ps;
      ps.plan = plan;
      ps.victims = plan.victims;
      if (ps.victims.empty()) {
        for (NodeId v = 1; v < cfg_.n_nodes; ++v)
          if (std::find(plan.participants.begin(), plan.participants.end(), v) == plan.participants.end())
            ps.victims.push_back(v);
      }
      if (ps.victims.empty()) ps.victims.push_back(1);
      const double lo = cfg_.calibration.fdi_min_share;
      for (NodeId v : ps.victims) ps.share[v] = lo + (1.0 - lo) * attack.uniform();
      if (plan.target_link) {
        ps.target_edge = network_.topology().edge_index(plan.target_link->first, plan.target_link->second);
      }
      if (ps.target_edge < 0) ps.target_edge = uplink_[ps.victims.front()];
      plans_.push_back(std::move(ps));
    }
  }

  void schedule(double t, EventKind kind, std::int64_t a = 0, std::int64_t b = 0, std::int64_t c = 0) {
    if (t >= cfg_.duration_s) return;
    queue_.schedule(engine::Event{t, kind, {a, b, c}, 0});
  }

  void schedule_initial() {
    const int n = cfg_.n_nodes;
    const int mg = n - 1;
    schedule(0.0, EventKind::PhysicsTick);
    schedule(cfg_.quantum.keypool_tick_s, EventKind::KeyPoolTick);
    const double ti = cfg_.control.telemetry_interval_s;
    for (NodeId v = 1; v < n; ++v) {
      schedule(ti * v / mg, EventKind::MessageSend, v, kTelemetry);
      if (cfg_.defense.toggles.pingpong_ids) {
        schedule(cfg_.quantum.probe_interval_s * v / mg, EventKind::IdsProbe, v);
      }
      if (cfg_.control.priority_heartbeat_s > 0.0) {
        schedule(cfg_.control.priority_heartbeat_s * v / mg, EventKind::MessageSend, v, kHeartbeat);
      }
    }
    for (std::size_t i = 0; i < plans_.size(); ++i) {
      for (const auto& ev : threat::schedule_attacks(plans_[i].plan, cfg_.duration_s, static_cast<int>(i))) {
        if (ev.time < cfg_.duration_s) queue_.schedule(ev);
      }
    }
    if (auto t = detection::schedule_challenge(rng_.rng("qrng"), cfg_.detection.challenge_mean_interval_s, 0.0)) {
      schedule(*t, EventKind::ChallengeIssue);
    }
  }

  // -------------------------------------------------------------------------
  // event dispatch

  void handle(const engine::Event& ev) {
    switch (ev.kind) {
      case EventKind::PhysicsTick: physics_tick(ev.time); break;
      case EventKind::MessageSend: on_send(ev); break;
      case EventKind::MessageArrival: on_arrival(ev); break;
      case EventKind::AttackWindowStart: window_start(ev); break;
      case EventKind::AttackWindowEnd: window_end(ev); break;
      case EventKind::IdsProbe: ids_probe(ev); break;
      case EventKind::KeyPoolTick: keypool_tick(ev.time); break;
      case EventKind::ChallengeIssue: challenge(ev.time); break;
    }
  }

  bool islanded(double t) const {
    for (const auto& w : cfg_.physical.islanding)
      if (t >= w.start_s && t < w.end_s) return true;
    return false;
  }

  bool any_attack_active() const {
    return std::any_of(plans_.begin(), plans_.end(), [](const PlanState& p) { return p.active; });
  }

  // -------------------------------------------------------------------------
  // physical layer

  void physics_tick(double t) {
    const double dt = cfg_.physics_dt;
    const auto& p = cfg_.physical;
    const bool island = islanded(t);
    metrics::TimeSeriesRow row;
    row.t = t;
    row.islanded = island;
    row.attack_active = any_attack_active();
    for (NodeId v = 1; v < cfg_.n_nodes; ++v) {
      auto& node = nodes_[v];
      physical::DispatchInputs gen;
      gen.solar_kw = physical::solar_output(t, p.generation.solar_peak_kw * node.scale, p.solar_window);
      gen.wind_kw = node.wind.next(p.generation.wind_capacity_kw * node.scale, rng_.rng("wind"));
      gen.smr_kw = p.generation.smr_rating_kw;
      node.state.load.base_kw = p.load.base_kw * node.scale;
      const double demand = physical::sample_load(node.state.load, rng_.rng("load"));

      if (node.latched_tiers > 0 && t >= node.latch_until) node.latched_tiers = 0;
      const auto tiers = node.state.load.tiers.size();
      node.state.commanded_shed.assign(tiers, false);
      for (std::size_t k = 0; k < tiers && static_cast<int>(k) < node.latched_tiers; ++k)
        node.state.commanded_shed[tiers - 1 - k] = true;

      const double allocation =
          t < node.allocation_expiry ? node.allocation_kw : cfg_.control.fallback_fraction * p.import_cap_kw;
      const double cap = std::min(p.import_cap_kw, std::max(0.0, allocation));
      const auto r = physical::dispatch(node.state, gen, demand, cap, island, dt);
      node.state.frequency = physical::step_frequency(node.state.frequency, (r.served_kw - r.demand_kw) / p.base_kw, dt);
      node.generation_kw = r.generation_kw;
      node.demand_kw = r.demand_kw;

      metrics::NodeSample s;
      s.generation_kw = r.generation_kw;
      s.demand_kw = r.demand_kw;
      s.served_kw = r.served_kw;
      s.shed_kw = r.shed_kw;
      s.import_kw = r.import_kw;
      s.soc_kwh = node.state.battery.soc_kwh;
      s.delta_f_hz = node.state.frequency.delta_f_hz;
      row.nodes.push_back(s);
      row.served_kw += r.served_kw;
      row.shed_kw += r.shed_kw;
      row.import_kw += r.import_kw;
      row.balance_error_kw = std::max(row.balance_error_kw, std::abs(r.balance_error()));
    }
    eens_kwh_ = physical::accumulate_eens(row.shed_kw, dt, eens_kwh_);
    row.eens_kwh = eens_kwh_;

    ++tick_;
    const auto wls_every = static_cast<long long>(std::llround(cfg_.detection.wls_interval_s / dt));
    if (wls_every > 0 && tick_ % wls_every == 0) run_wls(t, row);

    for (const auto& link : network_.quantum_links()) {
      row.links.push_back({link.qber(), static_cast<double>(link.key_pool_bits), link.fidelity, link.ids.alarm});
    }
    double generated = 0.0, consumed = 0.0;
    const auto& links = network_.quantum_links();
    for (std::size_t e = 0; e < links.size(); ++e) {
      if (!active_link_[e]) continue;
      generated += static_cast<double>(links[e].generated_total_bits);
      consumed += static_cast<double>(links[e].consumed_total_bits);
    }
    row.key_generated_bits = generated;
    row.key_consumed_bits = consumed;
    row.probes_total = probes_total_;
    log_.timeseries.push_back(std::move(row));
    schedule(t + dt, EventKind::PhysicsTick);
  }

  void run_wls(double t, metrics::TimeSeriesRow& row) {
    std::vector<detection::NodeReading> readings(static_cast<std::size_t>(cfg_.n_nodes));
    for (NodeId v = 1; v < cfg_.n_nodes; ++v) {
      const auto& view = views_[v];
      if (!view.have) return;
      readings[v] = {view.reported_generation_kw, view.reported_load_kw, view.true_generation_kw,
                     view.true_load_kw};
    }
    const auto m = detection::assemble_measurements(layout_, readings, t, rng_.rng("sensor"));
    const auto est = detection::wls_estimate(m, layout_.h);
    row.wls_run = true;
    row.wls_objective = est.objective;
    row.wls_dof = est.dof;
    row.wls_flag = detection::chi2_bad_data(est.objective, est.dof, cfg_.detection.alpha);
  }

  // -------------------------------------------------------------------------
  // quantum layer

  void keypool_tick(double t) {
    for (auto& link : network_.quantum_links()) {
      quantum::keypool_step(link, cfg_.quantum.keypool_tick_s);
      quantum::fidelity_update(link);
    }
    schedule(t + cfg_.quantum.keypool_tick_s, EventKind::KeyPoolTick);
  }

  void ids_probe(const engine::Event& ev) {
    const auto v = static_cast<NodeId>(ev.payload.a);
    quantum::pingpong_probe(network_.quantum_link(uplink_[v]), rng_.rng("probe"));
    ++probes_total_;
    schedule(ev.time + cfg_.quantum.probe_interval_s, EventKind::IdsProbe, v);
  }

  quantum::QuantumLink& pool_for(const net::Message& m) {
    const NodeId endpoint = m.src != net::kController ? m.src : m.dst;
    return network_.quantum_link(uplink_[endpoint]);
  }

  // -------------------------------------------------------------------------
  // sensor challenges

  double telemetry_noise() {
    const double s = cfg_.control.telemetry_sigma_kw;
    return std::clamp(rng_.rng("sensor").normal(0.0, s), -3.0 * s, 3.0 * s);
  }

  /// Bias fraction currently applied to node v's generation sensor.
  double fdi_bias(NodeId v) const {
    double bias = 0.0;
    for (const auto& ps : plans_) {
      if (!ps.active || !has_fdi(ps.plan.kind)) continue;
      auto it = ps.share.find(v);
      if (it == ps.share.end()) continue;
      bias = std::max(bias, threat::inject(ps.plan, cfg_.calibration, it->second).fdi_bias_fraction);
    }
    return bias;
  }

  void challenge(double t) {
    auto& qrng = rng_.rng("qrng");
    const NodeId v = detection::challenge_target(qrng, cfg_.n_nodes);
    const double expected = nodes_[v].generation_kw;
    const double s = cfg_.detection.challenge_sigma_kw;
    const double noise = std::clamp(rng_.rng("sensor").normal(0.0, s), -3.0 * s, 3.0 * s);
    const double reported = expected * (1.0 + fdi_bias(v)) + noise;
    auto [verdict, tracker] = detection::evaluate_challenge(reported, expected, tracker_);
    tracker_ = tracker;
    log_.challenges.push_back({v, t, expected, reported, std::abs(reported - expected), verdict});
    if (auto next = detection::schedule_challenge(qrng, cfg_.detection.challenge_mean_interval_s, t)) {
      schedule(*next, EventKind::ChallengeIssue);
    }
  }

  // -------------------------------------------------------------------------
  // attacks

  void window_start(const engine::Event& ev) {
    auto& ps = plans_[static_cast<std::size_t>(ev.payload.a)];
    const auto& w = ps.plan.windows;
    std::vector<threat::Window> sorted = w;
    std::sort(sorted.begin(), sorted.end(),
              [](const threat::Window& a, const threat::Window& b) { return a.start_s < b.start_s; });
    ps.active = true;
    ps.window_end = sorted[static_cast<std::size_t>(ev.payload.b)].end_s;
    const auto effect = threat::inject(ps.plan, cfg_.calibration);
    apply_channel(ps, effect, +1.0);
    if (threat::emits_messages(ps.plan.kind) && effect.rate_per_participant > 0.0) {
      for (NodeId p : ps.plan.participants) {
        schedule(ev.time + rng_.rng("attack").exponential(1.0 / effect.rate_per_participant), EventKind::MessageSend,
                 p, kAttackEmit, ev.payload.a);
      }
    }
  }

  void window_end(const engine::Event& ev) {
    auto& ps = plans_[static_cast<std::size_t>(ev.payload.a)];
    if (!ps.active) return;
    ps.active = false;
    apply_channel(ps, threat::inject(ps.plan, cfg_.calibration), -1.0);
  }

  void apply_channel(PlanState& ps, const threat::AttackEffect& e, double sign) {
    const auto kind = ps.plan.kind;
    if (kind != net::AttackKind::MITM && kind != net::AttackKind::ChannelDisturbance) return;
    auto& q = network_.quantum_link(ps.target_edge);
    q.attack_qber_delta = std::max(0.0, q.attack_qber_delta + sign * e.qber_delta);
    q.fidelity_depression = std::max(0.0, q.fidelity_depression + sign * e.fidelity_drop);
    quantum::fidelity_update(q);
    if (kind == net::AttackKind::MITM) {
      const auto& edge = network_.topology().edges()[static_cast<std::size_t>(ps.target_edge)];
      for (auto [a, b] : {std::pair{edge.a, edge.b}, std::pair{edge.b, edge.a}}) {
        auto& l = network_.link(a, b);
        l.extra_delay_ms = std::max(0.0, l.extra_delay_ms + sign * e.added_delay_ms);
      }
    }
  }

  void emit_attack(const engine::Event& ev) {
    const auto pi = static_cast<std::size_t>(ev.payload.c);
    auto& ps = plans_[pi];
    if (!ps.active || ev.time >= ps.window_end) return;
    const auto src = static_cast<NodeId>(ev.payload.a);
    const auto effect = threat::inject(ps.plan, cfg_.calibration);
    auto& attack = rng_.rng("attack");
    const NodeId victim = ps.victims[attack.index(ps.victims.size())];
    const auto kind = ps.plan.kind;

    net::Message m;
    m.src = src;
    m.claimed_identity = net::kController;
    m.dst = victim;
    m.malicious = true;
    m.attack_kind = kind;
    m.envelope = net::Envelope{false, std::nullopt, 0};
    if (kind == net::AttackKind::CoordinatedMultiNode || kind == net::AttackKind::KeyExhaustion) {
      const bool junk = kind == net::AttackKind::KeyExhaustion || attack.bernoulli(cfg_.calibration.junk_fraction);
      if (junk) {
        m.msg_class = net::MessageClass::ControlSetpoint;
        m.payload = net::SetpointPayload{0.0};
        m.well_formed = false;
      } else {
        m.msg_class = net::MessageClass::PriorityAction;
        m.payload = net::PriorityPayload{net::PriorityCommand::Shed, effect.shed_tiers};
      }
    } else if (has_spoof(kind)) {
      if (attack.bernoulli(0.5)) {
        m.msg_class = net::MessageClass::PriorityAction;
        m.payload = net::PriorityPayload{net::PriorityCommand::Shed, effect.shed_tiers};
      } else {
        m.msg_class = net::MessageClass::ControlSetpoint;
        m.payload = net::SetpointPayload{cfg_.calibration.forged_allocation_fraction * cfg_.physical.import_cap_kw};
      }
    } else {
      return;
    }
    if (src != victim) originate(std::move(m), ev.time);
    const double next = ev.time + attack.exponential(1.0 / effect.rate_per_participant);
    if (next < ps.window_end) schedule(next, EventKind::MessageSend, src, kAttackEmit, ev.payload.c);
  }

  // -------------------------------------------------------------------------
  // message origination

  void on_send(const engine::Event& ev) {
    switch (ev.payload.b) {
      case kTelemetry: send_telemetry(ev); break;
      case kAttackEmit: emit_attack(ev); break;
      case kHeartbeat: {
        const auto v = static_cast<NodeId>(ev.payload.a);
        send_priority(v, net::PriorityCommand::Restore, 0, ev.time);
        schedule(ev.time + cfg_.control.priority_heartbeat_s, EventKind::MessageSend, v, kHeartbeat);
        break;
      }
      default: break;
    }
  }

  void send_telemetry(const engine::Event& ev) {
    const auto v = static_cast<NodeId>(ev.payload.a);
    const auto& node = nodes_[v];
    net::TelemetryPayload tp;
    tp.true_generation_kw = node.generation_kw;
    tp.true_load_kw = node.demand_kw;
    tp.generation_kw = node.generation_kw + telemetry_noise();
    tp.load_kw = node.demand_kw + telemetry_noise();
    tp.soc_kwh = node.state.battery.soc_kwh;
    tp.delta_f_hz = node.state.frequency.delta_f_hz;
    tp.commanded_shed_tiers = node.latched_tiers;

    net::Message m;
    m.msg_class = net::MessageClass::Telemetry;
    m.src = v;
    m.claimed_identity = v;
    m.dst = net::kController;
    m.payload = tp;
    originate(std::move(m), ev.time);

    // forged copies ride right behind the genuine reading
    for (auto& ps : plans_) {
      if (!ps.active || !has_fdi(ps.plan.kind) || ps.plan.participants.empty()) continue;
      auto it = std::find(ps.victims.begin(), ps.victims.end(), v);
      if (it == ps.victims.end()) continue;
      const auto idx = static_cast<std::size_t>(it - ps.victims.begin());
      const NodeId attacker = ps.plan.participants[idx % ps.plan.participants.size()];
      if (attacker == v) continue;
      const auto effect = threat::inject(ps.plan, cfg_.calibration, ps.share[v]);
      net::TelemetryPayload forged = tp;
      forged.generation_kw = tp.generation_kw * (1.0 + effect.fdi_bias_fraction);
      forged.commanded_shed_tiers = 0;
      net::Message f;
      f.msg_class = net::MessageClass::Telemetry;
      f.src = attacker;
      f.claimed_identity = v;
      f.dst = net::kController;
      f.payload = forged;
      f.malicious = true;
      f.attack_kind = ps.plan.kind;
      f.envelope = net::Envelope{false, std::nullopt, 0};
      originate(std::move(f), ev.time + 0.001);
    }
    schedule(ev.time + cfg_.control.telemetry_interval_s, EventKind::MessageSend, v, kTelemetry);
  }

  void send_setpoint(NodeId v, double allocation_kw, double t) {
    net::Message m;
    m.msg_class = net::MessageClass::ControlSetpoint;
    m.src = net::kController;
    m.claimed_identity = net::kController;
    m.dst = v;
    m.payload = net::SetpointPayload{allocation_kw};
    originate(std::move(m), t);
  }

  void send_priority(NodeId v, net::PriorityCommand cmd, int tiers, double t) {
    net::Message m;
    m.msg_class = net::MessageClass::PriorityAction;
    m.src = net::kController;
    m.claimed_identity = net::kController;
    m.dst = v;
    m.payload = net::PriorityPayload{cmd, tiers};
    originate(std::move(m), t);
  }

  /// Routes, secures and launches a message created at `t`.
  void originate(net::Message m, double t) {
    if (t >= cfg_.duration_s) return;
    m.id = next_id_++;
    m.created_at = t;
    m.size_bits = net::default_size_bits(m.msg_class);
    if (!m.malicious) m.envelope = net::Envelope{true, std::nullopt, 0};

    InFlight f;
    f.path = net::route(network_.topology(), m.src, m.dst, rng_.rng("routing"));
    const int hops = static_cast<int>(f.path.size()) - 1;
    const auto& tg = cfg_.defense.toggles;
    double sender_ms = 0.0;

    if (!m.malicious && (tg.qca_token || tg.qkd_encryption)) {
      auto& pool = pool_for(m);
      const auto& costs = cfg_.quantum.token;
      const std::int64_t need = (tg.qca_token ? costs.issue_bits() : 0) +
                                (tg.qkd_encryption ? costs.message_bits(hops) - costs.issue_bits() : 0);
      f.msg = m;
      if (pool.key_pool_bits < need) {
        finalize(f, metrics::Outcome::Rejected, "token_issue", 0.0, "");
        return;
      }
      if (tg.qca_token) {
        m.envelope->nonce = qrng_.nonce();
        m.envelope->token = qca_.issue(m.claimed_identity, m.dst, t, pool, qrng_, net::payload_digest(m));
        sender_ms += cfg_.defense.delays.qca_issue_ms;
      }
      if (tg.qkd_encryption) quantum::consume_key(pool, costs.message_bits(hops) - costs.issue_bits());
      f.key_bits = static_cast<int>(need);
    }
    if (!m.malicious && tg.qkd_encryption && m.msg_class == net::MessageClass::PriorityAction) {
      double rtt_ms = 0.0;
      for (int k = 0; k < hops; ++k) rtt_ms += 2.0 * network_.link(f.path[k], f.path[k + 1]).params.latency_ms;
      const auto kak = quantum::kak_three_stage_send(rtt_ms, cfg_.quantum.kak_stage_fail_prob, rng_.rng("kak"));
      f.kak = kak.success ? "success" : (kak.retry_success ? "retry" : "fallback");
      sender_ms += kak.added_latency_ms;
    }
    f.msg = std::move(m);
    const std::uint64_t id = f.msg.id;
    inflight_.emplace(id, std::move(f));
    queue_.schedule(engine::Event{t + sender_ms / 1000.0, EventKind::MessageArrival,
                                  {static_cast<std::int64_t>(id), 0, 0}, 0});
  }

  // -------------------------------------------------------------------------
  // transport and verification

  void on_arrival(const engine::Event& ev) {
    auto it = inflight_.find(static_cast<std::uint64_t>(ev.payload.a));
    if (it == inflight_.end()) return;
    auto& f = it->second;
    const auto k = static_cast<std::size_t>(ev.payload.b);
    if (k + 1 == f.path.size()) {
      deliver(f, ev.time);
      inflight_.erase(it);
      return;
    }
    const NodeId from = f.path[k];
    const NodeId to = f.path[k + 1];
    mitm_tamper(f.msg, from, to);
    auto out = net::transmit(network_.link(from, to), f.msg, ev.time, rng_.rng("channel"));
    if (!out.delivered) {
      finalize(f, metrics::Outcome::Dropped, net::to_string(out.reason), 0.0, "");
      inflight_.erase(it);
      return;
    }
    queue_.schedule(engine::Event{out.arrival_time, EventKind::MessageArrival,
                                  {ev.payload.a, static_cast<std::int64_t>(k + 1), 0}, 0});
  }

  void mitm_tamper(net::Message& m, NodeId from, NodeId to) {
    if (m.malicious) return;
    const int edge = network_.topology().edge_index(from, to);
    for (const auto& ps : plans_) {
      if (!ps.active || ps.plan.kind != net::AttackKind::MITM || ps.target_edge != edge) continue;
      const auto effect = threat::inject(ps.plan, cfg_.calibration);
      if (m.tampered || !rng_.rng("attack").bernoulli(effect.tamper_prob)) continue;
      m.tampered = true;
      if (auto* sp = std::get_if<net::SetpointPayload>(&m.payload)) {
        sp->import_allocation_kw *= cfg_.calibration.forged_allocation_fraction;
      } else if (auto* tp = std::get_if<net::TelemetryPayload>(&m.payload)) {
        tp->generation_kw *= 1.0 + cfg_.calibration.fdi_max_bias * threat::intensity_scale(ps.plan.intensity);
      }
    }
  }

  std::set<NodeId> suspects_for(const net::Message& m) {
    std::vector<threat::TelemetryReport> reports;
    const auto* tp = std::get_if<net::TelemetryPayload>(&m.payload);
    for (NodeId v = 1; v < cfg_.n_nodes; ++v) {
      const auto& view = views_[v];
      threat::TelemetryReport r;
      r.node = v;
      if (v == m.claimed_identity && tp != nullptr) {
        r.generation_kw = tp->generation_kw;
        r.load_kw = tp->load_kw;
        r.metered_net_kw = tp->true_generation_kw - tp->true_load_kw;
      } else if (view.have) {
        r.generation_kw = view.reported_generation_kw;
        r.load_kw = view.reported_load_kw;
        r.metered_net_kw = view.true_generation_kw - view.true_load_kw;
      } else {
        continue;
      }
      reports.push_back(r);
    }
    return threat::consistency_check(reports, cfg_.control.consistency_tolerance_kw);
  }

  void deliver(InFlight& f, double t) {
    const auto& m = f.msg;
    const NodeId verifier = m.dst;
    const auto& tg = cfg_.defense.toggles;

    if (m.attack_kind == net::AttackKind::KeyExhaustion && tg.qkd_encryption && verifier != net::kController) {
      // the receiver spends key material decrypting before it can reject
      quantum::consume_key(network_.quantum_link(uplink_[verifier]), cfg_.quantum.token.encryption_bits);
    }

    bool alarmed = false;
    for (std::size_t k = 0; k + 1 < f.path.size(); ++k) {
      const int e = network_.topology().edge_index(f.path[k], f.path[k + 1]);
      if (network_.quantum_link(e).ids.alarm) alarmed = true;
    }
    std::set<NodeId> suspects;
    threat::PipelineContext ctx;
    ctx.qca = &qca_;
    ctx.stream = &rng_.rng("defense");
    ctx.path_alarmed = alarmed;
    const double sigma = cfg_.control.plausibility_sigma_kw;
    ctx.predict = [this, sigma](const net::Message& msg) {
      const NodeId v = msg.claimed_identity;
      const double value = v > 0 && v < cfg_.n_nodes ? nodes_[v].generation_kw : 0.0;
      return threat::Prediction{value, sigma};
    };
    if (tg.consistency && m.msg_class == net::MessageClass::Telemetry && verifier == net::kController) {
      suspects = suspects_for(m);
      ctx.suspects = &suspects;
    }
    const auto verdict = pipelines_[verifier].process(m, t, ctx);
    const std::string token = verdict.token_status ? quantum::to_string(*verdict.token_status) : "";
    if (!verdict.accepted) {
      finalize(f, metrics::Outcome::Rejected, threat::to_string(*verdict.rejecting_stage), 0.0, token);
      return;
    }
    const double latency_ms = (t - m.created_at) * 1000.0 + verdict.processing_delay_ms + cfg_.control.endpoint_stack_ms;
    finalize(f, metrics::Outcome::Accepted, "", latency_ms, token);
    if (m.well_formed) apply(m, t);
  }

  void apply(const net::Message& m, double t) {
    const auto& c = cfg_.control;
    if (m.dst == net::kController) {
      const auto* tp = std::get_if<net::TelemetryPayload>(&m.payload);
      if (tp == nullptr) return;
      const NodeId v = m.claimed_identity;
      auto& view = views_[v];
      view.have = true;
      view.reported_generation_kw = tp->generation_kw;
      view.reported_load_kw = tp->load_kw;
      view.true_generation_kw = tp->true_generation_kw;
      view.true_load_kw = tp->true_load_kw;
      const double deficit = tp->load_kw - tp->generation_kw;
      send_setpoint(v, std::clamp(deficit + c.allocation_margin_kw, 0.0, cfg_.physical.import_cap_kw), t);
      if (tp->commanded_shed_tiers > 0) send_priority(v, net::PriorityCommand::Restore, 0, t);
      return;
    }
    auto& node = nodes_[m.dst];
    if (const auto* sp = std::get_if<net::SetpointPayload>(&m.payload)) {
      node.allocation_kw = sp->import_allocation_kw;
      node.allocation_expiry = t + c.setpoint_ttl_s;
    } else if (const auto* pp = std::get_if<net::PriorityPayload>(&m.payload)) {
      if (pp->command == net::PriorityCommand::Shed && pp->tiers > 0) {
        node.latched_tiers = std::max(node.latched_tiers, pp->tiers);
        node.latch_until = t + c.shed_hold_s;
      } else if (pp->command == net::PriorityCommand::Restore) {
        node.latched_tiers = 0;
      }
    }
  }

  void finalize(const InFlight& f, metrics::Outcome outcome, const std::string& reason, double latency_ms,
                const std::string& token_status) {
    const auto& m = f.msg;
    metrics::MessageRecord r;
    r.id = m.id;
    r.created_at = m.created_at;
    r.msg_class = net::to_string(m.msg_class);
    r.src = m.src;
    r.claimed = m.claimed_identity;
    r.dst = m.dst;
    r.malicious = m.malicious;
    r.attack_kind = m.attack_kind ? net::to_string(*m.attack_kind) : "";
    r.well_formed = m.well_formed;
    r.outcome = outcome;
    r.reason = reason;
    r.token_status = token_status;
    r.hops = static_cast<int>(f.path.size()) - 1;
    r.latency_ms = latency_ms;
    r.key_bits = f.key_bits;
    r.kak = f.kak;
    log_.messages.push_back(std::move(r));
  }

  const scenario::ScenarioConfig& cfg_;
  engine::RngRegistry rng_;
  engine::EventQueue queue_;
  net::Network network_;
  quantum::QcaAuthority qca_;
  quantum::Qrng qrng_;
  std::vector<Node> nodes_;
  std::vector<View> views_;
  std::vector<threat::Pipeline> pipelines_;
  std::vector<int> uplink_;
  std::vector<bool> active_link_;
  std::vector<PlanState> plans_;
  std::map<std::uint64_t, InFlight> inflight_;
  detection::EwmaTracker tracker_;
  detection::MeasurementLayout layout_;
  metrics::RunLog log_;
  std::uint64_t next_id_ = 1;
  std::uint64_t probes_total_ = 0;
  long long tick_ = 0;
  double eens_kwh_ = 0.0;
};

}  // namespace

metrics::RunLog simulate(const scenario::ScenarioConfig& cfg) { return Simulation(cfg).run(); }

metrics::RunSummary run(const scenario::ScenarioConfig& cfg) { return metrics::summarize(simulate(cfg)); }

}  // namespace quam::sim
