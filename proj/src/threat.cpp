#include "quam/threat.hpp"

#include <algorithm>
#include <cmath>

namespace quam::threat {

const char* to_string(Intensity i) {
  switch (i) {
    case Intensity::S1: return "S1";
    case Intensity::S2: return "S2";
    case Intensity::S3: return "S3";
  }
  return "?";
}

std::optional<Intensity> parse_intensity(const std::string& s) {
  if (s == "S1") return Intensity::S1;
  if (s == "S2") return Intensity::S2;
  if (s == "S3") return Intensity::S3;
  return std::nullopt;
}

double intensity_scale(Intensity i) {
  switch (i) {
    case Intensity::S1: return 0.2;
    case Intensity::S2: return 0.6;
    case Intensity::S3: return 1.0;
  }
  return 1.0;
}

bool emits_messages(AttackKind k) {
  switch (k) {
    case AttackKind::FDI:
    case AttackKind::Spoofing:
    case AttackKind::CoordinatedMultiNode:
    case AttackKind::KeyExhaustion:
    case AttackKind::FdiPlusSpoof: return true;
    case AttackKind::MITM:
    case AttackKind::ChannelDisturbance: return false;
  }
  return false;
}

void validate(const AttackPlan& plan, double horizon_s) {
  auto windows = plan.windows;
  std::sort(windows.begin(), windows.end(), [](const Window& a, const Window& b) { return a.start_s < b.start_s; });
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    if (!(w.start_s >= 0.0 && w.end_s > w.start_s && w.end_s <= horizon_s)) {
      throw InvalidWindows("attack window [" + std::to_string(w.start_s) + ", " + std::to_string(w.end_s) +
                           "] outside horizon or inverted");
    }
    if (i > 0 && w.start_s < windows[i - 1].end_s) throw InvalidWindows("attack windows overlap");
  }
  if (emits_messages(plan.kind) && plan.participants.empty()) {
    throw std::invalid_argument(std::string("attack ") + net::to_string(plan.kind) + " needs participants");
  }
  if (plan.rate_msgs_per_s < 0.0) throw std::invalid_argument("attack rate must be >= 0");
}

std::vector<Window> spread_windows(int count, double length_s, double horizon_s) {
  std::vector<Window> out;
  if (count <= 0) return out;
  const double slot = horizon_s / count;
  for (int i = 0; i < count; ++i) {
    const double start = i * slot + (slot - length_s) / 2.0;
    out.push_back({start, start + length_s});
  }
  return out;
}

std::vector<engine::Event> schedule_attacks(const AttackPlan& plan, double horizon_s, int plan_index) {
  validate(plan, horizon_s);
  auto windows = plan.windows;
  std::sort(windows.begin(), windows.end(), [](const Window& a, const Window& b) { return a.start_s < b.start_s; });
  std::vector<engine::Event> events;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    engine::Event start{windows[i].start_s, engine::EventKind::AttackWindowStart, {plan_index, static_cast<int>(i), 0}, 0};
    engine::Event end{windows[i].end_s, engine::EventKind::AttackWindowEnd, {plan_index, static_cast<int>(i), 0}, 0};
    events.push_back(start);
    events.push_back(end);
  }
  return events;
}

double coordinated_rate(double total_rate, std::size_t participants) {
  return participants == 0 ? 0.0 : total_rate / static_cast<double>(participants);
}

AttackEffect inject(const AttackPlan& plan, const AttackCalibration& cal, double sensor_share) {
  const double s = intensity_scale(plan.intensity);
  const auto k = std::max<std::size_t>(1, plan.participants.size());
  AttackEffect e;
  switch (plan.kind) {
    case AttackKind::FDI:
      e.rate_per_participant = s * plan.rate_msgs_per_s;
      e.fdi_bias_fraction = s * cal.fdi_max_bias * std::clamp(sensor_share, 0.0, 1.0);
      break;
    case AttackKind::Spoofing:
      e.rate_per_participant = s * plan.rate_msgs_per_s;
      e.shed_tiers = std::max(1, static_cast<int>(std::lround(s * cal.spoof_shed_tiers)));
      break;
    case AttackKind::FdiPlusSpoof:
      e.rate_per_participant = s * plan.rate_msgs_per_s;
      e.fdi_bias_fraction = s * cal.fdi_max_bias * std::clamp(sensor_share, 0.0, 1.0);
      e.shed_tiers = std::max(1, static_cast<int>(std::lround(s * cal.spoof_shed_tiers)));
      break;
    case AttackKind::CoordinatedMultiNode:
      e.rate_per_participant = coordinated_rate(s * plan.rate_msgs_per_s, k);
      e.shed_tiers = std::max(1, static_cast<int>(std::lround(s * cal.spoof_shed_tiers)));
      break;
    case AttackKind::KeyExhaustion:
      e.rate_per_participant = s * plan.rate_msgs_per_s;
      break;
    case AttackKind::MITM:
      e.added_delay_ms = s * cal.mitm_delay_ms;
      e.tamper_prob = s * cal.mitm_tamper_prob;
      e.qber_delta = s * cal.mitm_qber_delta;
      break;
    case AttackKind::ChannelDisturbance:
      e.qber_delta = s * cal.disturbance_qber_delta;
      e.fidelity_drop = s * cal.disturbance_fidelity_drop;
      break;
  }
  return e;
}

const char* to_string(Tier t) {
  switch (t) {
    case Tier::None: return "none";
    case Tier::Classical: return "classical";
    case Tier::Quantum: return "quantum";
  }
  return "?";
}

std::optional<Tier> parse_tier(const std::string& s) {
  if (s == "none") return Tier::None;
  if (s == "classical") return Tier::Classical;
  if (s == "quantum") return Tier::Quantum;
  return std::nullopt;
}

const char* to_string(Stage s) {
  switch (s) {
    case Stage::Acl: return "acl";
    case Stage::Quarantine: return "quarantine";
    case Stage::RateLimit: return "rate_limit";
    case Stage::Signature: return "signature";
    case Stage::QcaToken: return "qca_token";
    case Stage::PingPong: return "pingpong_ids";
    case Stage::Plausibility: return "plausibility";
    case Stage::Consistency: return "consistency";
  }
  return "?";
}

StageToggles preset_toggles(Tier tier) {
  StageToggles t;
  if (tier == Tier::None) return t;
  t.acl = t.rate_limit = t.signature = t.plausibility = t.consistency = t.quarantine = t.classical_ids = true;
  if (tier == Tier::Quantum) t.qca_token = t.pingpong_ids = t.qkd_encryption = true;
  return t;
}

DefenseConfig preset(Tier tier) {
  DefenseConfig c;
  c.tier = tier;
  c.toggles = preset_toggles(tier);
  return c;
}

const std::vector<AblationCell>& ablation_order() {
  static const std::vector<AblationCell> order = {
      AblationCell::NoDefense,     AblationCell::RateLimitOnly,  AblationCell::RateLimitSignature,
      AblationCell::FullClassical, AblationCell::QuantumNoToken, AblationCell::FullQuantum,
  };
  return order;
}

const char* to_string(AblationCell c) {
  switch (c) {
    case AblationCell::NoDefense: return "no_defense";
    case AblationCell::RateLimitOnly: return "rate_limit_only";
    case AblationCell::RateLimitSignature: return "rate_limit_signature";
    case AblationCell::FullClassical: return "full_classical";
    case AblationCell::QuantumNoToken: return "quantum_no_token";
    case AblationCell::FullQuantum: return "full_quantum";
  }
  return "?";
}

std::optional<AblationCell> parse_ablation(const std::string& s) {
  for (auto c : ablation_order())
    if (s == to_string(c)) return c;
  return std::nullopt;
}

DefenseConfig ablation_config(AblationCell cell, const DefenseConfig& base) {
  DefenseConfig c = base;
  switch (cell) {
    case AblationCell::NoDefense:
      c.tier = Tier::None;
      c.toggles = preset_toggles(Tier::None);
      break;
    case AblationCell::RateLimitOnly:
      c.tier = Tier::Classical;
      c.toggles = {};
      c.toggles.rate_limit = true;
      break;
    case AblationCell::RateLimitSignature:
      c.tier = Tier::Classical;
      c.toggles = {};
      c.toggles.rate_limit = c.toggles.signature = true;
      break;
    case AblationCell::FullClassical:
      c.tier = Tier::Classical;
      c.toggles = preset_toggles(Tier::Classical);
      break;
    case AblationCell::QuantumNoToken:
      c.tier = Tier::Quantum;
      c.toggles = preset_toggles(Tier::Quantum);
      c.toggles.qca_token = false;
      break;
    case AblationCell::FullQuantum:
      c.tier = Tier::Quantum;
      c.toggles = preset_toggles(Tier::Quantum);
      break;
  }
  return c;
}

RateLimiter::RateLimiter(double limit_per_s, double burst) : limit_(limit_per_s), burst_(burst) {
  if (!(limit_per_s > 0.0)) throw std::invalid_argument("rate limit must be > 0");
  if (!(burst >= 1.0)) throw std::invalid_argument("rate limit burst must be >= 1");
}

bool RateLimiter::check(NodeId key, double t_now) {
  auto [it, fresh] = buckets_.try_emplace(key, Bucket{burst_, t_now});
  auto& b = it->second;
  if (!fresh) {
    b.tokens = std::min(burst_, b.tokens + (t_now - b.last) * limit_);
    b.last = t_now;
  }
  if (b.tokens >= 1.0) {
    b.tokens -= 1.0;
    return true;
  }
  return false;
}

bool rate_limit_check(RateLimiter& state, NodeId src, double t_now) { return state.check(src, t_now); }

bool plausibility_check(double reported, const Prediction& predicted, double k_sigma) {
  return std::abs(reported - predicted.value) <= k_sigma * predicted.sigma;
}

std::set<NodeId> consistency_check(const std::vector<TelemetryReport>& recent, double tolerance_kw) {
  std::set<NodeId> suspects;
  double imbalance = 0.0;
  for (const auto& r : recent) imbalance += (r.generation_kw - r.load_kw) - r.metered_net_kw;
  if (std::abs(imbalance) <= tolerance_kw) return suspects;
  for (const auto& r : recent) {
    const double residual = (r.generation_kw - r.load_kw) - r.metered_net_kw;
    // only residuals pushing in the direction of the imbalance explain it
    if (std::abs(residual) > tolerance_kw && residual * imbalance > 0.0) suspects.insert(r.node);
  }
  return suspects;
}

void Quarantine::record_rejection(NodeId source, double t_now) {
  auto& hist = rejections_[source];
  hist.push_back(t_now);
  while (!hist.empty() && hist.front() < t_now - window_s_) hist.pop_front();
  if (static_cast<int>(hist.size()) > threshold_ && !quarantined(source, t_now)) {
    until_[source] = t_now + duration_s_;
    hist.clear();
    ++entered_;
  }
}

bool Quarantine::quarantined(NodeId source, double t_now) const {
  auto it = until_.find(source);
  return it != until_.end() && t_now < it->second;
}

Quarantine& quarantine_update(Quarantine& q, const Verdict& verdict, NodeId source, double t_now) {
  if (!verdict.accepted && verdict.rejecting_stage != Stage::Quarantine) q.record_rejection(source, t_now);
  return q;
}

Pipeline::Pipeline(const DefenseConfig& cfg)
    : cfg_(cfg),
      limiter_(cfg.rate_limit_msgs_per_s, cfg.rate_limit_burst),
      quarantine_(cfg.quarantine_threshold, cfg.quarantine_window_s, cfg.quarantine_duration_s) {}

namespace {

NodeId quarantine_key(const DefenseConfig& cfg, const net::Message& msg) {
  // the classical IDS attributes traffic to its true origin; without it only
  // the (spoofable) claimed identity is available
  return cfg.toggles.classical_ids ? msg.src : msg.claimed_identity;
}

bool role_allowed(const net::Message& msg) {
  if (msg.msg_class == net::MessageClass::Telemetry) {
    return msg.claimed_identity != net::kController && msg.dst == net::kController;
  }
  return msg.claimed_identity == net::kController && msg.dst != net::kController;
}

}  // namespace

bool Pipeline::evaluate(Stage s, const net::Message& msg, double t_now, PipelineContext& ctx, Verdict& v) {
  ++evaluations_[static_cast<std::size_t>(s)];
  const auto& d = cfg_.delays;
  switch (s) {
    case Stage::Acl: return role_allowed(msg);
    case Stage::Quarantine: return !quarantine_.quarantined(quarantine_key(cfg_, msg), t_now);
    case Stage::RateLimit: return limiter_.check(quarantine_key(cfg_, msg), t_now);
    case Stage::Signature: {
      v.processing_delay_ms += d.signature_ms;
      const bool genuine = msg.envelope && msg.envelope->signed_genuine;
      if (genuine && !msg.tampered) return true;
      if (msg.tampered && cfg_.toggles.qkd_encryption) return false;  // authenticated encryption
      return ctx.stream != nullptr && ctx.stream->bernoulli(cfg_.forge_success_prob);
    }
    case Stage::QcaToken: {
      v.processing_delay_ms += d.qca_verify_ms;
      if (!msg.envelope || !msg.envelope->token || ctx.qca == nullptr) {
        v.token_status = quantum::VerifyStatus::NoKey;
        return false;
      }
      v.token_status = ctx.qca->verify(*msg.envelope->token, msg.claimed_identity, msg.dst, t_now,
                                       net::payload_digest(msg));
      return *v.token_status == quantum::VerifyStatus::Valid;
    }
    case Stage::PingPong:
      v.processing_delay_ms += d.pingpong_ms;
      return !(ctx.path_alarmed && msg.tampered);
    case Stage::Plausibility: {
      const auto* tm = std::get_if<net::TelemetryPayload>(&msg.payload);
      if (tm == nullptr || !ctx.predict) return true;
      return plausibility_check(tm->generation_kw, ctx.predict(msg), cfg_.plausibility_k);
    }
    case Stage::Consistency:
      if (msg.msg_class != net::MessageClass::Telemetry || ctx.suspects == nullptr) return true;
      return ctx.suspects->count(msg.claimed_identity) == 0;
  }
  return true;
}

Verdict Pipeline::process(const net::Message& msg, double t_now, PipelineContext& ctx) {
  Verdict v;
  v.msg_id = msg.id;
  const auto& t = cfg_.toggles;
  if (t.classical_ids) v.processing_delay_ms += cfg_.delays.classical_ids_ms;
  if (t.qkd_encryption) v.processing_delay_ms += cfg_.delays.key_lookup_ms;
  const std::pair<Stage, bool> order[] = {
      {Stage::Acl, t.acl},
      {Stage::Quarantine, t.quarantine},
      {Stage::RateLimit, t.rate_limit},
      {Stage::Signature, t.signature},
      {Stage::QcaToken, t.qca_token},
      {Stage::PingPong, t.pingpong_ids},
      {Stage::Plausibility, t.plausibility},
      {Stage::Consistency, t.consistency},
  };
  for (auto [stage, enabled] : order) {
    if (!enabled) continue;
    if (!evaluate(stage, msg, t_now, ctx, v)) {
      v.accepted = false;
      v.rejecting_stage = stage;
      break;
    }
  }
  if (t.quarantine) quarantine_update(quarantine_, v, quarantine_key(cfg_, msg), t_now);
  return v;
}

Verdict pipeline_process(Pipeline& pipeline, const net::Message& msg, double t_now, PipelineContext& ctx) {
  return pipeline.process(msg, t_now, ctx);
}

double verifier_delay_ms(const DefenseConfig& cfg) {
  const auto& t = cfg.toggles;
  const auto& d = cfg.delays;
  double ms = 0.0;
  if (t.classical_ids) ms += d.classical_ids_ms;
  if (t.qkd_encryption) ms += d.key_lookup_ms;
  if (t.signature) ms += d.signature_ms;
  if (t.qca_token) ms += d.qca_verify_ms;
  if (t.pingpong_ids) ms += d.pingpong_ms;
  return ms;
}

double sender_delay_ms(const DefenseConfig& cfg) { return cfg.toggles.qca_token ? cfg.delays.qca_issue_ms : 0.0; }

}  // namespace quam::threat
