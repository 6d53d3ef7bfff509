#include "quam/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace quam::quantum {

double binary_entropy(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("binary_entropy: q outside [0,1]: " + std::to_string(q));
  if (q == 0.0 || q == 1.0) return 0.0;
  return -q * std::log2(q) - (1.0 - q) * std::log2(1.0 - q);
}

double secret_key_fraction(double q, Protocol /*protocol*/) {
  if (!(q >= 0.0 && q <= 0.5)) throw DomainError("secret_key_fraction: q outside [0,0.5]: " + std::to_string(q));
  if (q >= kAbortQber) return 0.0;
  return std::max(0.0, 1.0 - 2.0 * binary_entropy(q));
}

DistillationResult distill_bbpssw(double fidelity) {
  if (!(fidelity > 0.5 && fidelity <= 1.0)) {
    throw DomainError("distill_bbpssw: fidelity must be in (0.5, 1]: " + std::to_string(fidelity));
  }
  const double f = fidelity;
  const double g = (1.0 - f) / 3.0;
  const double d = f * f + (2.0 / 3.0) * f * (1.0 - f) + 5.0 * g * g;
  return {(f * f + g * g) / d, d};
}

double swap_chain_qber(double q_hop, int hops) {
  if (!(q_hop >= 0.0 && q_hop <= 0.5)) throw DomainError("swap_chain_qber: q_hop outside [0,0.5]");
  if (hops < 1) throw DomainError("swap_chain_qber: hops must be >= 1");
  return std::min(0.5, hops * q_hop);
}

double key_rate_factor(double q_hop, int hops, double swap_efficiency) {
  const double chain = swap_chain_qber(q_hop, hops);
  const double single = secret_key_fraction(q_hop);
  if (single <= 0.0) return 0.0;
  const double factor = std::pow(swap_efficiency, hops - 1) * secret_key_fraction(chain) / single;
  return std::clamp(factor, 0.0, 1.0);
}

double QuantumLink::qber() const { return std::clamp(baseline_qber + attack_qber_delta, 0.0, 0.5); }

QuantumLink make_link(double baseline_qber, double keyrate_bps, std::int64_t initial_pool_bits,
                      std::int64_t pool_capacity_bits) {
  QuantumLink link;
  link.baseline_qber = baseline_qber;
  link.base_keyrate_bps = keyrate_bps;
  link.key_pool_bits = initial_pool_bits;
  link.initial_pool_bits = initial_pool_bits;
  link.pool_capacity_bits = pool_capacity_bits;
  fidelity_update(link);
  return link;
}

void keypool_step(QuantumLink& link, double dt) {
  const double q = link.qber();
  if (q > kAbortQber) return;
  const auto added = static_cast<std::int64_t>(std::floor(link.base_keyrate_bps * secret_key_fraction(q) * dt));
  link.key_pool_bits += added;
  if (link.pool_capacity_bits > 0) link.key_pool_bits = std::min(link.key_pool_bits, link.pool_capacity_bits);
  link.generated_total_bits += added;
}

ConsumeOutcome consume_key(QuantumLink& link, std::int64_t bits) {
  if (bits > link.key_pool_bits) return ConsumeOutcome::Insufficient;
  link.key_pool_bits -= bits;
  link.consumed_total_bits += bits;
  return ConsumeOutcome::Ok;
}

void fidelity_update(QuantumLink& link) {
  const double f = 1.0 - 3.0 * link.baseline_qber - link.fidelity_depression;
  link.fidelity = std::max(kEntanglementThreshold, f);
}

ProbeResult pingpong_probe(QuantumLink& link, engine::RngStream& stream) {
  const int n = std::max(1, link.ids.probe_sample_size);
  const auto errors = stream.binomial(n, link.qber());
  ProbeResult r;
  r.estimate = static_cast<double>(errors) / n;
  r.alarm = r.estimate > kIdsThreshold;
  link.ids.last_estimate = r.estimate;
  link.ids.alarm = r.alarm;
  return r;
}

std::uint64_t Qrng::nonce() {
  for (;;) {
    const std::uint64_t v = stream_->next_u64();
    if (issued_.insert(v).second) return v;
  }
}

const char* to_string(VerifyStatus s) {
  switch (s) {
    case VerifyStatus::Valid: return "Valid";
    case VerifyStatus::NoKey: return "NoKey";
    case VerifyStatus::Expired: return "Expired";
    case VerifyStatus::Reused: return "Reused";
    case VerifyStatus::TagMismatch: return "TagMismatch";
  }
  return "?";
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h *= 0xff51afd7ed558ccdULL;
  return h ^ (h >> 33);
}

}  // namespace

std::uint64_t QcaAuthority::pair_secret(int issuer, int audience) const {
  return mix(mix(secret_seed_, static_cast<std::uint64_t>(issuer)), static_cast<std::uint64_t>(audience));
}

std::uint64_t QcaAuthority::tag_for(const QcaToken& t) const {
  std::uint64_t h = pair_secret(t.issuer, t.audience);
  h = mix(h, t.key_id);
  h = mix(h, t.nonce);
  return mix(h, t.payload_digest);
}

std::optional<QcaToken> QcaAuthority::issue(int issuer, int audience, double t_now, QuantumLink& pool, Qrng& qrng,
                                            std::uint64_t payload_digest) {
  if (consume_key(pool, costs_.issue_bits()) == ConsumeOutcome::Insufficient) return std::nullopt;
  QcaToken t;
  t.issuer = issuer;
  t.audience = audience;
  t.nonce = qrng.nonce();
  t.key_id = next_key_id_++;
  t.payload_digest = payload_digest;
  t.valid_from = t_now;
  t.valid_until = t_now + costs_.validity_s;
  t.tag = tag_for(t);
  key_owner_[t.key_id] = {issuer, audience};
  return t;
}

QcaToken QcaAuthority::forge(int claimed_issuer, int audience, double t_now, std::uint64_t guess) const {
  QcaToken t;
  t.issuer = claimed_issuer;
  t.audience = audience;
  t.nonce = guess;
  t.key_id = 0;  // no pooled key material backs a forged token
  t.tag = mix(guess, 0x5bd1e995ULL);
  t.valid_from = t_now;
  t.valid_until = t_now + costs_.validity_s;
  return t;
}

VerifyStatus QcaAuthority::verify(const QcaToken& token, int claimed_identity, int audience, double t_now,
                                  std::uint64_t payload_digest) {
  auto owner = key_owner_.find(token.key_id);
  if (owner == key_owner_.end() || owner->second != std::pair{claimed_identity, audience}) {
    return VerifyStatus::NoKey;
  }
  if (used_.count(token.key_id) != 0) return VerifyStatus::Reused;
  if (t_now < token.valid_from || t_now > token.valid_until) return VerifyStatus::Expired;
  QcaToken expected = token;
  expected.payload_digest = payload_digest;
  if (tag_for(expected) != token.tag) return VerifyStatus::TagMismatch;
  used_.insert(token.key_id);
  return VerifyStatus::Valid;
}

KakOutcome kak_three_stage_send(double round_trip_ms, double stage_fail_prob, engine::RngStream& stream) {
  KakOutcome out;
  for (int attempt = 0; attempt < 2; ++attempt) {
    bool ok = true;
    for (int pass = 0; pass < 3 && ok; ++pass) {
      ++out.passes;
      out.added_latency_ms += round_trip_ms;
      ok = !stream.bernoulli(stage_fail_prob);
    }
    if (ok) {
      if (attempt == 0) out.success = true; else out.retry_success = true;
      return out;
    }
  }
  out.fallback = true;
  return out;
}

}  // namespace quam::quantum
