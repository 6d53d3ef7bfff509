#pragma once

#include "quam/engine.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace quam::quantum {

class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

inline constexpr double kAbortQber = 0.11;
inline constexpr double kIdsThreshold = 0.025;
inline constexpr double kEntanglementThreshold = 0.5;

enum class Protocol { BB84, E91 };

// ---------------------------------------------------------------------------
// Closed-form channel curves

/// Shannon binary entropy in bits; H2(0) = H2(1) = 0.
double binary_entropy(double q);

/// Asymptotic extractable fraction r = max(0, 1 - 2 H2(q)), zero at and
/// beyond the abort QBER. BB84 and E91 share the curve.
double secret_key_fraction(double q, Protocol protocol = Protocol::BB84);

struct DistillationResult {
  double fidelity = 0.0;
  double success_probability = 0.0;
  /// Output pairs per input pair: two pairs are consumed per attempt.
  [[nodiscard]] double yield() const { return success_probability / 2.0; }
};

/// One BBPSSW recurrence round on Werner pairs of fidelity F in (0.5, 1].
DistillationResult distill_bbpssw(double fidelity);

/// End-to-end QBER of a swap chain under linear error composition.
double swap_chain_qber(double q_hop, int hops);

/// Secret-key throughput of an n-hop chain relative to a single hop.
double key_rate_factor(double q_hop, int hops, double swap_efficiency = 0.5);

// ---------------------------------------------------------------------------
// Per-link state

struct IdsState {
  double probe_interval_s = 4.0;
  int probe_sample_size = 200;
  double last_estimate = 0.0;
  bool alarm = false;
};

struct QuantumLink {
  double baseline_qber = 0.011;
  double attack_qber_delta = 0.0;
  double fidelity = 1.0 - 3.0 * 0.011;
  double fidelity_depression = 0.0;  // attack-driven, applied during disturbance
  std::int64_t key_pool_bits = 0;
  std::int64_t initial_pool_bits = 0;
  std::int64_t pool_capacity_bits = 0;  // 0 = unbounded; production past it is discarded
  double base_keyrate_bps = 1000.0;
  std::int64_t generated_total_bits = 0;
  std::int64_t consumed_total_bits = 0;
  IdsState ids;

  [[nodiscard]] double qber() const;
};

QuantumLink make_link(double baseline_qber, double keyrate_bps, std::int64_t initial_pool_bits,
                      std::int64_t pool_capacity_bits = 0);

/// Refill by floor(R0 * r(qber) * dt); halted when qber exceeds the abort
/// threshold. generated_total_bits counts production even when the pool is full.
void keypool_step(QuantumLink& link, double dt);

enum class ConsumeOutcome { Ok, Insufficient };
ConsumeOutcome consume_key(QuantumLink& link, std::int64_t bits);

/// F = 1 - 3 q_baseline minus any attack depression, floored at 0.5.
void fidelity_update(QuantumLink& link);

struct ProbeResult {
  double estimate = 0.0;
  bool alarm = false;
};

/// Ping-Pong probe: binomial error count over `probe_sample_size` qubits.
ProbeResult pingpong_probe(QuantumLink& link, engine::RngStream& stream);

// ---------------------------------------------------------------------------
// QRNG, QCA tokens

/// Nonce source backed by its own stream; never repeats within a run.
class Qrng {
public:
  explicit Qrng(engine::RngStream& stream) : stream_(&stream) {}
  std::uint64_t nonce();

private:
  engine::RngStream* stream_;
  std::set<std::uint64_t> issued_;
};

struct QcaToken {
  int issuer = -1;
  int audience = -1;
  std::uint64_t nonce = 0;
  std::uint64_t key_id = 0;
  std::uint64_t tag = 0;
  std::uint64_t payload_digest = 0;  // bound into the tag
  double valid_from = 0.0;
  double valid_until = 0.0;
};

struct TokenCosts {
  std::int64_t tag_bits = 256;
  std::int64_t encryption_bits = 444;
  std::int64_t per_extra_hop_bits = 30;
  std::int64_t nonce_bits = 0;  // QRNG nonces are not drawn from the pool
  double validity_s = 5.0;

  [[nodiscard]] std::int64_t issue_bits() const { return tag_bits + nonce_bits; }
  [[nodiscard]] std::int64_t message_bits(int hops) const {
    return tag_bits + nonce_bits + encryption_bits + per_extra_hop_bits * std::max(0, hops - 1);
  }
};

enum class VerifyStatus { Valid, NoKey, Expired, Reused, TagMismatch };
const char* to_string(VerifyStatus s);

/// Authority that mints and checks QCA tokens. Pairwise key material is
/// abstracted by a secret per ordered (issuer, audience) pair; only parties
/// holding that pair's pool can produce a matching tag.
class QcaAuthority {
public:
  QcaAuthority(std::uint64_t secret_seed, TokenCosts costs) : secret_seed_(secret_seed), costs_(costs) {}

  /// Consumes `costs.issue_bits()` from `pool`; nullopt when short.
  std::optional<QcaToken> issue(int issuer, int audience, double t_now, QuantumLink& pool, Qrng& qrng,
                                std::uint64_t payload_digest = 0);

  /// A tag an adversary can produce without the pair's key material.
  [[nodiscard]] QcaToken forge(int claimed_issuer, int audience, double t_now, std::uint64_t guess) const;

  VerifyStatus verify(const QcaToken& token, int claimed_identity, int audience, double t_now,
                      std::uint64_t payload_digest = 0);

  [[nodiscard]] const TokenCosts& costs() const { return costs_; }

private:
  [[nodiscard]] std::uint64_t pair_secret(int issuer, int audience) const;
  [[nodiscard]] std::uint64_t tag_for(const QcaToken& t) const;

  std::uint64_t secret_seed_;
  TokenCosts costs_;
  std::uint64_t next_key_id_ = 1;
  std::map<std::uint64_t, std::pair<int, int>> key_owner_;  // key_id -> (issuer, audience)
  std::set<std::uint64_t> used_;                             // spent key ids
};

// ---------------------------------------------------------------------------
// Kak three-stage direct transmission

struct KakOutcome {
  bool success = false;        // all three passes succeeded on the first attempt
  bool retry_success = false;  // first attempt failed, retry succeeded
  bool fallback = false;       // both failed; deliver via QKD-authenticated path
  int passes = 0;              // exchange passes performed, including failed ones
  double added_latency_ms = 0.0;
};

/// Three sequential passes, each failing with `stage_fail_prob` and costing
/// one round trip; one retry, then fallback.
KakOutcome kak_three_stage_send(double round_trip_ms, double stage_fail_prob, engine::RngStream& stream);

}  // namespace quam::quantum
