#pragma once

#include "quam/engine.hpp"
#include "quam/network.hpp"
#include "quam/quantum.hpp"

#include <array>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace quam::threat {

using net::AttackKind;
using net::NodeId;

class InvalidWindows : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class Intensity { S1, S2, S3 };
const char* to_string(Intensity i);
std::optional<Intensity> parse_intensity(const std::string& s);
/// S1 = 0.2, S2 = 0.6, S3 = 1.0 of each kind's maximum bias or rate.
double intensity_scale(Intensity i);

struct Window {
  double start_s = 0.0;
  double end_s = 0.0;
};

struct AttackPlan {
  AttackKind kind = AttackKind::FdiPlusSpoof;
  Intensity intensity = Intensity::S3;
  std::vector<Window> windows;
  std::vector<NodeId> participants;
  /// Nodes whose sensors or command inputs are targeted; defaults to all
  /// microgrids outside `participants`.
  std::vector<NodeId> victims;
  double rate_msgs_per_s = 20.0;
  /// Undirected link targeted by MITM / channel disturbance (edge endpoints).
  std::optional<std::pair<NodeId, NodeId>> target_link;
};

bool emits_messages(AttackKind k);

/// Throws InvalidWindows for overlapping, inverted or out-of-horizon windows,
/// std::invalid_argument for an empty participant set on message-emitting kinds.
void validate(const AttackPlan& plan, double horizon_s);

/// Evenly spread `count` windows of `length_s` over the horizon.
std::vector<Window> spread_windows(int count, double length_s, double horizon_s);

/// AttackWindowStart / AttackWindowEnd events; payload.a = plan index,
/// payload.b = window index.
std::vector<engine::Event> schedule_attacks(const AttackPlan& plan, double horizon_s, int plan_index = 0);

// ---------------------------------------------------------------------------
// Attack effects

struct AttackCalibration {
  double fdi_max_bias = 0.06;           // fractional generation inflation at S3
  double fdi_min_share = 0.0;           // lower end of the per-sensor bias draw
  double spoof_shed_tiers = 2;          // tiers a forged shed command drops at S3
  double disturbance_qber_delta = 0.078;
  double disturbance_fidelity_drop = 0.09;
  double mitm_delay_ms = 15.0;
  double mitm_tamper_prob = 0.5;
  double mitm_qber_delta = 0.04;
  double junk_fraction = 0.8;           // share of coordinated flood that is filler
  double forged_allocation_fraction = 0.2;  // forged setpoints carry this x cap
};

struct AttackEffect {
  double rate_per_participant = 0.0;  // msgs/s emitted by each participant
  double fdi_bias_fraction = 0.0;     // multiplicative inflation of reported generation
  double qber_delta = 0.0;
  double fidelity_drop = 0.0;
  double added_delay_ms = 0.0;
  double tamper_prob = 0.0;
  int shed_tiers = 0;
};

/// Per-kind effect parameters at the given intensity. `sensor_share` is the
/// per-sensor draw in [0,1] scaling the FDI bias.
AttackEffect inject(const AttackPlan& plan, const AttackCalibration& cal, double sensor_share = 1.0);

/// Split of a coordinated campaign's total rate across participants.
double coordinated_rate(double total_rate, std::size_t participants);

// ---------------------------------------------------------------------------
// Defense configuration

enum class Tier { None, Classical, Quantum };
const char* to_string(Tier t);
std::optional<Tier> parse_tier(const std::string& s);

enum class Stage : std::uint8_t {
  Acl,
  Quarantine,
  RateLimit,
  Signature,
  QcaToken,
  PingPong,
  Plausibility,
  Consistency,
};
inline constexpr std::size_t kStageCount = 8;
const char* to_string(Stage s);

struct StageToggles {
  bool acl = false;
  bool rate_limit = false;
  bool signature = false;
  bool qca_token = false;
  bool plausibility = false;
  bool consistency = false;
  bool quarantine = false;
  bool classical_ids = false;
  bool pingpong_ids = false;
  bool qkd_encryption = false;  // QKD-derived session keys on every message
};

struct StageDelays {
  double signature_ms = 8.0;
  double classical_ids_ms = 8.0;
  double qca_issue_ms = 9.0;
  double qca_verify_ms = 9.0;
  double pingpong_ms = 0.5;
  double key_lookup_ms = 0.5;
};

struct DefenseConfig {
  Tier tier = Tier::None;
  StageToggles toggles;
  StageDelays delays;
  double rate_limit_msgs_per_s = 5.0;
  double rate_limit_burst = 5.0;
  int quarantine_threshold = 10;
  double quarantine_window_s = 10.0;
  double quarantine_duration_s = 30.0;
  double forge_success_prob = 0.2;
  double plausibility_k = 5.0;
};

StageToggles preset_toggles(Tier tier);
DefenseConfig preset(Tier tier);

/// Cells of the ablation study in order.
enum class AblationCell { NoDefense, RateLimitOnly, RateLimitSignature, FullClassical, QuantumNoToken, FullQuantum };
const std::vector<AblationCell>& ablation_order();
const char* to_string(AblationCell c);
std::optional<AblationCell> parse_ablation(const std::string& s);
DefenseConfig ablation_config(AblationCell cell, const DefenseConfig& base);

// ---------------------------------------------------------------------------
// Stage primitives

/// Per-key token bucket refilled at `limit` tokens/s with capacity `burst`.
class RateLimiter {
public:
  RateLimiter(double limit_per_s, double burst);
  bool check(NodeId key, double t_now);

private:
  struct Bucket {
    double tokens = 0.0;
    double last = 0.0;
  };
  double limit_;
  double burst_;
  std::map<NodeId, Bucket> buckets_;
};

/// Stateless form for one source: returns pass/fail and updates `state`.
bool rate_limit_check(RateLimiter& state, NodeId src, double t_now);

struct Prediction {
  double value = 0.0;
  double sigma = 1.0;
};

bool plausibility_check(double reported, const Prediction& predicted, double k_sigma);

struct TelemetryReport {
  NodeId node = 0;
  double generation_kw = 0.0;
  double load_kw = 0.0;
  /// Independently metered net injection for the node (feeder meter).
  double metered_net_kw = 0.0;
};

/// When reported net injections fail to balance the metered total by more
/// than `tolerance_kw`, flags the nodes whose own residual exceeds it.
/// Offsetting biases cancel in the balance and are not flagged.
std::set<NodeId> consistency_check(const std::vector<TelemetryReport>& recent, double tolerance_kw);

class Quarantine {
public:
  Quarantine(int threshold, double window_s, double duration_s)
      : threshold_(threshold), window_s_(window_s), duration_s_(duration_s) {}

  void record_rejection(NodeId source, double t_now);
  [[nodiscard]] bool quarantined(NodeId source, double t_now) const;
  [[nodiscard]] std::size_t entries() const { return entered_; }

private:
  int threshold_;
  double window_s_;
  double duration_s_;
  std::map<NodeId, std::deque<double>> rejections_;
  std::map<NodeId, double> until_;
  std::size_t entered_ = 0;
};

struct Verdict {
  std::uint64_t msg_id = 0;
  bool accepted = true;
  std::optional<Stage> rejecting_stage;
  double processing_delay_ms = 0.0;
  std::optional<quantum::VerifyStatus> token_status;
};

/// Rejections counted toward quarantine; updates `q` and returns it.
Quarantine& quarantine_update(Quarantine& q, const Verdict& verdict, NodeId source, double t_now);

/// Everything the pipeline needs from the rest of the simulation.
struct PipelineContext {
  quantum::QcaAuthority* qca = nullptr;
  engine::RngStream* stream = nullptr;  // forge-success draws
  std::function<Prediction(const net::Message&)> predict;
  const std::set<NodeId>* suspects = nullptr;
  /// True when the message crossed a quantum link currently in IDS alarm.
  bool path_alarmed = false;
};

/// Per-verifier pipeline state.
class Pipeline {
public:
  explicit Pipeline(const DefenseConfig& cfg);

  /// Evaluates enabled stages in order, stopping at the first rejection.
  Verdict process(const net::Message& msg, double t_now, PipelineContext& ctx);

  [[nodiscard]] const std::array<std::uint64_t, kStageCount>& evaluations() const { return evaluations_; }
  [[nodiscard]] const DefenseConfig& config() const { return cfg_; }
  Quarantine& quarantine() { return quarantine_; }

private:
  bool evaluate(Stage s, const net::Message& msg, double t_now, PipelineContext& ctx, Verdict& v);

  DefenseConfig cfg_;
  RateLimiter limiter_;
  Quarantine quarantine_;
  std::array<std::uint64_t, kStageCount> evaluations_{};
};

/// Stateless form used by tests and by the simulation through Pipeline.
Verdict pipeline_process(Pipeline& pipeline, const net::Message& msg, double t_now, PipelineContext& ctx);

/// Verifier-side delay of the configured stages for an accepted message.
double verifier_delay_ms(const DefenseConfig& cfg);
/// Sender-side security processing (token issuance).
double sender_delay_ms(const DefenseConfig& cfg);

}  // namespace quam::threat
