#pragma once

#include "quam/detection.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace quam::metrics {

class EmptyInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Nearest rank: the value at 1-based index ceil(p N) of the sorted input.
double percentile(std::vector<double> values, double p);

enum class Outcome : std::uint8_t { Accepted, Rejected, Dropped };
const char* to_string(Outcome o);

struct MessageRecord {
  std::uint64_t id = 0;
  double created_at = 0.0;
  std::string msg_class;
  int src = 0;
  int claimed = 0;
  int dst = 0;
  bool malicious = false;
  std::string attack_kind;  // empty for legitimate traffic
  bool well_formed = true;
  Outcome outcome = Outcome::Accepted;
  /// Rejecting stage, drop reason, or empty when accepted.
  std::string reason;
  std::string token_status;  // empty when no token check ran
  int hops = 0;
  double latency_ms = 0.0;   // accepted messages only
  int key_bits = 0;          // pool bits spent on this message
  std::string kak;           // success / retry / fallback, empty when unused
};

struct NodeSample {
  double generation_kw = 0.0;
  double demand_kw = 0.0;
  double served_kw = 0.0;
  double shed_kw = 0.0;
  double import_kw = 0.0;
  double soc_kwh = 0.0;
  double delta_f_hz = 0.0;
};

struct LinkSample {
  double qber = 0.0;
  double key_pool_bits = 0.0;
  double fidelity = 0.0;
  bool alarm = false;
};

struct TimeSeriesRow {
  double t = 0.0;
  std::vector<NodeSample> nodes;  // microgrids 1..n-1
  std::vector<LinkSample> links;  // one per topology edge
  double served_kw = 0.0;
  double shed_kw = 0.0;
  double import_kw = 0.0;
  double eens_kwh = 0.0;
  double balance_error_kw = 0.0;  // largest per-node |balance error| this tick
  bool islanded = false;
  bool attack_active = false;
  bool wls_run = false;
  bool wls_flag = false;
  double wls_objective = 0.0;
  int wls_dof = 0;
  std::uint64_t probes_total = 0;
  double key_generated_bits = 0.0;  // cumulative over all links
  double key_consumed_bits = 0.0;
};

struct RunMeta {
  int n_nodes = 0;
  double duration_s = 0.0;
  double physics_dt = 1.0;
  std::uint64_t seed = 0;
  std::vector<int> compromised;  // ground truth for sensor challenges
};

struct RunLog {
  RunMeta meta;
  std::vector<TimeSeriesRow> timeseries;
  std::vector<MessageRecord> messages;
  std::vector<detection::ChallengeRecord> challenges;
};

struct RunSummary {
  double eens_kwh = 0.0;
  double block_rate = 0.0;
  bool zero_malicious = true;
  std::uint64_t malicious_total = 0;
  std::uint64_t malicious_blocked = 0;
  std::uint64_t malicious_dropped = 0;
  std::uint64_t malicious_accepted = 0;
  double delivery_ratio = 1.0;
  std::uint64_t legit_sent = 0;
  std::uint64_t legit_delivered = 0;
  double latency_mean_ms = 0.0;
  double latency_median_ms = 0.0;
  double latency_p95_ms = 0.0;
  double e91_utilization = 0.0;
  double kak_success_rate = 0.0;
  std::uint64_t kak_attempts = 0;
  double ids_probes_per_s = 0.0;
  double qca_rejection_rate = 0.0;
  std::uint64_t qca_rejections = 0;
  double key_bits_per_msg = 0.0;
  std::vector<double> shed_fraction;  // per microgrid
  double peak_unserved_kw = 0.0;
  double max_balance_error_kw = 0.0;
  double wls_detection_rate = 0.0;
  double wls_false_flag_rate = 0.0;
  std::uint64_t wls_runs_attack = 0;
  detection::DetectionScores challenges;
};

/// Pure function of the log.
RunSummary summarize(const RunLog& log);

void write_timeseries_csv(const std::filesystem::path& path, const std::vector<TimeSeriesRow>& rows);
void write_messages_csv(const std::filesystem::path& path, const std::vector<MessageRecord>& rows);
void write_challenges_csv(const std::filesystem::path& path, const std::vector<detection::ChallengeRecord>& rows);
void write_meta_json(const std::filesystem::path& path, const RunMeta& meta);
std::string summary_json(const RunSummary& s);
void write_summary_json(const std::filesystem::path& path, const RunSummary& s);

/// Writes every run file into `dir` (created if missing). Throws IoError.
void write_run(const std::filesystem::path& dir, const RunLog& log, const RunSummary& summary);

/// Reads back the files written by write_run.
RunLog load_run(const std::filesystem::path& dir);

/// Fixed-width round-trip formatting used by every writer.
std::string format_double(double v);

}  // namespace quam::metrics
