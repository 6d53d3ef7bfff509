#pragma once

#include "quam/engine.hpp"
#include "quam/network.hpp"

#include <Eigen/Dense>

#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

namespace quam::detection {

using net::NodeId;

class RankDeficient : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

struct MeasurementSet {
  std::vector<double> z;
  std::vector<double> sigma;
  double timestamp = 0.0;
  std::vector<NodeId> sources;
};

/// Throws std::invalid_argument on size mismatch or non-positive sigma.
void validate(const MeasurementSet& m);

struct WlsResult {
  Eigen::VectorXd state;
  double objective = 0.0;  // J at the minimizer
  int dof = 0;
};

/// Weighted least squares for the linear map z = H x + e via the normal
/// equations. Throws RankDeficient when H lacks full column rank or there is
/// no redundancy.
WlsResult wls_estimate(const MeasurementSet& m, const Eigen::MatrixXd& h);

/// J(x) for an arbitrary candidate state.
double wls_objective(const MeasurementSet& m, const Eigen::MatrixXd& h, const Eigen::VectorXd& x);

double chi2_quantile(double p, int dof);

/// True when J exceeds the (1 - alpha) chi-square quantile.
bool chi2_bad_data(double j, int dof, double alpha);

// ---------------------------------------------------------------------------
// Controller measurement map

/// States are (generation, load) per microgrid. Rows: telemetry generation
/// and load for every microgrid, one meter per network edge, one meter at
/// the point of common coupling. A controller edge meters the far node's
/// net injection; an edge between microgrids meters the sum of both.
struct MeasurementLayout {
  Eigen::MatrixXd h;
  std::vector<double> sigma;
  std::vector<NodeId> sources;
  int microgrids = 0;
};

MeasurementLayout build_measurement_layout(const net::Topology& topo, double telemetry_sigma_kw,
                                           double meter_sigma_kw);

struct NodeReading {
  double reported_generation_kw = 0.0;
  double reported_load_kw = 0.0;
  double true_generation_kw = 0.0;
  double true_load_kw = 0.0;
};

/// Telemetry rows take the reported values; meter rows are the true flows
/// plus meter noise. `readings` is indexed by node id (entry 0 unused).
MeasurementSet assemble_measurements(const MeasurementLayout& layout, const std::vector<NodeReading>& readings,
                                     double t_now, engine::RngStream& sensor);

// ---------------------------------------------------------------------------
// Sensor challenges

struct EwmaTracker {
  double lambda = 0.2;
  double mean = 0.0;
  double variance = 0.0;
  double k_sigma = 4.0;
  /// Lower bound on the spread used in the threshold.
  double min_sigma = 0.25;
  std::size_t count = 0;

  [[nodiscard]] double threshold() const;
};

void validate(const EwmaTracker& t);

enum class ChallengeVerdict { Clean, Compromised };
const char* to_string(ChallengeVerdict v);

struct ChallengeRecord {
  NodeId target = 0;
  double issued_at = 0.0;
  double expected = 0.0;
  double reported = 0.0;
  double score = 0.0;
  ChallengeVerdict verdict = ChallengeVerdict::Clean;
};

/// Next issue time after `t_now` with exponential spacing of the given mean;
/// nullopt when challenges are disabled (mean <= 0 or infinite).
std::optional<double> schedule_challenge(engine::RngStream& qrng, double mean_interval_s, double t_now);

/// Uniform microgrid target in [1, n_nodes).
NodeId challenge_target(engine::RngStream& qrng, int n_nodes);

/// Threshold uses the statistics before this score is folded in.
std::pair<ChallengeVerdict, EwmaTracker> evaluate_challenge(double reported, double expected, EwmaTracker tracker);

struct DetectionScores {
  double precision = 1.0;
  double recall = 1.0;
  bool precision_vacuous = false;  // no accusations
  bool recall_vacuous = false;     // no compromised nodes
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
};

/// Node-level scores: a node is accused when any of its challenges came
/// back Compromised.
DetectionScores detection_scores(const std::vector<ChallengeRecord>& records, const std::set<NodeId>& compromised);

}  // namespace quam::detection
