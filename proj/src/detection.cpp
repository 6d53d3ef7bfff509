#include "quam/detection.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace quam::detection {

void validate(const MeasurementSet& m) {
  if (m.z.size() != m.sigma.size()) throw std::invalid_argument("measurement set: |z| != |sigma|");
  for (double s : m.sigma)
    if (!(s > 0.0)) throw std::invalid_argument("measurement set: sigma must be > 0");
}

namespace {

Eigen::VectorXd weights(const MeasurementSet& m) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(m.sigma.size()));
  for (std::size_t i = 0; i < m.sigma.size(); ++i) w[static_cast<Eigen::Index>(i)] = 1.0 / (m.sigma[i] * m.sigma[i]);
  return w;
}

Eigen::VectorXd as_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

double wls_objective(const MeasurementSet& m, const Eigen::MatrixXd& h, const Eigen::VectorXd& x) {
  const Eigen::VectorXd r = as_vector(m.z) - h * x;
  return r.cwiseProduct(r).dot(weights(m));
}

WlsResult wls_estimate(const MeasurementSet& m, const Eigen::MatrixXd& h) {
  validate(m);
  const auto rows = static_cast<Eigen::Index>(m.z.size());
  if (h.rows() != rows) throw std::invalid_argument("measurement map rows do not match |z|");
  if (rows <= h.cols()) throw RankDeficient("no measurement redundancy");

  const Eigen::VectorXd w = weights(m);
  const Eigen::MatrixXd scaled = w.cwiseSqrt().asDiagonal() * h;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  if (qr.rank() < h.cols()) throw RankDeficient("measurement map lacks full column rank");

  const Eigen::MatrixXd gain = h.transpose() * w.asDiagonal() * h;
  const Eigen::VectorXd rhs = h.transpose() * w.asDiagonal() * as_vector(m.z);
  WlsResult out;
  out.state = gain.ldlt().solve(rhs);
  out.objective = wls_objective(m, h, out.state);
  out.dof = static_cast<int>(rows - h.cols());
  return out;
}

double chi2_quantile(double p, int dof) {
  if (dof < 1) throw DomainError("chi-square dof must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("chi-square probability must be in (0,1)");
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
}

bool chi2_bad_data(double j, int dof, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must be in (0,1)");
  return j > chi2_quantile(1.0 - alpha, dof);
}

MeasurementLayout build_measurement_layout(const net::Topology& topo, double telemetry_sigma_kw,
                                           double meter_sigma_kw) {
  const int mg = topo.n_nodes() - 1;
  const auto states = 2 * mg;
  const auto& edges = topo.edges();
  const auto rows = 2 * mg + static_cast<int>(edges.size()) + 1;

  MeasurementLayout out;
  out.microgrids = mg;
  out.h = Eigen::MatrixXd::Zero(rows, states);
  auto g = [](NodeId v) { return 2 * (v - 1); };
  auto l = [](NodeId v) { return 2 * (v - 1) + 1; };

  int r = 0;
  for (NodeId v = 1; v <= mg; ++v) {
    out.h(r, g(v)) = 1.0;
    out.sigma.push_back(telemetry_sigma_kw);
    out.sources.push_back(v);
    ++r;
    out.h(r, l(v)) = 1.0;
    out.sigma.push_back(telemetry_sigma_kw);
    out.sources.push_back(v);
    ++r;
  }
  for (const auto& e : edges) {
    for (NodeId v : {e.a, e.b}) {
      if (v == net::kController) continue;
      out.h(r, g(v)) += 1.0;
      out.h(r, l(v)) -= 1.0;
    }
    out.sigma.push_back(meter_sigma_kw);
    out.sources.push_back(e.a == net::kController ? e.b : e.a);
    ++r;
  }
  for (NodeId v = 1; v <= mg; ++v) {
    out.h(r, g(v)) = 1.0;
    out.h(r, l(v)) = -1.0;
  }
  out.sigma.push_back(meter_sigma_kw);
  out.sources.push_back(net::kController);
  return out;
}

MeasurementSet assemble_measurements(const MeasurementLayout& layout, const std::vector<NodeReading>& readings,
                                     double t_now, engine::RngStream& sensor) {
  const int mg = layout.microgrids;
  if (static_cast<int>(readings.size()) < mg + 1) throw std::invalid_argument("missing node readings");
  Eigen::VectorXd truth(2 * mg);
  for (NodeId v = 1; v <= mg; ++v) {
    truth[2 * (v - 1)] = readings[v].true_generation_kw;
    truth[2 * (v - 1) + 1] = readings[v].true_load_kw;
  }
  const Eigen::VectorXd flows = layout.h * truth;

  MeasurementSet m;
  m.timestamp = t_now;
  m.sigma = layout.sigma;
  m.sources = layout.sources;
  m.z.resize(layout.sigma.size());
  for (NodeId v = 1; v <= mg; ++v) {
    m.z[2 * (v - 1)] = readings[v].reported_generation_kw;
    m.z[2 * (v - 1) + 1] = readings[v].reported_load_kw;
  }
  for (std::size_t r = 2 * mg; r < m.z.size(); ++r) {
    m.z[r] = flows[static_cast<Eigen::Index>(r)] + sensor.normal(0.0, layout.sigma[r]);
  }
  return m;
}

double EwmaTracker::threshold() const { return mean + k_sigma * std::max(std::sqrt(variance), min_sigma); }

void validate(const EwmaTracker& t) {
  if (!(t.lambda > 0.0 && t.lambda <= 1.0)) throw std::invalid_argument("EWMA lambda must be in (0,1]");
  if (t.k_sigma < 0.0 || t.min_sigma < 0.0) throw std::invalid_argument("EWMA k_sigma and min_sigma must be >= 0");
}

const char* to_string(ChallengeVerdict v) { return v == ChallengeVerdict::Clean ? "clean" : "compromised"; }

std::optional<double> schedule_challenge(engine::RngStream& qrng, double mean_interval_s, double t_now) {
  if (!(mean_interval_s > 0.0) || !std::isfinite(mean_interval_s)) return std::nullopt;
  return t_now + qrng.exponential(mean_interval_s);
}

NodeId challenge_target(engine::RngStream& qrng, int n_nodes) {
  if (n_nodes < 2) throw std::invalid_argument("no microgrid to challenge");
  return 1 + static_cast<NodeId>(qrng.index(static_cast<std::size_t>(n_nodes - 1)));
}

std::pair<ChallengeVerdict, EwmaTracker> evaluate_challenge(double reported, double expected, EwmaTracker tracker) {
  const double score = std::abs(reported - expected);
  const auto verdict = score > tracker.threshold() ? ChallengeVerdict::Compromised : ChallengeVerdict::Clean;
  const double dev = score - tracker.mean;
  tracker.mean = tracker.lambda * score + (1.0 - tracker.lambda) * tracker.mean;
  tracker.variance = tracker.lambda * dev * dev + (1.0 - tracker.lambda) * tracker.variance;
  ++tracker.count;
  return {verdict, tracker};
}

DetectionScores detection_scores(const std::vector<ChallengeRecord>& records, const std::set<NodeId>& compromised) {
  std::set<NodeId> accused;
  for (const auto& r : records)
    if (r.verdict == ChallengeVerdict::Compromised) accused.insert(r.target);

  DetectionScores s;
  for (NodeId v : accused) (compromised.count(v) ? s.true_positives : s.false_positives)++;
  for (NodeId v : compromised)
    if (!accused.count(v)) ++s.false_negatives;

  if (accused.empty()) {
    s.precision = 1.0;
    s.precision_vacuous = true;
  } else {
    s.precision = static_cast<double>(s.true_positives) / static_cast<double>(accused.size());
  }
  if (compromised.empty()) {
    s.recall = 1.0;
    s.recall_vacuous = true;
  } else {
    s.recall = static_cast<double>(s.true_positives) / static_cast<double>(compromised.size());
  }
  return s;
}

}  // namespace quam::detection
