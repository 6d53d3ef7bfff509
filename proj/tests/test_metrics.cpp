#include "quam/metrics.hpp"

#include <doctest.h>

#include <filesystem>
#include <numeric>

using namespace quam::metrics;
using doctest::Approx;

namespace {

MessageRecord rec(bool malicious, Outcome o, double latency = 0.0) {
  MessageRecord m;
  m.malicious = malicious;
  m.outcome = o;
  m.latency_ms = latency;
  m.msg_class = "Telemetry";
  if (malicious) m.attack_kind = "FDI";
  return m;
}

}  // namespace

TEST_CASE("nearest-rank percentile") {
  CHECK(percentile({40, 40, 40}, 0.95) == 40);
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(percentile(v, 0.95) == 95);
  CHECK(percentile(v, 0.5) == 50);
  v.push_back(1000.0);
  CHECK(percentile(v, 0.95) == 96);
  CHECK(percentile({7.0}, 0.95) == 7.0);
  CHECK_THROWS_AS(percentile({}, 0.5), EmptyInput);
  CHECK_THROWS_AS(percentile({1.0}, 1.5), std::invalid_argument);
}

TEST_CASE("summary counts") {
  RunLog log;
  log.meta.n_nodes = 3;
  log.meta.physics_dt = 1.0;
  log.messages = {rec(true, Outcome::Rejected), rec(true, Outcome::Rejected), rec(true, Outcome::Accepted),
                  rec(true, Outcome::Dropped),  rec(false, Outcome::Accepted, 10), rec(false, Outcome::Accepted, 30),
                  rec(false, Outcome::Accepted, 20), rec(false, Outcome::Dropped)};
  for (int i = 0; i < 3600; ++i) {
    TimeSeriesRow r;
    r.t = i;
    r.shed_kw = i < 1800 ? 2.0 : 0.0;
    r.nodes = {{0, 10, 9, 1, 0, 0, 0}, {0, 10, 10, 0, 0, 0, 0}};
    log.timeseries.push_back(r);
  }
  const auto s = summarize(log);
  CHECK(s.malicious_total == 4);
  CHECK(s.malicious_dropped == 1);
  CHECK(s.block_rate == Approx(2.0 / 3.0));
  CHECK_FALSE(s.zero_malicious);
  CHECK(s.legit_sent == 4);
  CHECK(s.delivery_ratio == Approx(0.75));
  CHECK(s.latency_mean_ms == Approx(20));
  CHECK(s.latency_median_ms == Approx(20));
  CHECK(s.latency_p95_ms == Approx(30));
  CHECK(s.eens_kwh == Approx(1.0));
  CHECK(s.peak_unserved_kw == Approx(2.0));
  REQUIRE(s.shed_fraction.size() == 2);
  CHECK(s.shed_fraction[0] == Approx(0.1));
  CHECK(s.shed_fraction[1] == 0.0);
}

TEST_CASE("run files round-trip") {
  RunLog log;
  log.meta = {3, 2.0, 1.0, 9, {2}};
  TimeSeriesRow r;
  r.t = 1.0;
  r.nodes = {{1.5, 2.25, 2.0, 0.25, 0.0, 15.0, 0.001}, {0.1, 0.2, 0.3, 0.0, 0.1, 10.0, -0.002}};
  r.links = {{0.011, 1234, 0.967, false}, {0.089, 50, 0.877, true}};
  r.eens_kwh = 1.0 / 3.0;
  r.wls_run = true;
  r.wls_objective = 12.345678901234;
  r.wls_dof = 4;
  log.timeseries = {r};
  auto m = rec(false, Outcome::Accepted, 61.25);
  m.id = 17;
  m.kak = "success";
  log.messages = {m, rec(true, Outcome::Rejected)};
  log.messages[1].reason = "qca_token";
  log.messages[1].token_status = "NoKey";
  log.challenges = {{2, 30.5, 10.0, 12.5, 2.5, quam::detection::ChallengeVerdict::Compromised}};

  const auto dir = std::filesystem::temp_directory_path() / "quam_metrics_roundtrip";
  std::filesystem::remove_all(dir);
  const auto s = summarize(log);
  write_run(dir, log, s);
  for (auto f : {"timeseries.csv", "messages.csv", "summary.json", "challenges.csv", "run_meta.json"})
    CHECK(std::filesystem::exists(dir / f));

  const auto back = load_run(dir);
  CHECK(back.meta.seed == 9);
  CHECK(back.meta.compromised == std::vector<int>{2});
  REQUIRE(back.timeseries.size() == 1);
  CHECK(back.timeseries[0].eens_kwh == r.eens_kwh);
  CHECK(back.timeseries[0].wls_objective == r.wls_objective);
  CHECK(back.timeseries[0].links[1].alarm);
  CHECK(back.timeseries[0].nodes[1].delta_f_hz == r.nodes[1].delta_f_hz);
  REQUIRE(back.messages.size() == 2);
  CHECK(back.messages[0].id == 17);
  CHECK(back.messages[0].latency_ms == 61.25);
  CHECK(back.messages[1].reason == "qca_token");
  REQUIRE(back.challenges.size() == 1);
  CHECK(back.challenges[0].verdict == quam::detection::ChallengeVerdict::Compromised);
  CHECK(summary_json(summarize(back)) == summary_json(s));
  std::filesystem::remove_all(dir);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-17, 123456789.125, -0.0, 2.5e300})
    CHECK(std::stod(format_double(v)) == v);
}
