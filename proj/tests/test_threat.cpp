#include "quam/threat.hpp"

#include <doctest.h>

using namespace quam;
using namespace quam::threat;
using doctest::Approx;

namespace {

net::Message telemetry_from(net::NodeId src, net::NodeId claimed, bool genuine, std::uint64_t id = 1) {
  net::Message m;
  m.id = id;
  m.msg_class = net::MessageClass::Telemetry;
  m.src = src;
  m.claimed_identity = claimed;
  m.dst = net::kController;
  m.size_bits = 2000;
  m.payload = net::TelemetryPayload{20.0, 30.0, 15.0, 0.0, 0.0, 0, 20.0, 30.0};
  m.envelope = net::Envelope{genuine, std::nullopt, 0};
  return m;
}

}  // namespace

TEST_CASE("intensity scaling and attack effects") {
  CHECK(intensity_scale(Intensity::S1) == 0.2);
  CHECK(intensity_scale(Intensity::S2) == 0.6);
  CHECK(intensity_scale(Intensity::S3) == 1.0);

  AttackCalibration cal;
  AttackPlan p;
  p.kind = AttackKind::CoordinatedMultiNode;
  p.participants = {3, 4};
  p.rate_msgs_per_s = 12.0;
  CHECK(inject(p, cal).rate_per_participant == Approx(6.0));
  p.intensity = Intensity::S1;
  CHECK(inject(p, cal).rate_per_participant == Approx(1.2));

  p.kind = AttackKind::ChannelDisturbance;
  p.intensity = Intensity::S3;
  const auto e = inject(p, cal);
  CHECK(e.qber_delta == Approx(0.078));
  CHECK(e.fidelity_drop == Approx(0.09));
  // baseline 0.011 plus the disturbance crosses the IDS threshold but not the abort point
  CHECK(0.011 + e.qber_delta > quantum::kIdsThreshold);
  CHECK(0.011 + e.qber_delta < quantum::kAbortQber);

  p.kind = AttackKind::FDI;
  CHECK(inject(p, cal, 0.5).fdi_bias_fraction == Approx(0.03));
  CHECK(coordinated_rate(10.0, 0) == 0.0);
}

TEST_CASE("window validation and spreading") {
  AttackPlan p;
  p.participants = {1};
  p.windows = {{100, 200}, {150, 300}};
  CHECK_THROWS_AS(validate(p, 3600), InvalidWindows);
  p.windows = {{200, 100}};
  CHECK_THROWS_AS(validate(p, 3600), InvalidWindows);
  p.windows = {{3500, 3700}};
  CHECK_THROWS_AS(validate(p, 3600), InvalidWindows);
  p.windows = {{100, 200}};
  p.participants.clear();
  CHECK_THROWS_AS(validate(p, 3600), std::invalid_argument);

  const auto w = spread_windows(5, 240, 3600);
  REQUIRE(w.size() == 5);
  CHECK(w[0].start_s == Approx(240));
  CHECK(w[0].end_s == Approx(480));
  CHECK(w[4].end_s == Approx(3360));
  p.participants = {1};
  p.windows = w;
  CHECK(schedule_attacks(p, 3600).size() == 10);
}

TEST_CASE("token bucket") {
  RateLimiter r(5.0, 5.0);
  int passed = 0;
  for (int i = 0; i < 20; ++i) passed += r.check(1, 0.0);
  CHECK(passed == 5);
  CHECK(r.check(2, 0.0));  // buckets are per key
  CHECK_FALSE(r.check(1, 0.1));
  CHECK(r.check(1, 0.2));  // one token back after 0.2 s
  CHECK_FALSE(r.check(1, 0.2));
  // sustained rate converges to the limit
  RateLimiter s(5.0, 5.0);
  int ok = 0;
  for (int i = 0; i < 10000; ++i) ok += s.check(1, i * 0.01);
  CHECK(ok == doctest::Approx(5 + 5 * 99.99).epsilon(0.01));
  CHECK_THROWS_AS(RateLimiter(0.0, 5.0), std::invalid_argument);
}

TEST_CASE("quarantine triggers above the threshold within the window") {
  Quarantine q(10, 10.0, 30.0);
  for (int i = 0; i < 10; ++i) q.record_rejection(3, i * 0.5);
  CHECK_FALSE(q.quarantined(3, 5.0));
  q.record_rejection(3, 5.0);
  CHECK(q.quarantined(3, 5.0));
  CHECK(q.quarantined(3, 34.9));
  CHECK_FALSE(q.quarantined(3, 35.0));
  CHECK_FALSE(q.quarantined(4, 5.0));
  CHECK(q.entries() == 1);

  Quarantine slow(10, 10.0, 30.0);
  for (int i = 0; i < 50; ++i) slow.record_rejection(3, i * 2.0);
  CHECK(slow.entries() == 0);
}

TEST_CASE("plausibility and consistency") {
  CHECK(plausibility_check(10.0, {0.0, 2.0}, 5.0));
  CHECK_FALSE(plausibility_check(10.1, {0.0, 2.0}, 5.0));

  std::vector<TelemetryReport> clean = {{1, 20, 30, -10}, {2, 25, 20, 5}};
  CHECK(consistency_check(clean, 8.0).empty());
  std::vector<TelemetryReport> biased = {{1, 40, 30, -10}, {2, 25, 20, 5}};
  CHECK(consistency_check(biased, 8.0) == std::set<NodeId>{1});
  // offsetting biases cancel
  std::vector<TelemetryReport> offset = {{1, 40, 30, -10}, {2, 5, 20, 5}};
  CHECK(consistency_check(offset, 8.0).empty());
}

TEST_CASE("preset stage sets and delays") {
  const auto none = preset(Tier::None);
  CHECK_FALSE(none.toggles.signature);
  CHECK(verifier_delay_ms(none) == 0.0);
  const auto cl = preset(Tier::Classical);
  CHECK(cl.toggles.signature);
  CHECK_FALSE(cl.toggles.qca_token);
  CHECK(verifier_delay_ms(cl) == Approx(16.0));
  CHECK(sender_delay_ms(cl) == 0.0);
  const auto qu = preset(Tier::Quantum);
  CHECK(qu.toggles.qca_token);
  CHECK(qu.toggles.pingpong_ids);
  CHECK(verifier_delay_ms(qu) == Approx(26.0));
  CHECK(sender_delay_ms(qu) == Approx(9.0));

  CHECK(ablation_order().size() == 6);
  const auto rl = ablation_config(AblationCell::RateLimitOnly, cl);
  CHECK(rl.toggles.rate_limit);
  CHECK_FALSE(rl.toggles.signature);
  CHECK_FALSE(rl.toggles.quarantine);
  CHECK_FALSE(ablation_config(AblationCell::QuantumNoToken, cl).toggles.qca_token);
  CHECK(parse_ablation("full_quantum") == AblationCell::FullQuantum);
  CHECK_FALSE(parse_ablation("bogus"));
}

TEST_CASE("classical pipeline rejects forgeries at the configured rate") {
  auto cfg = preset(Tier::Classical);
  cfg.toggles.rate_limit = cfg.toggles.quarantine = false;
  cfg.forge_success_prob = 0.2;
  Pipeline p(cfg);
  engine::RngStream s(6, "attack");
  PipelineContext ctx;
  ctx.stream = &s;
  int accepted = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) accepted += p.process(telemetry_from(4, 1, false, i), i, ctx).accepted;
  CHECK(static_cast<double>(accepted) / n == Approx(0.2).epsilon(0.05));

  const auto good = p.process(telemetry_from(1, 1, true), 0, ctx);
  CHECK(good.accepted);
  CHECK(good.processing_delay_ms == Approx(16.0));
}

TEST_CASE("acl rejects role violations") {
  Pipeline p(preset(Tier::Classical));
  PipelineContext ctx;
  auto m = telemetry_from(0, 0, true);
  const auto v = p.process(m, 0.0, ctx);
  CHECK_FALSE(v.accepted);
  CHECK(v.rejecting_stage == Stage::Acl);
}

TEST_CASE("quantum pipeline needs a valid token") {
  Pipeline p(preset(Tier::Quantum));
  quantum::QcaAuthority qca(99, {});
  engine::RngStream qs(1, "qrng"), as(1, "attack");
  quantum::Qrng qrng(qs);
  auto pool = quantum::make_link(0.011, 1000.0, 10000);
  PipelineContext ctx;
  ctx.qca = &qca;
  ctx.stream = &as;

  auto m = telemetry_from(1, 1, true, 1);
  m.envelope->token = qca.issue(1, 0, 0.0, pool, qrng, net::payload_digest(m));
  const auto ok = p.process(m, 0.01, ctx);
  CHECK(ok.accepted);
  CHECK(ok.token_status == quantum::VerifyStatus::Valid);

  // replay of the same token
  const auto replay = p.process(m, 0.02, ctx);
  CHECK_FALSE(replay.accepted);
  CHECK(replay.token_status == quantum::VerifyStatus::Reused);

  // spoofed claim with a forged tag, even if the signature forgery succeeds
  int accepted = 0;
  for (int i = 0; i < 200; ++i) {
    auto f = telemetry_from(4, 1, false, 100 + i);
    f.envelope->token = qca.forge(1, 0, i, i);
    accepted += p.process(f, 100.0 + i * 10.0, ctx).accepted;
  }
  CHECK(accepted == 0);
}

TEST_CASE("quarantine keys on the true source once the IDS is on") {
  auto cfg = preset(Tier::Classical);
  cfg.forge_success_prob = 0.0;
  Pipeline p(cfg);
  engine::RngStream s(6, "attack");
  PipelineContext ctx;
  ctx.stream = &s;
  for (int i = 0; i < 11; ++i) p.process(telemetry_from(4, 1 + i % 3, false, i), i * 0.1, ctx);
  const auto v = p.process(telemetry_from(4, 2, true, 99), 1.5, ctx);
  CHECK_FALSE(v.accepted);
  CHECK(v.rejecting_stage == Stage::Quarantine);
  // the spoofed identities themselves stay clean
  CHECK(p.process(telemetry_from(1, 1, true, 100), 1.6, ctx).accepted);
}
