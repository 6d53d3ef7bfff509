#include "quam/network.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <map>

using namespace quam::net;
using doctest::Approx;

namespace {

// all-pairs distances by Floyd-Warshall over the edge list
std::vector<std::vector<int>> floyd(const Topology& t) {
  const int n = t.n_nodes();
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& e : t.edges()) d[e.a][e.b] = d[e.b][e.a] = 1;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

Message telemetry(NodeId src, NodeId dst, int bits) {
  Message m;
  m.id = 1;
  m.src = m.claimed_identity = src;
  m.dst = dst;
  m.size_bits = bits;
  m.payload = TelemetryPayload{};
  return m;
}

}  // namespace

TEST_CASE("topology shapes") {
  CHECK(build_topology(TopologyKind::Star, 5).edges().size() == 4);
  CHECK(build_topology(TopologyKind::Ring, 5).edges().size() == 5);
  CHECK(build_topology(TopologyKind::Star, 5).diameter() == 2);
  CHECK(build_topology(TopologyKind::Ring, 8).diameter() == 4);
  const auto b = build_topology(TopologyKind::TwoClusterBridge, 7);
  CHECK(b.adjacent(0, 4));
  CHECK_FALSE(b.adjacent(1, 5));
  CHECK(b.edges().size() == 6 + 3 + 1);
  CHECK_THROWS_AS(build_topology(TopologyKind::Ring, 2), TooFewNodes);
  CHECK_THROWS_AS(build_topology(TopologyKind::Star, 1), TooFewNodes);
}

TEST_CASE("BFS distances and diameter match Floyd-Warshall") {
  for (auto kind : {TopologyKind::Star, TopologyKind::Ring, TopologyKind::Mesh, TopologyKind::TwoClusterBridge}) {
    for (int n = 4; n <= 21; ++n) {
      const auto t = build_topology(kind, n);
      CHECK(t.connected());
      const auto d = floyd(t);
      int diam = 0;
      for (int s = 0; s < n; ++s) {
        CHECK(t.distances(s) == d[s]);
        diam = std::max(diam, *std::max_element(d[s].begin(), d[s].end()));
      }
      CHECK(t.diameter() == diam);
    }
  }
}

TEST_CASE("all shortest paths are exactly the shortest walks") {
  const auto t = build_topology(TopologyKind::Mesh, 10);
  const auto d = floyd(t);
  for (int s = 0; s < 10; ++s)
    for (int g = 0; g < 10; ++g) {
      if (g == s) continue;
      const auto paths = all_shortest_paths(t, s, g);
      REQUIRE_FALSE(paths.empty());
      std::set<std::vector<NodeId>> uniq(paths.begin(), paths.end());
      CHECK(uniq.size() == paths.size());
      for (const auto& p : paths) {
        CHECK(p.front() == s);
        CHECK(p.back() == g);
        CHECK(static_cast<int>(p.size()) == d[s][g] + 1);
        for (std::size_t i = 1; i < p.size(); ++i) CHECK(t.adjacent(p[i - 1], p[i]));
      }
    }
}

TEST_CASE("ECMP picks each shortest path about equally often") {
  const auto t = build_topology(TopologyKind::Ring, 6);
  const auto paths = all_shortest_paths(t, 0, 3);
  REQUIRE(paths.size() == 2);
  quam::engine::RngStream s(4, "routing");
  std::map<std::vector<NodeId>, int> hits;
  const int n = 20000;
  for (int i = 0; i < n; ++i) ++hits[route(t, 0, 3, s)];
  CHECK(hits.size() == 2);
  for (const auto& [p, c] : hits) CHECK(static_cast<double>(c) / n == Approx(0.5).epsilon(0.03));
}

TEST_CASE("transmit timing without jitter or loss") {
  Link l{LinkParams{0.5, 0.0, 1.0, 0.0, 2}, {}, 0.0, 0.0};
  quam::engine::RngStream s(1, "channel");
  const auto a = transmit(l, telemetry(1, 0, 1000), 0.0, s);
  const auto b = transmit(l, telemetry(1, 0, 1000), 0.0, s);
  const auto c = transmit(l, telemetry(1, 0, 1000), 0.0, s);
  CHECK(a.delivered);
  CHECK(a.arrival_time == Approx(1.0005));
  CHECK(b.queueing_delay == Approx(1.0));
  CHECK(b.arrival_time == Approx(2.0005));
  CHECK_FALSE(c.delivered);
  CHECK(c.reason == DropReason::QueueOverflow);
  // the queue drains with time
  CHECK(transmit(l, telemetry(1, 0, 1000), 1.5, s).delivered);
}

TEST_CASE("priority actions overtake waiting messages") {
  Link l{LinkParams{0.0, 0.0, 1.0, 0.0, 10}, {}, 0.0, 0.0};
  quam::engine::RngStream s(1, "channel");
  transmit(l, telemetry(1, 0, 1000), 0.0, s);
  transmit(l, telemetry(1, 0, 1000), 0.0, s);
  auto p = telemetry(0, 1, 1000);
  p.msg_class = MessageClass::PriorityAction;
  p.payload = PriorityPayload{};
  const auto r = transmit(l, p, 0.0, s);
  CHECK(r.arrival_time == Approx(2.0));
  CHECK(l.busy_until == Approx(3.0));
}

TEST_CASE("loss probability") {
  Link l{LinkParams{0.5, 0.0, 1e6, 0.1, 1000000}, {}, 0.0, 0.0};
  quam::engine::RngStream s(8, "channel");
  int lost = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) lost += transmit(l, telemetry(1, 0, 100), i * 1.0, s).reason == DropReason::Loss;
  CHECK(static_cast<double>(lost) / n == Approx(0.1).epsilon(0.05));
}

TEST_CASE("link parameter validation") {
  CHECK_THROWS_AS(validate(LinkParams{-1.0, 0.3, 1000, 0.001, 64}), std::invalid_argument);
  CHECK_THROWS_AS(validate(LinkParams{0.5, 0.3, 1000, 1.5, 64}), std::invalid_argument);
  CHECK_NOTHROW(validate(LinkParams{}));
}

TEST_CASE("send walks the route and adds security overheads") {
  Network net(build_topology(TopologyKind::Ring, 6), LinkParams{1.0, 0.0, 1e6, 0.0, 64},
              quam::quantum::make_link(0.011, 1000.0, 0));
  quam::engine::RngStream r(1, "routing"), c(1, "channel");
  auto m = telemetry(3, 0, 1000);
  const auto d = send(net, m, 9.0, 9.0, r, c);
  REQUIRE(d.delivered);
  CHECK(d.path.size() == 4);
  CHECK(d.hops.size() == 3);
  CHECK(d.latency_ms == Approx(9.0 + 3 * (1.0 + 0.001) + 9.0).epsilon(1e-6));
}
