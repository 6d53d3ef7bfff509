#include "quam/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <queue>
#include <type_traits>

namespace quam::net {

const char* to_string(TopologyKind k) {
  switch (k) {
    case TopologyKind::Star: return "star";
    case TopologyKind::Ring: return "ring";
    case TopologyKind::Mesh: return "mesh";
    case TopologyKind::TwoClusterBridge: return "bridge";
  }
  return "?";
}

std::optional<TopologyKind> parse_topology(const std::string& s) {
  if (s == "star") return TopologyKind::Star;
  if (s == "ring") return TopologyKind::Ring;
  if (s == "mesh") return TopologyKind::Mesh;
  if (s == "bridge" || s == "two_cluster_bridge") return TopologyKind::TwoClusterBridge;
  return std::nullopt;
}

Topology::Topology(TopologyKind kind, int n_nodes, std::vector<Edge> edges)
    : kind_(kind), n_nodes_(n_nodes), edges_(std::move(edges)), adj_(static_cast<std::size_t>(n_nodes)) {
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    auto [a, b] = edges_[i];
    adj_.at(a).push_back(b);
    adj_.at(b).push_back(a);
    index_[{std::min(a, b), std::max(a, b)}] = static_cast<int>(i);
  }
  for (auto& nbrs : adj_) std::sort(nbrs.begin(), nbrs.end());
}

bool Topology::adjacent(NodeId u, NodeId v) const { return edge_index(u, v) >= 0; }

int Topology::edge_index(NodeId u, NodeId v) const {
  auto it = index_.find({std::min(u, v), std::max(u, v)});
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> Topology::distances(NodeId src) const {
  std::vector<int> dist(static_cast<std::size_t>(n_nodes_), -1);
  std::queue<NodeId> frontier;
  dist.at(src) = 0;
  frontier.push(src);
  while (!frontier.empty()) {
    const NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : adj_[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        frontier.push(v);
      }
    }
  }
  return dist;
}

int Topology::diameter() const {
  int d = 0;
  for (NodeId s = 0; s < n_nodes_; ++s) {
    for (int x : distances(s)) {
      if (x < 0) return -1;
      d = std::max(d, x);
    }
  }
  return d;
}

bool Topology::connected() const {
  const auto d = distances(0);
  return std::none_of(d.begin(), d.end(), [](int x) { return x < 0; });
}

Topology build_topology(TopologyKind kind, int n) {
  std::vector<Edge> edges;
  auto add = [&](NodeId a, NodeId b) {
    if (a == b) return;
    const Edge e{std::min(a, b), std::max(a, b)};
    const bool dup = std::any_of(edges.begin(), edges.end(), [&](const Edge& x) { return x.a == e.a && x.b == e.b; });
    if (!dup) edges.push_back(e);
  };
  switch (kind) {
    case TopologyKind::Star:
      if (n < 2) throw TooFewNodes("star topology needs at least 2 nodes");
      for (NodeId i = 1; i < n; ++i) add(0, i);
      break;
    case TopologyKind::Ring:
      if (n < 3) throw TooFewNodes("ring topology needs at least 3 nodes");
      for (NodeId i = 0; i < n; ++i) add(i, (i + 1) % n);
      break;
    case TopologyKind::Mesh: {
      if (n < 3) throw TooFewNodes("mesh topology needs at least 3 nodes");
      for (NodeId i = 0; i < n; ++i) add(i, (i + 1) % n);
      const int offset = static_cast<int>(std::lround(n / 2.0));
      for (NodeId i = 0; i < n; ++i) add(i, (i + offset) % n);
      break;
    }
    case TopologyKind::TwoClusterBridge: {
      if (n < 4) throw TooFewNodes("two-cluster bridge topology needs at least 4 nodes");
      const int first_b = (n + 1) / 2;
      for (NodeId i = 0; i < first_b; ++i)
        for (NodeId j = i + 1; j < first_b; ++j) add(i, j);
      for (NodeId i = first_b; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j) add(i, j);
      add(0, first_b);
      break;
    }
  }
  return Topology(kind, n, std::move(edges));
}

namespace {

void check_endpoints(const Topology& topo, NodeId src, NodeId dst) {
  if (src < 0 || dst < 0 || src >= topo.n_nodes() || dst >= topo.n_nodes()) {
    throw std::out_of_range("route: node outside topology");
  }
  if (src == dst) throw std::invalid_argument("route: src == dst");
}

}  // namespace

std::vector<NodeId> route(const Topology& topo, NodeId src, NodeId dst, engine::RngStream& stream) {
  check_endpoints(topo, src, dst);
  const auto to_dst = topo.distances(dst);
  if (to_dst[src] < 0) throw Unreachable("no path " + std::to_string(src) + "->" + std::to_string(dst));

  // number of shortest paths from each node to dst, so each full path is
  // equally likely
  const auto n = static_cast<std::size_t>(topo.n_nodes());
  std::vector<double> count(n, 0.0);
  std::vector<NodeId> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return to_dst[a] < to_dst[b]; });
  for (NodeId v : order) {
    if (to_dst[v] < 0) continue;
    if (v == dst) {
      count[v] = 1.0;
      continue;
    }
    for (NodeId w : topo.neighbors(v))
      if (to_dst[w] == to_dst[v] - 1) count[v] += count[w];
  }

  std::vector<NodeId> path{src};
  NodeId cur = src;
  while (cur != dst) {
    double pick = stream.uniform() * count[cur];
    NodeId next = -1;
    for (NodeId w : topo.neighbors(cur)) {
      if (to_dst[w] != to_dst[cur] - 1) continue;
      next = w;
      if (pick < count[w]) break;
      pick -= count[w];
    }
    path.push_back(next);
    cur = next;
  }
  return path;
}

std::vector<std::vector<NodeId>> all_shortest_paths(const Topology& topo, NodeId src, NodeId dst) {
  check_endpoints(topo, src, dst);
  const auto to_dst = topo.distances(dst);
  std::vector<std::vector<NodeId>> out;
  if (to_dst[src] < 0) return out;
  std::vector<NodeId> path{src};
  auto walk = [&](auto&& self, NodeId cur) -> void {
    if (cur == dst) {
      out.push_back(path);
      return;
    }
    for (NodeId w : topo.neighbors(cur)) {
      if (to_dst[w] != to_dst[cur] - 1) continue;
      path.push_back(w);
      self(self, w);
      path.pop_back();
    }
  };
  walk(walk, src);
  return out;
}

const char* to_string(MessageClass c) {
  switch (c) {
    case MessageClass::PriorityAction: return "PriorityAction";
    case MessageClass::ControlSetpoint: return "ControlSetpoint";
    case MessageClass::Telemetry: return "Telemetry";
  }
  return "?";
}

const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::FDI: return "FDI";
    case AttackKind::Spoofing: return "Spoofing";
    case AttackKind::CoordinatedMultiNode: return "CoordinatedMultiNode";
    case AttackKind::MITM: return "MITM";
    case AttackKind::KeyExhaustion: return "KeyExhaustion";
    case AttackKind::ChannelDisturbance: return "ChannelDisturbance";
    case AttackKind::FdiPlusSpoof: return "FdiPlusSpoof";
  }
  return "?";
}

std::optional<AttackKind> parse_attack_kind(const std::string& s) {
  for (auto k : {AttackKind::FDI, AttackKind::Spoofing, AttackKind::CoordinatedMultiNode, AttackKind::MITM,
                 AttackKind::KeyExhaustion, AttackKind::ChannelDisturbance, AttackKind::FdiPlusSpoof}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

void validate(const Message& msg) {
  if (msg.size_bits <= 0) throw std::invalid_argument("message size_bits must be > 0");
  if (msg.malicious && !msg.attack_kind) throw std::invalid_argument("malicious message without attack_kind");
}

std::uint64_t payload_digest(const Message& msg) {
  auto bits = [](double x) {
    std::uint64_t u = 0;
    static_assert(sizeof(u) == sizeof(x));
    std::memcpy(&u, &x, sizeof(u));
    return u;
  };
  std::uint64_t h = 0x84222325cbf29ce4ULL ^ static_cast<std::uint64_t>(msg.msg_class);
  auto fold = [&](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  };
  fold(static_cast<std::uint64_t>(msg.claimed_identity));
  fold(static_cast<std::uint64_t>(msg.dst));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TelemetryPayload>) {
          fold(bits(p.generation_kw));
          fold(bits(p.load_kw));
          fold(bits(p.soc_kwh));
          fold(bits(p.delta_f_hz));
          fold(bits(p.shed_kw));
        } else if constexpr (std::is_same_v<T, SetpointPayload>) {
          fold(bits(p.import_allocation_kw));
        } else {
          fold(static_cast<std::uint64_t>(p.command));
          fold(static_cast<std::uint64_t>(p.tiers));
        }
      },
      msg.payload);
  return h;
}

int default_size_bits(MessageClass c) {
  switch (c) {
    case MessageClass::Telemetry: return 2000;
    case MessageClass::ControlSetpoint: return 1500;
    case MessageClass::PriorityAction: return 1000;
  }
  return 1000;
}

void validate(const LinkParams& p) {
  if (p.latency_ms < 0.0) throw std::invalid_argument("latency_ms must be >= 0");
  if (p.jitter_ms < 0.0) throw std::invalid_argument("jitter_ms must be >= 0");
  if (p.bandwidth_kbps <= 0.0) throw std::invalid_argument("bandwidth_kbps must be > 0");
  if (p.loss_prob < 0.0 || p.loss_prob > 1.0) throw std::invalid_argument("loss_prob must be in [0,1]");
  if (p.queue_capacity < 1) throw std::invalid_argument("queue_capacity must be >= 1");
}

std::size_t Link::queue_length(double t_now) const {
  return static_cast<std::size_t>(
      std::count_if(departures.begin(), departures.end(), [&](double d) { return d > t_now; }));
}

const char* to_string(DropReason r) {
  switch (r) {
    case DropReason::None: return "";
    case DropReason::QueueOverflow: return "QueueOverflow";
    case DropReason::Loss: return "Loss";
    case DropReason::Unreachable: return "Unreachable";
  }
  return "?";
}

TransmitOutcome transmit(Link& link, const Message& msg, double t_now, engine::RngStream& stream) {
  TransmitOutcome out;
  while (!link.departures.empty() && link.departures.front() <= t_now) link.departures.pop_front();
  if (static_cast<int>(link.departures.size()) >= link.params.queue_capacity) {
    out.reason = DropReason::QueueOverflow;
    return out;
  }
  if (link.params.loss_prob > 0.0 && stream.bernoulli(link.params.loss_prob)) {
    out.reason = DropReason::Loss;
    return out;
  }

  const double ser = msg.size_bits / (link.params.bandwidth_kbps * 1000.0);
  double start = std::max(t_now, link.busy_until);
  if (msg.msg_class == MessageClass::PriorityAction && !link.departures.empty()) {
    // goes ahead of everything not yet in service
    start = std::max(t_now, link.departures.front());
    start = std::min(start, link.busy_until);
  }
  const double finish = start + ser;
  if (msg.msg_class == MessageClass::PriorityAction && start < link.busy_until) {
    link.busy_until += ser;
    for (auto& d : link.departures)
      if (d > start) d += ser;
    link.departures.insert(std::upper_bound(link.departures.begin(), link.departures.end(), finish), finish);
  } else {
    link.busy_until = finish;
    link.departures.push_back(finish);
  }

  double jitter = 0.0;
  if (link.params.jitter_ms > 0.0) jitter = std::max(0.0, stream.normal(0.0, link.params.jitter_ms));
  out.delivered = true;
  out.queueing_delay = start - t_now;
  out.serialization = ser;
  out.propagation = (link.params.latency_ms + jitter + link.extra_delay_ms) / 1000.0;
  out.arrival_time = t_now + out.queueing_delay + out.serialization + out.propagation;
  return out;
}

Network::Network(Topology topo, LinkParams defaults, quantum::QuantumLink quantum_defaults)
    : topo_(std::move(topo)) {
  validate(defaults);
  for (const auto& e : topo_.edges()) {
    links_[{e.a, e.b}] = Link{defaults, {}, 0.0, 0.0};
    links_[{e.b, e.a}] = Link{defaults, {}, 0.0, 0.0};
    quantum_.push_back(quantum_defaults);
  }
}

Link& Network::link(NodeId from, NodeId to) {
  auto it = links_.find({from, to});
  if (it == links_.end()) throw std::out_of_range("no link " + std::to_string(from) + "->" + std::to_string(to));
  return it->second;
}

quantum::QuantumLink& Network::quantum_link(NodeId u, NodeId v) {
  const int idx = topo_.edge_index(u, v);
  if (idx < 0) throw std::out_of_range("no quantum link " + std::to_string(u) + "-" + std::to_string(v));
  return quantum_[static_cast<std::size_t>(idx)];
}

DeliveryRecord send(Network& network, const Message& msg, double sender_overhead_ms, double verifier_overhead_ms,
                    engine::RngStream& routing, engine::RngStream& channel) {
  DeliveryRecord rec;
  rec.sender_overhead_ms = sender_overhead_ms;
  rec.verifier_overhead_ms = verifier_overhead_ms;
  rec.path = route(network.topology(), msg.src, msg.dst, routing);
  double t = msg.created_at + sender_overhead_ms / 1000.0;
  for (std::size_t i = 0; i + 1 < rec.path.size(); ++i) {
    const NodeId from = rec.path[i];
    const NodeId to = rec.path[i + 1];
    const auto out = transmit(network.link(from, to), msg, t, channel);
    rec.hops.push_back({from, to, out});
    if (!out.delivered) {
      rec.reason = out.reason;
      return rec;
    }
    t = out.arrival_time;
  }
  rec.delivered = true;
  rec.arrival_time = t;
  rec.latency_ms = (t - msg.created_at) * 1000.0 + verifier_overhead_ms;
  return rec;
}

}  // namespace quam::net
