#pragma once

#include "quam/engine.hpp"
#include "quam/quantum.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace quam::net {

using NodeId = int;
inline constexpr NodeId kController = 0;

class TooFewNodes : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class Unreachable : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class TopologyKind { Star, Ring, Mesh, TwoClusterBridge };
const char* to_string(TopologyKind k);
std::optional<TopologyKind> parse_topology(const std::string& s);

struct Edge {
  NodeId a = 0;
  NodeId b = 0;
};

class Topology {
public:
  Topology(TopologyKind kind, int n_nodes, std::vector<Edge> edges);

  [[nodiscard]] TopologyKind kind() const { return kind_; }
  [[nodiscard]] int n_nodes() const { return n_nodes_; }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] const std::vector<NodeId>& neighbors(NodeId v) const { return adj_.at(v); }
  [[nodiscard]] bool adjacent(NodeId u, NodeId v) const;
  /// Index into edges() for the undirected pair, or -1.
  [[nodiscard]] int edge_index(NodeId u, NodeId v) const;

  /// Hop distances from `src` (BFS); -1 for unreachable.
  [[nodiscard]] std::vector<int> distances(NodeId src) const;
  [[nodiscard]] int diameter() const;
  [[nodiscard]] bool connected() const;

private:
  TopologyKind kind_;
  int n_nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> adj_;
  std::map<std::pair<NodeId, NodeId>, int> index_;
};

/// Mesh chords connect i to (i + round(n/2)) mod n on top of the ring.
/// The bridge topology splits nodes into clusters of ceil(n/2) and
/// floor(n/2); the bridge joins the controller to the first node of the
/// second cluster.
Topology build_topology(TopologyKind kind, int n_nodes);

/// Uniformly random shortest path (ECMP) from `src` to `dst`.
std::vector<NodeId> route(const Topology& topo, NodeId src, NodeId dst, engine::RngStream& stream);

/// All shortest paths; test and diagnostics helper.
std::vector<std::vector<NodeId>> all_shortest_paths(const Topology& topo, NodeId src, NodeId dst);

// ---------------------------------------------------------------------------
// Messages

enum class MessageClass : std::uint8_t { PriorityAction, ControlSetpoint, Telemetry };
const char* to_string(MessageClass c);

enum class AttackKind : std::uint8_t {
  FDI,
  Spoofing,
  CoordinatedMultiNode,
  MITM,
  KeyExhaustion,
  ChannelDisturbance,
  FdiPlusSpoof,
};
const char* to_string(AttackKind k);
std::optional<AttackKind> parse_attack_kind(const std::string& s);

struct TelemetryPayload {
  double generation_kw = 0.0;
  double load_kw = 0.0;
  double soc_kwh = 0.0;
  double delta_f_hz = 0.0;
  double shed_kw = 0.0;
  int commanded_shed_tiers = 0;
  // ground truth at sampling time, for meters and bookkeeping only
  double true_generation_kw = 0.0;
  double true_load_kw = 0.0;
};

struct SetpointPayload {
  double import_allocation_kw = 0.0;
};

enum class PriorityCommand : std::uint8_t { Shed, Restore };

struct PriorityPayload {
  PriorityCommand command = PriorityCommand::Restore;
  int tiers = 0;  // number of least-critical tiers affected
};

using Payload = std::variant<TelemetryPayload, SetpointPayload, PriorityPayload>;

struct Envelope {
  bool signed_genuine = false;  // signature made with the claimed identity's credential
  std::optional<quantum::QcaToken> token;
  std::uint64_t nonce = 0;
};

struct Message {
  std::uint64_t id = 0;
  MessageClass msg_class = MessageClass::Telemetry;
  NodeId src = 0;
  NodeId claimed_identity = 0;
  NodeId dst = 0;
  int size_bits = 0;
  Payload payload;
  /// Application-valid content; junk flood messages are discarded on receipt.
  bool well_formed = true;
  bool tampered = false;
  std::optional<Envelope> envelope;
  double created_at = 0.0;
  bool malicious = false;
  std::optional<AttackKind> attack_kind;
};

/// Throws std::invalid_argument when the message breaks its invariants.
void validate(const Message& msg);

std::uint64_t payload_digest(const Message& msg);

int default_size_bits(MessageClass c);

// ---------------------------------------------------------------------------
// Links and transport

struct LinkParams {
  double latency_ms = 0.5;
  double jitter_ms = 0.3;
  double bandwidth_kbps = 10000.0;
  double loss_prob = 0.001;
  int queue_capacity = 64;
};

void validate(const LinkParams& p);

/// One direction of a classical channel: FIFO drop-tail queue in front of a
/// serializer. PriorityAction jumps ahead of waiting messages.
struct Link {
  LinkParams params;
  std::deque<double> departures;  // serialization finish times, ascending
  double busy_until = 0.0;
  double extra_delay_ms = 0.0;    // adversarial delay (MITM)

  [[nodiscard]] std::size_t queue_length(double t_now) const;
};

enum class DropReason : std::uint8_t { None, QueueOverflow, Loss, Unreachable };
const char* to_string(DropReason r);

struct TransmitOutcome {
  bool delivered = false;
  double arrival_time = 0.0;
  DropReason reason = DropReason::None;
  double queueing_delay = 0.0;
  double serialization = 0.0;
  double propagation = 0.0;  // base latency + jitter + adversarial delay
};

TransmitOutcome transmit(Link& link, const Message& msg, double t_now, engine::RngStream& stream);

/// Directed classical links for every topology edge plus the quantum link
/// riding alongside each undirected edge.
class Network {
public:
  Network(Topology topo, LinkParams defaults, quantum::QuantumLink quantum_defaults);

  [[nodiscard]] const Topology& topology() const { return topo_; }
  Link& link(NodeId from, NodeId to);
  quantum::QuantumLink& quantum_link(NodeId u, NodeId v);
  quantum::QuantumLink& quantum_link(int edge_index) { return quantum_.at(edge_index); }
  std::vector<quantum::QuantumLink>& quantum_links() { return quantum_; }
  [[nodiscard]] const std::vector<quantum::QuantumLink>& quantum_links() const { return quantum_; }

private:
  Topology topo_;
  std::map<std::pair<NodeId, NodeId>, Link> links_;
  std::vector<quantum::QuantumLink> quantum_;
};

struct HopRecord {
  NodeId from = 0;
  NodeId to = 0;
  TransmitOutcome outcome;
};

struct DeliveryRecord {
  bool delivered = false;
  DropReason reason = DropReason::None;
  std::vector<NodeId> path;
  std::vector<HopRecord> hops;
  double arrival_time = 0.0;
  double sender_overhead_ms = 0.0;
  double verifier_overhead_ms = 0.0;
  /// arrival + verifier overhead - created_at, in ms (0 when undelivered)
  double latency_ms = 0.0;
};

/// Routes `msg` and walks it hop by hop starting at `t_send` (the time the
/// sender finished its security processing). Security overheads are added
/// at sender and verifier. Used for single-message transport; the
/// simulation drives the same per-hop `transmit` through its event queue.
DeliveryRecord send(Network& network, const Message& msg, double sender_overhead_ms, double verifier_overhead_ms,
                    engine::RngStream& routing, engine::RngStream& channel);

}  // namespace quam::net
