#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace quam::engine {

using Seconds = double;

class PastEvent : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

class UnknownStream : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

enum class EventKind : std::uint8_t {
  PhysicsTick,
  MessageArrival,
  MessageSend,
  AttackWindowStart,
  AttackWindowEnd,
  IdsProbe,
  KeyPoolTick,
  ChallengeIssue,
};

const char* to_string(EventKind kind);

/// Kind-specific data is carried as a small fixed record; the simulation
/// layer interprets the integer slots per kind (message id, node, link ...).
struct EventPayload {
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::int64_t c = 0;
};

struct Event {
  Seconds time = 0.0;
  EventKind kind = EventKind::PhysicsTick;
  EventPayload payload{};
  std::uint64_t sequence = 0;  // assigned by the queue
};

using EventHandle = std::uint64_t;

/// Binary min-heap on (time, sequence). Cancellation is lazy: cancelled
/// handles are skipped on pop.
class EventQueue {
public:
  /// Throws PastEvent when `event.time` precedes the current clock.
  EventHandle schedule(Event event);
  bool cancel(EventHandle handle);

  [[nodiscard]] bool empty() const;
  [[nodiscard]] std::size_t size() const { return heap_.size() - cancelled_.size(); }
  [[nodiscard]] std::optional<Seconds> next_time() const;

  /// Removes and returns the earliest live event, advancing `now()`.
  std::optional<Event> pop();

  [[nodiscard]] Seconds now() const { return now_; }

private:
  static bool later(const Event& x, const Event& y) {
    if (x.time != y.time) return x.time > y.time;
    return x.sequence > y.sequence;
  }
  void drop_cancelled_top() const;

  // mutable so that peeking can discard cancelled entries
  mutable std::vector<Event> heap_;
  mutable std::unordered_set<std::uint64_t> cancelled_;
  std::uint64_t next_sequence_ = 0;
  Seconds now_ = 0.0;
};

/// Deterministic 64-bit stream. Seeded from (master seed, label) so streams
/// with distinct labels never share state.
class RngStream {
public:
  RngStream() = default;
  RngStream(std::uint64_t master_seed, std::string label);

  [[nodiscard]] const std::string& label() const { return label_; }

  std::uint64_t next_u64() { return gen_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal(double mean, double stddev);
  double exponential(double mean);
  double beta(double a, double b);
  std::int64_t binomial(std::int64_t n, double p);
  std::size_t index(std::size_t n);  // uniform in [0, n)
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& generator() { return gen_; }

private:
  std::string label_;
  std::mt19937_64 gen_;
};

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view label);

/// Registry of named streams for one run. Only labels registered at run
/// start are retrievable.
class RngRegistry {
public:
  RngRegistry(std::uint64_t master_seed, const std::vector<std::string>& labels);

  RngStream& rng(const std::string& label);
  [[nodiscard]] std::uint64_t master_seed() const { return master_seed_; }

private:
  std::uint64_t master_seed_;
  std::map<std::string, RngStream> streams_;
};

/// Labels every simulation run registers.
const std::vector<std::string>& standard_stream_labels();

struct Clock {
  Seconds now = 0.0;
  Seconds physics_dt = 1.0;
  Seconds horizon = 3600.0;
};

}  // namespace quam::engine
