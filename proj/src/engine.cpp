#include "quam/engine.hpp"

#include <algorithm>
#include <cmath>

namespace quam::engine {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::PhysicsTick: return "PhysicsTick";
    case EventKind::MessageArrival: return "MessageArrival";
    case EventKind::MessageSend: return "MessageSend";
    case EventKind::AttackWindowStart: return "AttackWindowStart";
    case EventKind::AttackWindowEnd: return "AttackWindowEnd";
    case EventKind::IdsProbe: return "IdsProbe";
    case EventKind::KeyPoolTick: return "KeyPoolTick";
    case EventKind::ChallengeIssue: return "ChallengeIssue";
  }
  return "?";
}

EventHandle EventQueue::schedule(Event event) {
  if (event.time < now_) {
    throw PastEvent("event at t=" + std::to_string(event.time) +
                    " scheduled before now=" + std::to_string(now_));
  }
  event.sequence = next_sequence_++;
  heap_.push_back(event);
  std::push_heap(heap_.begin(), heap_.end(), later);
  return event.sequence;
}

bool EventQueue::cancel(EventHandle handle) {
  if (handle >= next_sequence_) return false;
  const bool live = std::any_of(heap_.begin(), heap_.end(),
                                [&](const Event& e) { return e.sequence == handle; });
  if (!live) return false;
  return cancelled_.insert(handle).second;
}

void EventQueue::drop_cancelled_top() const {
  while (!heap_.empty() && cancelled_.count(heap_.front().sequence) != 0) {
    cancelled_.erase(heap_.front().sequence);
    std::pop_heap(heap_.begin(), heap_.end(), later);
    heap_.pop_back();
  }
}

bool EventQueue::empty() const { return size() == 0; }

std::optional<Seconds> EventQueue::next_time() const {
  drop_cancelled_top();
  if (heap_.empty()) return std::nullopt;
  return heap_.front().time;
}

std::optional<Event> EventQueue::pop() {
  drop_cancelled_top();
  if (heap_.empty()) return std::nullopt;
  std::pop_heap(heap_.begin(), heap_.end(), later);
  Event e = heap_.back();
  heap_.pop_back();
  now_ = e.time;
  return e;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view label) {
  return splitmix64(splitmix64(master_seed) ^ fnv1a(label));
}

RngStream::RngStream(std::uint64_t master_seed, std::string label)
    : label_(std::move(label)), gen_(derive_seed(master_seed, label_)) {}

double RngStream::uniform() {
  // 53 random mantissa bits; independent of the standard library's
  // generate_canonical so draws are reproducible across toolchains.
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double RngStream::normal(double mean, double stddev) {
  // Box-Muller without caching: one call consumes exactly two draws.
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  return mean + stddev * z;
}

double RngStream::exponential(double mean) {
  const double u = uniform();
  return -mean * std::log1p(-u);
}

double RngStream::beta(double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(gen_);
  const double y = gb(gen_);
  return x / (x + y);
}

std::int64_t RngStream::binomial(std::int64_t n, double p) {
  if (p <= 0.0 || n <= 0) return 0;
  if (p >= 1.0) return n;
  std::int64_t k = 0;
  for (std::int64_t i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
  return k;
}

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) return 0;
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

RngRegistry::RngRegistry(std::uint64_t master_seed, const std::vector<std::string>& labels)
    : master_seed_(master_seed) {
  for (const auto& l : labels) streams_.emplace(l, RngStream(master_seed, l));
}

RngStream& RngRegistry::rng(const std::string& label) {
  auto it = streams_.find(label);
  if (it == streams_.end()) throw UnknownStream("unknown rng stream: " + label);
  return it->second;
}

const std::vector<std::string>& standard_stream_labels() {
  static const std::vector<std::string> labels = {
      "wind", "load", "sensor", "channel", "routing", "attack", "probe", "qrng", "kak", "defense",
  };
  return labels;
}

}  // namespace quam::engine
