#include "quam/engine.hpp"

#include <doctest.h>

#include <cmath>

using namespace quam::engine;

TEST_CASE("events pop in time order, ties in insertion order") {
  EventQueue q;
  q.schedule({2.0, EventKind::PhysicsTick, {1, 0, 0}, 0});
  q.schedule({1.0, EventKind::MessageSend, {2, 0, 0}, 0});
  q.schedule({1.0, EventKind::IdsProbe, {3, 0, 0}, 0});
  q.schedule({0.5, EventKind::KeyPoolTick, {4, 0, 0}, 0});
  std::vector<std::int64_t> order;
  while (auto e = q.pop()) order.push_back(e->payload.a);
  CHECK(order == std::vector<std::int64_t>{4, 2, 3, 1});
  CHECK(q.now() == 2.0);
}

TEST_CASE("cancelled events are skipped by pop and next_time") {
  EventQueue q;
  auto h1 = q.schedule({1.0, EventKind::PhysicsTick, {1, 0, 0}, 0});
  q.schedule({3.0, EventKind::PhysicsTick, {2, 0, 0}, 0});
  CHECK(q.size() == 2);
  CHECK(q.cancel(h1));
  CHECK_FALSE(q.cancel(h1));
  CHECK(q.size() == 1);
  REQUIRE(q.next_time());
  CHECK(*q.next_time() == 3.0);
  CHECK(q.pop()->payload.a == 2);
  CHECK(q.empty());
  CHECK_FALSE(q.pop());
}

TEST_CASE("scheduling in the past throws") {
  EventQueue q;
  q.schedule({5.0, EventKind::PhysicsTick, {}, 0});
  q.pop();
  CHECK_THROWS_AS(q.schedule({4.0, EventKind::PhysicsTick, {}, 0}), PastEvent);
  CHECK_NOTHROW(q.schedule({5.0, EventKind::PhysicsTick, {}, 0}));
}

TEST_CASE("streams are reproducible and independent by label") {
  RngStream a(42, "wind"), b(42, "wind"), c(42, "load"), d(43, "wind");
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
  }
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}

TEST_CASE("drawing from one stream leaves the others untouched") {
  RngRegistry r1(7, standard_stream_labels()), r2(7, standard_stream_labels());
  for (int i = 0; i < 1000; ++i) r1.rng("attack").uniform();
  for (int i = 0; i < 10; ++i) CHECK(r1.rng("wind").uniform() == r2.rng("wind").uniform());
  CHECK_THROWS_AS(r1.rng("nope"), UnknownStream);
}

TEST_CASE("distribution moments") {
  RngStream s(11, "test");
  const int n = 200000;
  double sum_e = 0, sum_n = 0, sum_n2 = 0, sum_u = 0;
  std::int64_t sum_b = 0;
  for (int i = 0; i < n; ++i) {
    sum_e += s.exponential(30.0);
    const double x = s.normal(2.0, 3.0);
    sum_n += x;
    sum_n2 += x * x;
    sum_u += s.uniform();
    sum_b += s.binomial(200, 0.011);
  }
  CHECK(sum_e / n == doctest::Approx(30.0).epsilon(0.01));
  CHECK(sum_n / n == doctest::Approx(2.0).epsilon(0.01));
  CHECK(std::sqrt(sum_n2 / n - std::pow(sum_n / n, 2)) == doctest::Approx(3.0).epsilon(0.01));
  CHECK(sum_u / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(static_cast<double>(sum_b) / n == doctest::Approx(2.2).epsilon(0.01));
}

TEST_CASE("index stays in range") {
  RngStream s(3, "routing");
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 5000; ++i) ++hits.at(s.index(5));
  for (int h : hits) CHECK(h > 800);
}
