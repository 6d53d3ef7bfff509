#include "quam/physical.hpp"

#include <doctest.h>

#include <cmath>

using namespace quam::physical;
using doctest::Approx;

namespace {

NodeState node_with_soc(double soc) {
  NodeState n;
  n.battery.soc_kwh = soc;
  return n;
}

}  // namespace

TEST_CASE("tier validation") {
  CHECK_NOTHROW(validate_tiers(default_tiers()));
  CHECK_THROWS_AS(validate_tiers({{"a", 0.5}, {"b", 0.4}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_tiers({{"a", 1.2}, {"b", -0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_tiers({}), std::invalid_argument);
}

TEST_CASE("deficit is met by battery before import") {
  auto n = node_with_soc(15.0);
  const auto r = dispatch(n, {10.0, 10.0, 0.0}, 60.0, 35.0, false, 1.0);
  CHECK(r.battery_flow_kw == Approx(40.0));
  CHECK(r.import_kw == 0.0);
  CHECK(r.served_kw == Approx(60.0));
  CHECK(r.shed_kw == 0.0);
  CHECK(n.battery.soc_kwh == Approx(15.0 - 40.0 / 3600.0));
  CHECK(std::abs(r.balance_error()) < 1e-9);
}

TEST_CASE("import then shedding from the least critical tier") {
  auto n = node_with_soc(5.0);  // at reserve
  const auto r = dispatch(n, {}, 100.0, 35.0, false, 1.0);
  CHECK(r.battery_flow_kw == 0.0);
  CHECK(r.import_kw == Approx(35.0));
  CHECK(r.shed_by_tier[2] == Approx(40.0));
  CHECK(r.shed_by_tier[1] == Approx(25.0));
  CHECK(r.shed_by_tier[0] == 0.0);
  CHECK(r.served_kw == Approx(35.0));
  CHECK(std::abs(r.balance_error()) < 1e-9);
}

TEST_CASE("islanded nodes cannot import") {
  auto n = node_with_soc(5.0);
  const auto r = dispatch(n, {}, 100.0, 35.0, true, 1.0);
  CHECK(r.import_kw == 0.0);
  CHECK(r.shed_kw == Approx(100.0));
  CHECK(r.shed_by_tier[0] == Approx(30.0));
  CHECK(r.served_kw == 0.0);
}

TEST_CASE("surplus charges up to the charge limit and curtails the rest") {
  auto n = node_with_soc(15.0);
  const auto r = dispatch(n, {60.0, 20.0, 20.0}, 40.0, 35.0, false, 1.0);
  CHECK(r.charge_input_kw == Approx(50.0));
  CHECK(r.battery_flow_kw == Approx(-50.0));
  CHECK(r.curtailed_kw == Approx(10.0));
  CHECK(r.served_kw == Approx(40.0));
  CHECK(n.battery.soc_kwh == Approx(15.0 + 50.0 * 0.9 / 3600.0));
  CHECK(std::abs(r.balance_error()) < 1e-9);
}

TEST_CASE("a full battery takes no charge") {
  auto n = node_with_soc(60.0);
  const auto r = dispatch(n, {100.0, 0.0, 0.0}, 40.0, 35.0, false, 1.0);
  CHECK(r.charge_input_kw == 0.0);
  CHECK(r.curtailed_kw == Approx(60.0));
}

TEST_CASE("commanded shed drops the tier before balancing") {
  auto n = node_with_soc(15.0);
  n.commanded_shed = {false, false, true};
  const auto r = dispatch(n, {40.0, 0.0, 0.0}, 60.0, 35.0, false, 1.0);
  CHECK(r.shed_by_tier[2] == Approx(24.0));
  CHECK(r.served_kw == Approx(36.0));
  CHECK(r.charge_input_kw == Approx(4.0));
}

TEST_CASE("energy balance holds over random dispatch") {
  quam::engine::RngStream s(17, "load");
  auto n = node_with_soc(30.0);
  for (int i = 0; i < 5000; ++i) {
    const DispatchInputs g{s.uniform(0, 40), s.uniform(0, 30), s.uniform(0, 20)};
    const bool island = s.uniform() < 0.2;
    if (i % 97 == 0) n.commanded_shed = {false, s.uniform() < 0.5, s.uniform() < 0.5};
    const auto r = dispatch(n, g, s.uniform(0, 150), 35.0, island, 1.0);
    CHECK(std::abs(r.balance_error()) < 1e-9);
    CHECK(r.served_kw + r.shed_kw == Approx(r.demand_kw));
    CHECK(n.battery.soc_kwh >= 0.0);
    CHECK(n.battery.soc_kwh <= n.battery.capacity_kwh + 1e-12);
  }
}

TEST_CASE("swing equation step and steady state") {
  FrequencyState f;
  f = step_frequency(f, 0.1, 1.0);
  CHECK(f.delta_f_hz == Approx(0.01));
  for (int i = 0; i < 2000; ++i) f = step_frequency(f, 0.1, 0.1);
  CHECK(f.delta_f_hz == Approx(0.1).epsilon(1e-6));
}

TEST_CASE("solar half sine") {
  const SolarWindow w{0.0, 3600.0};
  CHECK(solar_output(0.0, 30.0, w) == 0.0);
  CHECK(solar_output(1800.0, 30.0, w) == Approx(30.0));
  CHECK(solar_output(900.0, 30.0, w) == Approx(30.0 * std::sqrt(0.5)));
  CHECK(solar_output(4000.0, 30.0, w) == 0.0);
}

TEST_CASE("wind capacity factor mean") {
  WindModel w;
  quam::engine::RngStream s(3, "wind");
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double p = w.next(20.0, s);
    CHECK(p >= 0.0);
    CHECK(p <= 20.0);
    sum += p / 20.0;
  }
  CHECK(sum / n == Approx(2.0 / 7.0).epsilon(0.02));
  CHECK(wind_output(20.0, 0.25) == Approx(5.0));
}

TEST_CASE("EENS integration") {
  CHECK(accumulate_eens(36.0, 100.0, 1.0) == Approx(2.0));
  CHECK(accumulate_eens(-5.0, 100.0, 1.0) == 1.0);
}
