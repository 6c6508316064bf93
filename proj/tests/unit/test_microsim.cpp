#include <doctest.h>

#include <cmath>
#include <vector>

#include "flowcast/errors.hpp"
#include "flowcast/microsim.hpp"
#include "flowcast/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace flowcast;
using namespace flowcast::sim;

namespace {

// Bisection on the car-following law for the gap with zero acceleration.
double numeric_equilibrium_gap(double v, const IdmParams& p) {
  double lo = 1e-6, hi = 1e5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (idm_accel(v, 0.0, mid, p) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

csv::Timestamp at(const char* hhmm) { return *csv::parse_timestamp(std::string("2019-01-07T") + hhmm); }

}  // namespace

TEST_CASE("idm_accel limits") {
  const IdmParams p;
  CHECK(desired_gap(0.0, 0.0, p) == p.s0);
  CHECK(desired_gap(0.0, 5.0, p) == p.s0);
  CHECK(std::abs(idm_accel(p.v_desired, 0.0, kFreeGap, p)) < 1e-12);
  CHECK(idm_accel(0.0, 0.0, 1e6, p) == doctest::Approx(p.a).epsilon(1e-9));
  CHECK(idm_accel(10.0, 3.0, 5.0, p) < -p.b);  // closing fast on a short gap brakes hard
  CHECK_THROWS_AS(idm_accel(5.0, 0.0, 0.0, p), CollisionError);
  CHECK_THROWS_AS(idm_accel(5.0, 0.0, -1.0, p), CollisionError);
}

TEST_CASE("equilibrium gap: closed form, numeric root and oracle agree") {
  IdmParams p;
  for (double v : {1.0, 5.0, 10.0, 15.0, 16.0}) {
    const double s_e = equilibrium_gap(v, p);
    CHECK(s_e == doctest::Approx(numeric_equilibrium_gap(v, p)).epsilon(1e-9));
    CHECK(s_e == doctest::Approx(oracles::idm_equilibrium_gap(v, p.v_desired, p.s0, p.headway)).epsilon(1e-12));
    CHECK(std::abs(idm_accel(v, 0.0, s_e, p)) < 1e-12);
  }
  CHECK_THROWS_AS(equilibrium_gap(p.v_desired, p), DomainError);
}

TEST_CASE("step: free vehicle keeps its desired speed") {
  const IdmParams p;
  CorridorSim sim({1e6, p.v_desired}, p, 0.5);
  sim.place({0.0, p.v_desired, 0.0, false, 1, std::nullopt});
  for (int i = 1; i <= 1000; ++i) {
    sim.step();
    CHECK(std::abs(sim.vehicles()[0].speed - p.v_desired) < 1e-9);
    CHECK(sim.vehicles()[0].position == doctest::Approx(p.v_desired * 0.5 * i).epsilon(1e-12));
  }
}

TEST_CASE("step: follower stops behind a stopped leader without reversing") {
  const IdmParams p;
  CorridorSim sim({1e6, p.v_desired}, p, 0.5);
  sim.place({200.0, 0.0, 0.0, false, 1, 0.0});
  sim.place({50.0, 15.0, 0.0, false, 2, std::nullopt});
  double prev = 15.0;
  for (int i = 0; i < 600; ++i) {
    sim.step();
    const double v = sim.vehicles()[1].speed;
    CHECK(v >= 0.0);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
  CHECK(prev < 1e-3);
  CHECK(sim.min_gap() > 0.0);
  CHECK(sim.vehicles()[1].position < 200.0 - p.vehicle_length);
}

TEST_CASE("platoon settles to the analytic equilibrium gap") {
  const IdmParams p;
  const double v = 15.0;
  const double s_e = oracles::idm_equilibrium_gap(v, p.v_desired, p.s0, p.headway);
  CorridorSim sim({1e7, p.v_desired}, p, 0.5);
  sim.place({2000.0, v, 0.0, false, 0, v});
  double x = 2000.0;
  const double start_gaps[] = {60.0, 25.0, 45.0, 35.0, 80.0};
  const double start_speeds[] = {12.0, 15.0, 16.0, 10.0, 14.0};
  for (int i = 0; i < 5; ++i) {
    x -= p.vehicle_length + start_gaps[i];
    sim.place({x, start_speeds[i], 0.0, false, static_cast<std::uint64_t>(i + 1), std::nullopt});
  }
  for (int i = 0; i < 4000; ++i) sim.step();
  const auto& veh = sim.vehicles();
  for (std::size_t i = 1; i < veh.size(); ++i) {
    const double gap = veh[i - 1].position - p.vehicle_length - veh[i].position;
    CHECK(std::abs(gap - s_e) / s_e < 0.01);
    CHECK(veh[i].speed == doctest::Approx(v).epsilon(1e-6));
  }
}

TEST_CASE("insertion waits for a safe gap") {
  const IdmParams p;
  CorridorSim sim({4000.0, p.v_desired}, p, 0.5);
  sim.schedule({0.0, 0.0, 0.0, false, 1, std::nullopt});
  sim.schedule({0.0, 0.0, 0.0, false, 2, std::nullopt});
  sim.step();
  CHECK(sim.vehicles().size() == 1);
  CHECK(sim.queued() == 1);
  for (int i = 0; i < 10; ++i) sim.step();
  CHECK(sim.vehicles().size() == 2);

  CorridorSim other({4000.0, p.v_desired}, p, 0.5);
  other.schedule({0.0, 0.0, 10.0, false, 1, std::nullopt});
  CHECK_THROWS_AS(other.schedule({0.0, 0.0, 5.0, false, 2, std::nullopt}), OrderError);
}

TEST_CASE("free-flow VUT travel time is length over desired speed") {
  const IdmParams p;
  const Corridor c;
  SimConfig cfg;
  cfg.demand_vph = 1e-9;
  cfg.n_runs = 20;
  const auto d = monte_carlo(c, p, cfg);
  REQUIRE(d.samples.size() == 20);
  const double expected_min = c.length / p.v_desired / 60.0;
  for (double t : d.samples) CHECK(std::abs(t - expected_min) * 60.0 <= cfg.dt);
}

TEST_CASE("monte_carlo: determinism, sample count and safety") {
  const IdmParams p;
  const Corridor c;
  SimConfig cfg;
  cfg.demand_vph = 900;
  cfg.n_runs = 30;
  const auto a = monte_carlo(c, p, cfg), b = monte_carlo(c, p, cfg);
  CHECK(a.samples == b.samples);
  CHECK(a.seeds == b.seeds);
  CHECK(a.samples.size() + a.excluded.size() == 30);
  for (double t : a.samples) CHECK(t > 0.0);

  cfg.seed = 43;
  CHECK(monte_carlo(c, p, cfg).samples != a.samples);
}

TEST_CASE("heavy demand never collides and respects speed bounds") {
  const IdmParams p;
  const Corridor c;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    CorridorSim sim(c, p, 0.5);
    double t = 0.0;
    for (int i = 0; i < 600; ++i) {
      t += rng.exponential(1800.0 / 3600.0);
      sim.schedule({0.0, 0.0, t, false, static_cast<std::uint64_t>(i), std::nullopt});
    }
    while (sim.time() < 1500.0) sim.step();
    CHECK(sim.min_gap() > 0.0);
    CHECK(sim.max_speed() <= std::max(p.v_desired, c.speed_limit) + 1e-9);
    CHECK(sim.exits().size() > 100);
  }
}

TEST_CASE("horizon cap excludes runs") {
  const IdmParams p;
  Corridor c;
  c.length = 1e5;
  SimConfig cfg;
  cfg.demand_vph = 10;
  cfg.n_runs = 3;
  cfg.max_horizon_s = 60.0;
  const auto d = monte_carlo(c, p, cfg);
  CHECK(d.samples.empty());
  CHECK(d.excluded.size() == 3);
  CHECK_THROWS_AS(d.summary(), SizeError);
}

TEST_CASE("distribution summary and exports") {
  TravelTimeDistribution d;
  d.samples = {4.0, 5.0, 6.0, 5.0};
  d.seeds = {1, 2, 3, 4};
  const auto s = d.summary();
  CHECK(s.mean == 5.0);
  CHECK(s.std == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(s.p50 == 5.0);
  CHECK(percentile({1, 2, 3, 4, 5}, 95) == doctest::Approx(4.8));
  testing::TempDir dir;
  d.write_csv(dir / "tt.csv");
  const auto text = testing::slurp(dir / "tt.csv");
  CHECK(text.rfind("run,seed,travel_time_min\n0,1,4\n", 0) == 0);
  d.write_summary_json(dir / "s.json");
  CHECK(testing::slurp(dir / "s.json").find("\"excluded\": 0") != std::string::npos);
}

TEST_CASE("demand_from_flows") {
  const std::vector<csv::Timestamp> times{at("07:30"), at("07:45"), at("08:00"), at("08:15"), at("08:30")};
  const std::vector<double> upper{100, 110, 120, 130, 999};
  CHECK(demand_from_flows(upper, times, at("07:30"), at("08:30")) == 460.0);
  const std::vector<double> flat{90, 90, 90, 90, 90};
  CHECK(demand_from_flows(flat, times, at("07:30"), at("08:30")) == 360.0);
  CHECK_THROWS_AS(demand_from_flows(upper, times, at("09:00"), at("10:00")), DomainError);
  CHECK_THROWS_AS(demand_from_flows(upper, times, at("08:00"), at("08:00")), SizeError);
}

TEST_CASE("parameter validation") {
  IdmParams p;
  p.b = 0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  SimConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), DomainError);  // demand unset
  cfg.demand_vph = 100;
  cfg.n_runs = 0;
  CHECK_THROWS_AS(cfg.validate(), DomainError);
}
