#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "flowcast/csv.hpp"

namespace flowcast::sim {

struct IdmParams {
  double a = 1.5;               // max acceleration, m/s^2
  double b = 2.0;               // comfortable deceleration, m/s^2
  double v_desired = 16.67;     // m/s
  double headway = 1.5;         // s
  double s0 = 2.0;              // minimum static gap, m
  double vehicle_length = 5.0;  // m

  void validate() const;
};

// Gap used in place of a leader when the road ahead is empty.
inline constexpr double kFreeGap = 1e9;

// s* = s0 + max(0, v T + v dv / (2 sqrt(a b))), dv = v - v_leader.
double desired_gap(double v, double dv, const IdmParams& p);
// a [1 - (v / v0)^4 - (s* / s)^2]. Throws CollisionError for s <= 0.
double idm_accel(double v, double dv, double s, const IdmParams& p);
// Gap at which a vehicle at speed v behind an equal-speed leader has zero acceleration.
double equilibrium_gap(double v, const IdmParams& p);

struct Corridor {
  double length = 4000.0;       // m, vehicles enter at 0 and leave at `length`
  double speed_limit = 16.67;   // m/s

  void validate() const;
};

struct VehicleState {
  double position = 0.0;  // front bumper, m
  double speed = 0.0;     // m/s
  double departure_time = 0.0;  // scheduled, s
  bool is_vut = false;
  std::uint64_t id = 0;
  std::optional<double> fixed_speed;  // holds this speed regardless of traffic
};

struct ExitRecord {
  std::uint64_t id = 0;
  bool is_vut = false;
  double departure_time = 0.0;
  double exit_time = 0.0;
  double travel_time() const { return exit_time - departure_time; }
};

// Single-lane IDM simulation. Vehicles are kept front first; new vehicles wait
// in a FIFO queue at the entrance until the gap to the last vehicle is safe.
class CorridorSim {
 public:
  CorridorSim(Corridor corridor, IdmParams params, double dt, double start_time = 0.0);

  // Queues a vehicle for entry; departures must be given in nondecreasing order.
  void schedule(VehicleState vehicle);
  // Places a vehicle directly on the road. It must be behind every vehicle already there.
  void place(VehicleState vehicle);

  // One semi-implicit Euler step: accelerations from the current state, then
  // v' = max(0, v + a dt), x' = x + v' dt. Exited vehicles are removed.
  void step();

  double time() const { return time_; }
  double dt() const { return dt_; }
  const std::vector<VehicleState>& vehicles() const { return road_; }
  std::size_t queued() const { return queue_.size(); }
  const std::vector<ExitRecord>& exits() const { return exits_; }
  std::optional<ExitRecord> vut_exit() const;
  // Smallest bumper-to-bumper gap seen after any step so far.
  double min_gap() const { return min_gap_; }
  double max_speed() const { return max_speed_; }

 private:
  void admit();

  Corridor corridor_;
  IdmParams params_;
  double dt_;
  double time_;
  std::vector<VehicleState> road_;
  std::deque<VehicleState> queue_;
  std::vector<ExitRecord> exits_;
  std::vector<double> accel_;
  double min_gap_ = kFreeGap;
  double max_speed_ = 0.0;
};

struct SimConfig {
  double dt = 0.5;                // s
  std::size_t n_runs = 200;
  double demand_vph = 0.0;        // vehicles per hour
  double window_s = 3600.0;       // VUT departs uniformly within [0, window_s)
  double max_horizon_s = 7200.0;  // runs whose VUT is still on the road this long after departure are excluded
  std::uint64_t seed = 42;

  void validate() const;
};

struct DistributionSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double p5 = 0.0, p50 = 0.0, p95 = 0.0;
};

struct TravelTimeDistribution {
  std::vector<double> samples;          // minutes, one per completed run
  std::vector<std::uint64_t> seeds;     // per-run seed of each sample
  std::vector<std::uint64_t> excluded;  // seeds of runs that hit the horizon cap

  DistributionSummary summary() const;
  // `run,seed,travel_time_min`
  void write_csv(const std::filesystem::path& path) const;
  // mean, std, p5, p50, p95, excluded
  void write_summary_json(const std::filesystem::path& path) const;
};

// Linear-interpolated percentile (q in [0, 100]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

// One run: Poisson arrivals at the demand rate ahead of a VUT whose departure
// is uniform over the window. Returns the VUT travel time in seconds, or
// nullopt if the horizon cap was reached.
std::optional<double> simulate_run(const Corridor& corridor, const IdmParams& p, const SimConfig& cfg,
                                   std::uint64_t run_seed);

// Runs are seeded with derive_seed(cfg.seed, run). The same seed yields the
// same uniform draws at every demand level.
TravelTimeDistribution monte_carlo(const Corridor& corridor, const IdmParams& p, const SimConfig& cfg);

// Mean forecast upper bound (vehicles per 15 min) over [start, end), in vehicles per hour.
double demand_from_flows(std::span<const double> upper_bounds, std::span<const csv::Timestamp> times,
                         csv::Timestamp start, csv::Timestamp end);

}  // namespace flowcast::sim
