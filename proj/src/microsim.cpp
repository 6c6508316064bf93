#include "flowcast/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "flowcast/data.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/rng.hpp"

namespace flowcast::sim {

void IdmParams::validate() const {
  if (!(a > 0 && b > 0 && v_desired > 0 && headway > 0 && s0 > 0 && vehicle_length > 0)) {
    throw DomainError("IDM parameters must all be positive");
  }
}

void Corridor::validate() const {
  if (!(length > 0)) throw DomainError("corridor length must be positive");
  if (!(speed_limit > 0)) throw DomainError("corridor speed limit must be positive");
}

void SimConfig::validate() const {
  if (!(dt > 0)) throw DomainError("dt must be positive");
  if (n_runs == 0) throw DomainError("n_runs must be at least 1");
  if (!(demand_vph > 0) || !std::isfinite(demand_vph)) throw DomainError("demand must be positive");
  if (!(window_s > 0)) throw DomainError("departure window must be positive");
  if (!(max_horizon_s > 0)) throw DomainError("max horizon must be positive");
}

double desired_gap(double v, double dv, const IdmParams& p) {
  return p.s0 + std::max(0.0, v * p.headway + v * dv / (2.0 * std::sqrt(p.a * p.b)));
}

double idm_accel(double v, double dv, double s, const IdmParams& p) {
  if (!(s > 0.0)) throw CollisionError("gap " + std::to_string(s) + " m is not positive");
  const double ratio = v / p.v_desired;
  const double interaction = desired_gap(v, dv, p) / s;
  return p.a * (1.0 - ratio * ratio * ratio * ratio - interaction * interaction);
}

double equilibrium_gap(double v, const IdmParams& p) {
  const double ratio = v / p.v_desired;
  const double free = 1.0 - ratio * ratio * ratio * ratio;
  if (!(free > 0.0)) throw DomainError("no equilibrium gap at or above the desired speed");
  return desired_gap(v, 0.0, p) / std::sqrt(free);
}

// ---------------------------------------------------------------------------

CorridorSim::CorridorSim(Corridor corridor, IdmParams params, double dt, double start_time)
    : corridor_(corridor), params_(params), dt_(dt), time_(start_time) {
  corridor_.validate();
  params_.validate();
  if (!(dt > 0)) throw DomainError("dt must be positive");
}

void CorridorSim::schedule(VehicleState vehicle) {
  if (!queue_.empty() && vehicle.departure_time < queue_.back().departure_time) {
    throw OrderError("vehicles must be scheduled in departure order");
  }
  queue_.push_back(vehicle);
}

void CorridorSim::place(VehicleState vehicle) {
  if (!road_.empty()) {
    const double gap = road_.back().position - params_.vehicle_length - vehicle.position;
    if (!(gap > 0.0)) throw CollisionError("placed vehicle overlaps the one ahead");
  }
  road_.push_back(vehicle);
}

void CorridorSim::admit() {
  while (!queue_.empty() && queue_.front().departure_time <= time_ + 1e-9) {
    VehicleState v = queue_.front();
    v.position = 0.0;
    if (road_.empty()) {
      v.speed = v.fixed_speed.value_or(params_.v_desired);
    } else {
      const auto& rear = road_.back();
      const double gap = rear.position - params_.vehicle_length;
      const double speed = v.fixed_speed.value_or(std::min(params_.v_desired, rear.speed));
      if (gap < desired_gap(speed, speed - rear.speed, params_)) break;
      v.speed = speed;
    }
    road_.push_back(v);
    queue_.pop_front();
  }
}

void CorridorSim::step() {
  admit();
  const std::size_t n = road_.size();
  accel_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& me = road_[i];
    if (i == 0) {
      accel_[i] = idm_accel(me.speed, 0.0, kFreeGap, params_);
    } else {
      const auto& lead = road_[i - 1];
      accel_[i] = idm_accel(me.speed, me.speed - lead.speed,
                            lead.position - params_.vehicle_length - me.position, params_);
    }
  }
  const double t0 = time_;
  std::size_t exited = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& me = road_[i];
    const double x0 = me.position;
    me.speed = me.fixed_speed ? *me.fixed_speed : std::max(0.0, me.speed + accel_[i] * dt_);
    me.position = x0 + me.speed * dt_;
    max_speed_ = std::max(max_speed_, me.speed);
    if (me.position >= corridor_.length && i == exited) {
      const double frac = (corridor_.length - x0) / (me.position - x0);
      exits_.push_back({me.id, me.is_vut, me.departure_time, t0 + frac * dt_});
      ++exited;
    }
  }
  road_.erase(road_.begin(), road_.begin() + static_cast<std::ptrdiff_t>(exited));
  time_ = t0 + dt_;
  for (std::size_t i = 1; i < road_.size(); ++i) {
    const double gap = road_[i - 1].position - params_.vehicle_length - road_[i].position;
    if (!(gap > 0.0)) {
      throw CollisionError("vehicle " + std::to_string(road_[i].id) + " collided at t=" + std::to_string(time_));
    }
    min_gap_ = std::min(min_gap_, gap);
  }
}

std::optional<ExitRecord> CorridorSim::vut_exit() const {
  for (const auto& e : exits_)
    if (e.is_vut) return e;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw SizeError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

DistributionSummary TravelTimeDistribution::summary() const {
  if (samples.empty()) throw SizeError("travel-time distribution has no samples");
  DistributionSummary s;
  const auto n = static_cast<double>(samples.size());
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - s.mean) * (v - s.mean);
  s.std = samples.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.p5 = percentile(samples, 5);
  s.p50 = percentile(samples, 50);
  s.p95 = percentile(samples, 95);
  return s;
}

void TravelTimeDistribution::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "run,seed,travel_time_min\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << i << ',' << seeds[i] << ',' << csv::format_double(samples[i]) << '\n';
  }
  if (!out) throw InputError("failed writing " + path.string());
}

void TravelTimeDistribution::write_summary_json(const std::filesystem::path& path) const {
  const auto s = summary();
  nlohmann::ordered_json j;
  j["runs"] = samples.size();
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["p5"] = s.p5;
  j["p50"] = s.p50;
  j["p95"] = s.p95;
  j["excluded"] = excluded.size();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw InputError("failed writing " + path.string());
}

std::optional<double> simulate_run(const Corridor& corridor, const IdmParams& p, const SimConfig& cfg,
                                   std::uint64_t run_seed) {
  Rng rng(run_seed);
  const double t_vut = rng.uniform(0.0, cfg.window_s);
  const double rate = cfg.demand_vph / 3600.0;
  std::vector<double> departures;
  for (double t = rng.exponential(rate); t < t_vut; t += rng.exponential(rate)) departures.push_back(t);

  // Align the step grid so the VUT departs exactly on a step boundary.
  const double k = std::ceil(t_vut / cfg.dt - 1e-9);
  const double start = t_vut - k * cfg.dt;
  CorridorSim sim(corridor, p, cfg.dt, start);
  std::uint64_t id = 0;
  for (double t : departures) sim.schedule({0.0, 0.0, t, false, id++, std::nullopt});
  sim.schedule({0.0, 0.0, t_vut, true, id++, std::nullopt});

  const double deadline = t_vut + cfg.max_horizon_s;
  while (sim.time() <= deadline) {
    sim.step();
    if (auto e = sim.vut_exit()) return e->travel_time();
  }
  return std::nullopt;
}

TravelTimeDistribution monte_carlo(const Corridor& corridor, const IdmParams& p, const SimConfig& cfg) {
  cfg.validate();
  corridor.validate();
  p.validate();
  TravelTimeDistribution out;
  for (std::size_t run = 0; run < cfg.n_runs; ++run) {
    const std::uint64_t seed = derive_seed(cfg.seed, run);
    if (auto tt = simulate_run(corridor, p, cfg, seed)) {
      out.samples.push_back(*tt / 60.0);
      out.seeds.push_back(seed);
    } else {
      out.excluded.push_back(seed);
    }
  }
  return out;
}

double demand_from_flows(std::span<const double> upper_bounds, std::span<const csv::Timestamp> times,
                         csv::Timestamp start, csv::Timestamp end) {
  if (upper_bounds.size() != times.size()) throw StructuralError("demand_from_flows: values and times differ in length");
  if (!(start < end)) throw SizeError("demand window is empty");
  if (times.empty() || start < times.front() || end > times.back() + data::kInterval) {
    throw DomainError("demand window is not covered by the forecasts");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] >= start && times[i] < end) {
      sum += upper_bounds[i];
      ++n;
    }
  }
  if (n == 0) throw SizeError("no forecasts fall inside the demand window");
  return sum / static_cast<double>(n) * 4.0;
}

}  // namespace flowcast::sim
