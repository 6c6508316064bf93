#include "flowcast/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "flowcast/csv.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/hash.hpp"

namespace flowcast::graph {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Tensor WeightedAdjacency::row_normalized() const {
  Tensor out = modified;
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += modified(i, j);
    if (sum <= 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) out(i, j) = modified(i, j) / sum;
  }
  return out;
}

std::uint64_t WeightedAdjacency::fingerprint() const {
  Fnv1a h;
  h.value(static_cast<std::uint64_t>(size()));
  h.doubles(modified.data());
  return h.digest();
}

AvailabilityVector availability_scores(std::span<const data::StationMeta> stations) {
  if (stations.empty()) throw SizeError("availability needs at least one station");
  std::uint64_t best = 0;
  for (const auto& s : stations) {
    if (s.kind != data::StationKind::NCCS) continue;
    if (s.record_count == 0) {
      throw DomainError("N-CCS station '" + s.station_id + "' has no records");
    }
    best = std::max(best, s.record_count);
  }
  AvailabilityVector out;
  out.scores.reserve(stations.size());
  for (const auto& s : stations) {
    out.scores.push_back(s.kind == data::StationKind::CCS
                             ? 1.0
                             : static_cast<double>(s.record_count) / static_cast<double>(best));
  }
  return out;
}

TravelTimeMatrix travel_times(const Tensor& distances_m, const Tensor& speeds_mps) {
  require_same_shape(distances_m, speeds_mps, "travel_times");
  if (distances_m.rank() != 2 || distances_m.dim(0) != distances_m.dim(1)) {
    throw StructuralError("distance matrix must be square");
  }
  const std::size_t n = distances_m.dim(0);
  TravelTimeMatrix out{Tensor({n, n})};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = distances_m(i, j);
      if (std::isnan(d) || d < 0.0) {
        throw DomainError("distance " + std::to_string(i) + "->" + std::to_string(j) +
                          " must be nonnegative");
      }
      if (std::isinf(d)) {
        out.seconds(i, j) = kInf;
        continue;
      }
      const double s = speeds_mps(i, j);
      if (!(s > 0.0) || std::isinf(s)) {
        throw DomainError("speed " + std::to_string(i) + "->" + std::to_string(j) +
                          " must be positive and finite");
      }
      out.seconds(i, j) = d / s;
    }
  }
  return out;
}

WeightedAdjacency build_adjacency(const TravelTimeMatrix& travel, const AvailabilityVector& avail,
                                  const AdjacencyOptions& options) {
  const std::size_t n = travel.size();
  if (n == 0 || travel.seconds.rank() != 2 || travel.seconds.dim(1) != n) {
    throw StructuralError("travel-time matrix must be square and nonempty");
  }
  if (avail.size() != n) {
    throw StructuralError("availability has " + std::to_string(avail.size()) +
                          " entries, travel-time matrix has " + std::to_string(n));
  }
  if (!(options.sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
  if (!(options.epsilon > 0.0)) throw DomainError("epsilon must be positive");
  for (double a : avail.scores) {
    if (!(a > 0.0 && a <= 1.0)) throw DomainError("availability scores must lie in (0, 1]");
  }

  double t_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double t = travel.seconds(i, j);
      if (std::isnan(t) || t < 0.0) throw DomainError("travel times must be nonnegative");
      if (i != j && std::isfinite(t)) t_max = std::max(t_max, t);
    }
  }
  if (!(t_max > 0.0)) throw DegenerateInputError("travel-time matrix has no positive entry");

  WeightedAdjacency out;
  out.mode = options.mode;
  out.sigma2 = options.sigma2;
  out.epsilon = options.epsilon;
  out.combined = Tensor({n, n});
  out.modified = Tensor({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double w;
      if (i == j) {
        w = 1.0;
      } else if (!std::isfinite(travel.seconds(i, j))) {
        w = 0.0;
      } else {
        const double t_norm = travel.seconds(i, j) / t_max;
        w = options.mode == KernelMode::Gaussian
                ? std::exp(-(t_norm * t_norm) / (2.0 * options.sigma2))
                : 1.0 / (t_norm + options.epsilon);
      }
      out.combined(i, j) = w;
      out.modified(i, j) = w * avail.scores[i] * avail.scores[j];
    }
  }
  return out;
}

TravelTimeMatrix load_travel_times(const std::filesystem::path& path,
                                   std::span<const std::string> station_order) {
  const auto table = csv::read(path);
  const bool derived = csv::header_is(table, {"from_id", "to_id", "distance_m", "speed_mps"});
  if (!derived) csv::require_header(table, {"from_id", "to_id", "seconds"});

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < station_order.size(); ++i) index.emplace(station_order[i], i);
  const std::size_t n = station_order.size();
  Tensor distances({n, n}, kInf);
  Tensor speeds({n, n}, 1.0);
  Tensor seconds({n, n}, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    distances(i, i) = 0.0;
    seconds(i, i) = 0.0;
  }
  std::vector<bool> filled(n * n, false);
  for (const auto& row : table.rows) {
    const auto from = index.find(row.fields[0]);
    const auto to = index.find(row.fields[1]);
    // Pairs touching stations outside the frame are ignored.
    if (from == index.end() || to == index.end()) continue;
    const std::size_t i = from->second, j = to->second;
    if (filled[i * n + j]) {
      throw DuplicationError(table.source + ":" + std::to_string(row.line) + ": duplicate pair " +
                             row.fields[0] + "->" + row.fields[1]);
    }
    filled[i * n + j] = true;
    if (i == j) continue;
    if (derived) {
      distances(i, j) = csv::parse_double(table, row, 2);
      speeds(i, j) = csv::parse_double(table, row, 3);
    } else {
      seconds(i, j) = csv::parse_double(table, row, 2);
      if (seconds(i, j) < 0.0) throw ParseError(table.source, row.line, "negative travel time");
    }
  }
  if (derived) return travel_times(distances, speeds);
  return TravelTimeMatrix{std::move(seconds)};
}

KernelMode parse_kernel_mode(const std::string& text) {
  if (text == "gaussian") return KernelMode::Gaussian;
  if (text == "inverse_time" || text == "inverse-time") return KernelMode::InverseTime;
  throw InputError("unknown kernel mode '" + text + "' (expected gaussian or inverse_time)");
}

std::string to_string(KernelMode mode) {
  return mode == KernelMode::Gaussian ? "gaussian" : "inverse_time";
}

}  // namespace flowcast::graph
