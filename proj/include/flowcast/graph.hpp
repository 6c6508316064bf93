#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowcast/data.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast::graph {

// Directed travel times in seconds, [N x N]. Zero diagonal; +inf marks an
// unconnected pair.
struct TravelTimeMatrix {
  Tensor seconds;

  std::size_t size() const { return seconds.empty() ? 0 : seconds.dim(0); }
};

// Per-station data availability in (0, 1]. CCS stations score 1, N-CCS
// stations score their record count relative to the best-covered N-CCS.
struct AvailabilityVector {
  std::vector<double> scores;

  std::size_t size() const { return scores.size(); }
};

enum class KernelMode { Gaussian, InverseTime };

struct AdjacencyOptions {
  KernelMode mode = KernelMode::Gaussian;
  double sigma2 = 0.1;
  double epsilon = 1e-6;
};

struct WeightedAdjacency {
  Tensor modified;  // kernel weights attenuated by availability of both endpoints
  Tensor combined;  // kernel weights alone
  KernelMode mode = KernelMode::Gaussian;
  double sigma2 = 0.1;
  double epsilon = 1e-6;

  std::size_t size() const { return modified.empty() ? 0 : modified.dim(0); }

  // `modified` scaled so that every row sums to one (all-zero rows stay zero).
  Tensor row_normalized() const;

  // FNV-1a over the shape and raw bytes of `modified`.
  std::uint64_t fingerprint() const;
};

AvailabilityVector availability_scores(std::span<const data::StationMeta> stations);

// T = D / S elementwise. Infinite distances mark unconnected pairs.
TravelTimeMatrix travel_times(const Tensor& distances_m, const Tensor& speeds_mps);

WeightedAdjacency build_adjacency(const TravelTimeMatrix& travel, const AvailabilityVector& avail,
                                  const AdjacencyOptions& options = {});

// Reads either `from_id,to_id,distance_m,speed_mps` or `from_id,to_id,seconds`.
// Pairs not listed are unconnected.
TravelTimeMatrix load_travel_times(const std::filesystem::path& path,
                                   std::span<const std::string> station_order);

KernelMode parse_kernel_mode(const std::string& text);
std::string to_string(KernelMode mode);

}  // namespace flowcast::graph
