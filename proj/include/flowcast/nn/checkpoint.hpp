#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowcast/data.hpp"
#include "flowcast/graph.hpp"
#include "flowcast/nn/model.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Everything needed to rebuild a trained model and its intervals without the
// training data. The byte layout is described in docs/checkpoint.md.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  graph::WeightedAdjacency adjacency;  // only `modified` and the kernel options are stored
  std::vector<std::string> station_ids;
  data::NormalizationParams norm;
  double alpha = 0.1;
  std::optional<double> q_adjusted;
  std::string config_echo;  // JSON of the run configuration, informational

  GcnLstmModel model() const;
};

// Throws InputError if the file cannot be written.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Throws FormatError on a bad magic, unknown version, truncation, checksum
// mismatch, adjacency fingerprint mismatch or a tensor shape that does not
// fit the stored configuration.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace flowcast::nn
