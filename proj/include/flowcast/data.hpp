#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "flowcast/csv.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast::data {

using Timestamp = csv::Timestamp;

inline constexpr std::chrono::minutes kInterval{15};
inline constexpr std::size_t kIntervalsPerDay = 96;

// Marker for a missing 15-minute count. Stored as a quiet NaN.
inline constexpr double kSentinel = std::numeric_limits<double>::quiet_NaN();
inline bool is_sentinel(double v) { return std::isnan(v); }

enum class StationKind { CCS, NCCS };

struct GeoPosition {
  double latitude_deg = 0.0;
  double longitude_deg = 0.0;
};

struct StationMeta {
  std::string station_id;
  StationKind kind = StationKind::CCS;
  GeoPosition position;
  std::uint64_t record_count = 0;  // 15-minute records present in the year
};

// Counts per 15-minute interval, [timesteps x stations]. Missing cells hold kSentinel.
struct FlowFrame {
  Tensor values;
  std::vector<Timestamp> timestamps;
  std::vector<std::string> station_ids;

  std::size_t timesteps() const { return timestamps.size(); }
  std::size_t stations() const { return station_ids.size(); }
  double at(std::size_t t, std::size_t s) const { return values(t, s); }
};

struct NormalizationParams {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t stations() const { return min.size(); }
  double normalize(std::size_t station, double x) const;
  double denormalize(std::size_t station, double y) const;
};

// Supervised samples cut from a frame. Sample k reads inputs(k, :, :) and
// predicts targets(k, :, :), which start right after the input window.
struct WindowedDataset {
  Tensor inputs;   // [samples x look_back x stations]
  Tensor targets;  // [samples x horizon x stations]
  std::size_t look_back = 0;
  std::size_t horizon = 0;
  std::vector<std::size_t> origins;    // frame row of each sample's first input step
  std::vector<Timestamp> target_times;  // timestamp of each sample's first target step

  std::size_t size() const { return origins.size(); }
  std::size_t stations() const { return inputs.empty() ? 0 : inputs.dim(2); }
  WindowedDataset slice(std::size_t begin, std::size_t end) const;
};

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct DatasetSplits {
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
};

struct LoadedCounts {
  FlowFrame frame;
  std::vector<StationMeta> stations;  // aligned with frame.station_ids
};

std::vector<StationMeta> load_stations(const std::filesystem::path& meta_path);

// Reads the counts and stations CSVs. Frame columns follow the metadata order,
// restricted to stations that appear in the counts file.
LoadedCounts load_counts(const std::filesystem::path& counts_path,
                         const std::filesystem::path& meta_path);

NormalizationParams fit_normalization(const FlowFrame& frame, std::size_t row_end);
FlowFrame apply_normalization(const FlowFrame& frame, const NormalizationParams& params);
FlowFrame denormalize(const FlowFrame& frame, const NormalizationParams& params);

// Per-station min-max scaling fitted on the whole frame.
std::pair<FlowFrame, NormalizationParams> normalize(const FlowFrame& frame);

WindowedDataset window(const FlowFrame& frame, std::size_t look_back, std::size_t horizon);

// Chronological split; sizes are floor(n * train), floor(n * val), remainder.
DatasetSplits split(const WindowedDataset& ds, SplitFractions fractions = {});

struct PreparedData {
  FlowFrame normalized;
  NormalizationParams norm;
  DatasetSplits splits;
};

// Windows and splits `raw`, fitting the scaler only on rows the training
// samples can see, then rescales every split with it.
PreparedData prepare(const FlowFrame& raw, std::size_t look_back, std::size_t horizon,
                     SplitFractions fractions = {});

struct SynthOptions {
  std::size_t n_stations = 5;
  std::size_t days = 30;
  std::uint64_t seed = 42;
  double noise_amplitude = 6.0;   // std of i.i.d. per-station count noise
  double nccs_fraction = 0.4;
  double base_level = 30.0;       // vehicles per 15 minutes off-peak
  double morning_peak = 140.0;    // extra vehicles per 15 minutes at 08:00
  double evening_peak = 120.0;    // extra vehicles per 15 minutes at 17:00
  double weekend_factor = 0.55;
  double persistence = 0.97;      // AR(1) coefficient of the demand fluctuation
  double fluctuation = 0.05;      // AR(1) innovation std (log scale)
};

struct SyntheticCorpus {
  FlowFrame frame;
  std::vector<StationMeta> stations;
  Tensor distances_m;     // [N x N], along-corridor distances
  Tensor speeds_mps;      // [N x N], average speed per directed pair
  Tensor travel_seconds;  // distances / speeds, zero diagonal
  std::vector<std::size_t> lags;  // delay of each station behind station 0, in intervals
};

// Linear corridor: station 0 carries a double-peak daily demand with a
// persistent fluctuation, downstream stations replay it delayed by the
// travel time from station 0 (whole intervals) plus i.i.d. noise.
SyntheticCorpus synth_corpus(const SynthOptions& options);

void write_counts_csv(const FlowFrame& frame, const std::filesystem::path& path);
void write_stations_csv(const std::vector<StationMeta>& stations, const std::filesystem::path& path);
void write_travel_csv(const SyntheticCorpus& corpus, const std::filesystem::path& path);

std::string to_string(StationKind kind);

// Minute of day / weekday helpers used by the slot-based baselines.
std::size_t slot_of_day(Timestamp t);
unsigned weekday_of(Timestamp t);  // 0 = Sunday

}  // namespace flowcast::data
