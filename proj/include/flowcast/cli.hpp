#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace flowcast::cli {

// Every setting a command can read. JSON keys and long flags share names,
// with '_' in keys and '-' in flags (`look_back` / `--look-back`).
struct RunConfig {
  std::filesystem::path counts;
  std::filesystem::path stations;
  std::filesystem::path travel_times;
  std::filesystem::path checkpoint;
  std::filesystem::path intervals;
  std::filesystem::path out{"out"};
  std::uint64_t seed = 42;
  bool quiet = false;

  // model and training
  std::size_t look_back = 96;
  std::size_t horizon = 1;
  std::vector<std::size_t> gcn_dims{8};
  std::string gcn_activation = "relu";
  std::vector<std::size_t> lstm_hidden{16};
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  double min_delta = 1e-5;
  double learning_rate = 0.0002;
  double alpha = 0.1;
  double train_fraction = 0.70;
  double val_fraction = 0.15;

  // adjacency
  std::string kernel_mode = "gaussian";
  double sigma2 = 0.1;
  double epsilon = 1e-6;

  // eval
  std::vector<std::string> models{"proposed", "LSTM", "HA"};
  std::size_t ar_order = 8;
  std::size_t fnn_hidden = 64;
  std::size_t baseline_lstm_hidden = 16;

  // predict
  std::string split = "test";  // test | all
  std::string station;         // station shown in the bounds chart and used for demand; first by default

  // simulate
  std::size_t runs = 200;
  double dt = 0.5;
  double demand_vph = 0.0;  // > 0 overrides the interval file
  std::string date;         // YYYY-MM-DD of the demand window; first fully covered day by default
  std::string window_start = "07:30";
  std::string window_end = "08:30";
  double corridor_length = 4000.0;
  double v_desired = 16.67;
  double max_horizon_s = 7200.0;

  // synth
  std::size_t n_stations = 5;
  std::size_t days = 30;

  void validate() const;
};

// Overlays the keys of `j` onto `config`. Unknown keys and wrong types raise InputError.
void apply_json(RunConfig& config, const nlohmann::json& j);
nlohmann::ordered_json to_json(const RunConfig& config);

// Full command line entry point. Returns the process exit code: 0 success,
// 2 input or configuration error, 3 numeric or runtime failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowcast::cli
