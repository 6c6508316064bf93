#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "flowcast/conformal.hpp"
#include "flowcast/data.hpp"
#include "flowcast/graph.hpp"
#include "flowcast/nn/model.hpp"
#include "flowcast/nn/optimizer.hpp"

namespace flowcast::nn {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mae = 0.0;
  double q_adjusted = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  double min_delta = 1e-5;
  RmspropConfig optimizer;
  double alpha = 0.1;
  std::uint64_t seed = 42;  // mini-batch order
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t stopped_epoch = 0;  // last epoch run
  std::size_t best_epoch = 0;     // epoch whose weights were restored

  std::vector<double> train_losses() const;
  std::vector<double> q_trace() const;
  // `epoch,train_loss,val_loss,val_mae,q_adjusted`
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  TrainReport report;
  conformal::QuantileState quantile;  // recomputed from the restored weights
};

// Mini-batch RMSprop on MSE with early stopping on validation loss. After
// every epoch the validation residuals refresh the conformal quantile. The
// best epoch's weights are restored before returning.
TrainResult fit(SequenceModel& model, const data::WindowedDataset& train,
                const data::WindowedDataset& val, const TrainConfig& config);

struct GcnLstmTraining {
  GcnLstmModel model;
  TrainReport report;
  conformal::QuantileState quantile;
};

GcnLstmTraining train(const data::DatasetSplits& splits, const graph::WeightedAdjacency& adjacency,
                      const ModelConfig& model_config, const TrainConfig& train_config);

// Mean of a trailing moving average; used for convergence checks on loss curves.
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

}  // namespace flowcast::nn
