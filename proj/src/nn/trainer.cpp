#include "flowcast/nn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "flowcast/errors.hpp"
#include "flowcast/rng.hpp"

namespace flowcast::nn {

std::vector<double> TrainReport::train_losses() const {
  std::vector<double> out;
  for (const auto& e : epochs) out.push_back(e.train_loss);
  return out;
}

std::vector<double> TrainReport::q_trace() const {
  std::vector<double> out;
  for (const auto& e : epochs) out.push_back(e.q_adjusted);
  return out;
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,val_mae,q_adjusted\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << csv::format_double(e.train_loss) << ','
        << csv::format_double(e.val_loss) << ',' << csv::format_double(e.val_mae) << ','
        << csv::format_double(e.q_adjusted) << '\n';
  }
  if (!out) throw InputError("failed writing " + path.string());
}

namespace {

std::vector<Tensor> snapshot(SequenceModel& model) {
  std::vector<Tensor> out;
  for (const auto& p : model.parameters()) out.push_back(*p.tensor);
  return out;
}

void restore(SequenceModel& model, const std::vector<Tensor>& values) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = values[i];
}

struct Validation {
  double loss = 0.0;
  double mae = 0.0;
  std::vector<double> residuals;
};

Validation validate(const SequenceModel& model, const data::WindowedDataset& val) {
  const Tensor forecast = predict(model, val.inputs);
  Validation v;
  v.residuals = conformal::absolute_residuals(forecast, val.targets);
  double sq = 0.0, abs_sum = 0.0;
  for (double r : v.residuals) {
    sq += r * r;
    abs_sum += r;
  }
  const auto n = static_cast<double>(v.residuals.size());
  v.loss = sq / n;
  v.mae = abs_sum / n;
  return v;
}

}  // namespace

TrainResult fit(SequenceModel& model, const data::WindowedDataset& train,
                const data::WindowedDataset& val, const TrainConfig& config) {
  if (train.size() == 0 || val.size() == 0) throw SizeError("train and val splits must be nonempty");
  if (config.batch_size == 0 || config.epochs == 0) throw DomainError("epochs and batch size must be positive");

  auto params = model.parameters();
  std::vector<ConstParamRef> const_params;
  for (const auto& p : params) const_params.push_back({p.name, p.tensor});
  auto optimizer = OptimizerState::for_params(const_params, config.optimizer);

  Rng rng(derive_seed(config.seed, 0x7472));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.quantile.alpha = config.alpha;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_weights = snapshot(model);
  std::size_t since_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double weighted_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      auto g = batch_gradient(model, train.inputs, train.targets, rows);
      if (!std::isfinite(g.loss)) throw TrainingError(epoch, "training loss diverged");
      weighted_loss += g.loss * static_cast<double>(rows.size());
      rmsprop_step(params, g.grads, optimizer);
    }

    Validation v;
    try {
      v = validate(model, val);
    } catch (const NumericError& e) {
      throw TrainingError(epoch, std::string("validation diverged: ") + e.what());
    }
    if (!std::isfinite(v.loss)) throw TrainingError(epoch, "validation loss is not finite");
    result.quantile = conformal::update_quantile(std::move(result.quantile), v.residuals);

    EpochRecord rec{epoch, weighted_loss / static_cast<double>(train.size()), v.loss, v.mae,
                    *result.quantile.q_adjusted};
    result.report.epochs.push_back(rec);
    result.report.stopped_epoch = epoch;
    if (config.on_epoch) config.on_epoch(rec);

    if (v.loss < best_val - config.min_delta) {
      best_val = v.loss;
      best_weights = snapshot(model);
      result.report.best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement >= config.patience) {
      break;
    }
  }

  if (result.report.best_epoch > 0) restore(model, best_weights);
  result.quantile = conformal::update_quantile(std::move(result.quantile), validate(model, val).residuals);
  return result;
}

GcnLstmTraining train(const data::DatasetSplits& splits, const graph::WeightedAdjacency& adjacency,
                      const ModelConfig& model_config, const TrainConfig& train_config) {
  ModelConfig cfg = model_config;
  cfg.stations = splits.train.stations();
  cfg.look_back = splits.train.look_back;
  cfg.horizon = splits.train.horizon;
  GcnLstmModel model(cfg, adjacency);
  auto result = fit(model, splits.train, splits.val, train_config);
  return {std::move(model), std::move(result.report), std::move(result.quantile)};
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out;
  if (window == 0 || values.size() < window) return out;
  for (std::size_t i = 0; i + window <= values.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < window; ++k) s += values[i + k];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

}  // namespace flowcast::nn
