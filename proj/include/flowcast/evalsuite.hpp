#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "flowcast/data.hpp"
#include "flowcast/nn/model.hpp"
#include "flowcast/nn/trainer.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast::eval {

enum class Units { Normalized, Vehicles };

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
  Units units = Units::Normalized;
};

MetricReport mae_rmse(const Tensor& actual, const Tensor& forecast, Units units = Units::Normalized);

// Anything that maps a windowed dataset to [samples x horizon x stations] forecasts.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::string name() const = 0;
  virtual Tensor forecast(const data::WindowedDataset& ds) const = 0;
};

// Mean target per (station, weekday, 15-minute slot) over the training split.
class HistoricalAverage final : public Forecaster {
 public:
  explicit HistoricalAverage(const data::WindowedDataset& train);
  std::string name() const override { return "HA"; }
  Tensor forecast(const data::WindowedDataset& ds) const override;
  double mean_for(std::size_t station, data::Timestamp t) const;

 private:
  static constexpr std::size_t kSlots = 7 * data::kIntervalsPerDay;
  std::size_t stations_ = 0;
  std::vector<double> sums_, counts_;   // [station x kSlots]
  std::vector<double> station_mean_;    // used for slots never seen in training
};

// Per-station AR(p) with intercept, fitted by least squares on the last p
// inputs of each training window. Multi-step forecasts are recursive.
class AutoRegressive final : public Forecaster {
 public:
  AutoRegressive(const data::WindowedDataset& train, std::size_t order);
  std::string name() const override { return "AR"; }
  Tensor forecast(const data::WindowedDataset& ds) const override;

  std::size_t order() const { return order_; }
  // coefficients(s)[0] is the intercept, [k] multiplies x_{t-k}.
  const std::vector<double>& coefficients(std::size_t station) const { return coef_[station]; }
  // Stations whose normal equations were singular; they fall back to `fallback`.
  const std::vector<std::size_t>& fallback_stations() const { return fallback_stations_; }

 private:
  std::size_t order_;
  std::vector<std::vector<double>> coef_;
  std::vector<std::size_t> fallback_stations_;
  std::unique_ptr<HistoricalAverage> fallback_;
};

// Solves the AR normal equations for one series of (lags, target) rows.
// Throws FitError if the system is singular.
std::vector<double> fit_ar_coefficients(const std::vector<std::vector<double>>& lags,
                                        const std::vector<double>& targets);

// One hidden ReLU layer over the flattened look-back window.
class FeedForwardModel final : public nn::SequenceModel {
 public:
  FeedForwardModel(std::size_t stations, std::size_t look_back, std::size_t horizon,
                   std::size_t hidden, std::uint64_t seed);

  std::string name() const override { return "FNN"; }
  std::size_t stations() const override { return stations_; }
  std::size_t look_back() const override { return look_back_; }
  std::size_t horizon() const override { return horizon_; }
  std::vector<nn::ParamRef> parameters() override;

  void predict_sample(std::span<const double> window, std::span<double> out) const override;
  double accumulate_gradient(std::span<const double> window, std::span<const double> target,
                             std::span<Tensor> grads, double scale) const override;

 private:
  std::size_t stations_, look_back_, horizon_;
  nn::DenseParams hidden_, out_;
};

// LSTM with a dense head on the last hidden state; no graph convolution, no
// attention. Per-station mode runs one shared univariate LSTM over each
// station's own history; otherwise the LSTM reads the whole station vector.
class PlainLstmModel final : public nn::SequenceModel {
 public:
  PlainLstmModel(std::size_t stations, std::size_t look_back, std::size_t horizon,
                 std::size_t hidden, std::uint64_t seed, bool per_station = true);

  std::string name() const override { return "LSTM"; }
  std::size_t stations() const override { return stations_; }
  std::size_t look_back() const override { return look_back_; }
  std::size_t horizon() const override { return horizon_; }
  std::vector<nn::ParamRef> parameters() override;

  void predict_sample(std::span<const double> window, std::span<double> out) const override;
  double accumulate_gradient(std::span<const double> window, std::span<const double> target,
                             std::span<Tensor> grads, double scale) const override;

 private:
  std::size_t lstm_inputs() const { return per_station_ ? 1 : stations_; }
  std::size_t head_outputs() const { return per_station_ ? horizon_ : stations_ * horizon_; }

  std::size_t stations_, look_back_, horizon_;
  bool per_station_;
  nn::LstmParams lstm_;
  nn::DenseParams head_;
};

// Adapts a trained sequence model to the Forecaster interface.
class SequenceForecaster final : public Forecaster {
 public:
  explicit SequenceForecaster(std::shared_ptr<const nn::SequenceModel> model, std::string label = {})
      : model_(std::move(model)), label_(std::move(label)) {}
  std::string name() const override { return label_.empty() ? model_->name() : label_; }
  Tensor forecast(const data::WindowedDataset& ds) const override { return nn::predict(*model_, ds.inputs); }
  const nn::SequenceModel& model() const { return *model_; }

 private:
  std::shared_ptr<const nn::SequenceModel> model_;
  std::string label_;
};

enum class BaselineVariant { HA, AR, FNN, LSTM };

std::string to_string(BaselineVariant v);
BaselineVariant parse_baseline(const std::string& text);

struct BaselineConfig {
  std::size_t ar_order = 8;
  std::size_t fnn_hidden = 64;
  std::size_t lstm_hidden = 16;
  bool lstm_per_station = true;
  nn::TrainConfig train;  // used by FNN and LSTM
};

struct BaselineModel {
  BaselineVariant variant = BaselineVariant::HA;
  std::shared_ptr<const Forecaster> forecaster;
  std::vector<std::string> notes;  // e.g. AR stations that fell back to HA
  nn::TrainReport report;          // empty for HA and AR

  bool fitted() const { return forecaster != nullptr; }
};

// HA and AR read the training split only; FNN and LSTM also use the validation
// split for early stopping, exactly like the main model.
BaselineModel fit_baseline(BaselineVariant variant, const data::DatasetSplits& splits,
                           const BaselineConfig& config, std::uint64_t seed);

struct ComparisonRow {
  std::string model;
  MetricReport metrics;
};

// One row per model in the given order, all scored on the same test split.
std::vector<ComparisonRow> compare(const std::vector<std::shared_ptr<const Forecaster>>& models,
                                   const data::WindowedDataset& test);

// FNV-1a over the shapes, values and origins of a windowed dataset.
std::uint64_t dataset_fingerprint(const data::WindowedDataset& ds);

// `model,mae,rmse,seed,dataset_fingerprint`
void write_comparison_csv(const std::vector<ComparisonRow>& rows, std::uint64_t seed,
                          std::uint64_t fingerprint, const std::filesystem::path& path);

}  // namespace flowcast::eval
