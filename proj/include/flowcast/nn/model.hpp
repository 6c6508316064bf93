#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flowcast/graph.hpp"
#include "flowcast/nn/layers.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast::nn {

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

struct ConstParamRef {
  std::string name;
  const Tensor* tensor;
};

// A window-to-horizon regressor trained on mean squared error. Windows are
// flat [look_back x stations] spans, outputs flat [horizon x stations].
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t stations() const = 0;
  virtual std::size_t look_back() const = 0;
  virtual std::size_t horizon() const = 0;

  virtual std::vector<ParamRef> parameters() = 0;
  std::vector<ConstParamRef> parameters() const;

  virtual void predict_sample(std::span<const double> window, std::span<double> out) const = 0;

  // Adds scale * d/dparams sum((y_hat - y)^2) into grads (ordered as parameters())
  // and returns the sum of squared errors for this sample.
  virtual double accumulate_gradient(std::span<const double> window, std::span<const double> target,
                                     std::span<Tensor> grads, double scale) const = 0;

  std::size_t output_size() const { return horizon() * stations(); }
  std::size_t window_size() const { return look_back() * stations(); }
};

// Zero tensors shaped like each parameter.
std::vector<Tensor> zeros_like(std::span<const ConstParamRef> params);

// Runs the model over inputs [samples x look_back x stations] -> [samples x horizon x stations].
Tensor predict(const SequenceModel& model, const Tensor& inputs);

// Mean squared error over a batch of rows [first, last) and its gradient.
struct GradientResult {
  std::vector<Tensor> grads;
  double loss = 0.0;
};
GradientResult batch_gradient(const SequenceModel& model, const Tensor& inputs,
                              const Tensor& targets, std::span<const std::size_t> rows);

struct ModelConfig {
  std::size_t stations = 0;
  std::size_t look_back = 96;
  std::size_t horizon = 1;
  std::vector<std::size_t> gcn_dims{8};   // output width of each graph-convolution layer
  Activation gcn_activation = Activation::ReLU;
  std::vector<std::size_t> lstm_hidden{16};
  std::uint64_t seed = 42;
};

struct ModelParams {
  std::vector<GcnLayerParams> gcn;
  std::vector<LstmParams> lstm;
  AttentionParams attention;
  DenseParams head;  // context -> stations * horizon
  std::uint64_t seed = 0;

  static ModelParams init(const ModelConfig& config);

  std::vector<ParamRef> tensors();
  std::vector<ConstParamRef> tensors() const;
};

struct AttentionOutput {
  Tensor prediction;          // [output dim]
  std::vector<double> alphas;  // [steps], sums to one
  Tensor context;             // [hidden]
};

// LSTM stack over seq [steps x in_dim], attention pooling, dense head.
AttentionOutput lstm_attention_forward(const Tensor& seq, std::span<const LstmParams> lstm,
                                       const AttentionParams& attention, const DenseParams& head);

// Graph convolution per time step, LSTM stack over the resulting node
// features, attention pooling over time, dense output head.
class GcnLstmModel final : public SequenceModel {
 public:
  GcnLstmModel(ModelConfig config, const graph::WeightedAdjacency& adjacency);
  GcnLstmModel(ModelConfig config, ModelParams params, const Tensor& a_hat);

  std::string name() const override { return "proposed"; }
  std::size_t stations() const override { return config_.stations; }
  std::size_t look_back() const override { return config_.look_back; }
  std::size_t horizon() const override { return config_.horizon; }

  std::vector<ParamRef> parameters() override { return params_.tensors(); }

  void predict_sample(std::span<const double> window, std::span<double> out) const override;
  double accumulate_gradient(std::span<const double> window, std::span<const double> target,
                             std::span<Tensor> grads, double scale) const override;

  // Attention weights for one window.
  std::vector<double> attention_weights(std::span<const double> window) const;

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const Tensor& a_hat() const { return a_hat_; }

 private:
  struct Trace;
  void forward(std::span<const double> window, Trace& trace) const;
  void validate() const;

  ModelConfig config_;
  ModelParams params_;
  Tensor a_hat_;  // row-normalized adjacency
};

// Exact MSE gradients of the GCN-LSTM-attention model over a batch.
struct ModelGradients {
  ModelParams grads;
  double loss = 0.0;
};
ModelGradients backward(const Tensor& inputs, const Tensor& targets, const ModelParams& params,
                        const ModelConfig& config, const graph::WeightedAdjacency& adjacency);

}  // namespace flowcast::nn
