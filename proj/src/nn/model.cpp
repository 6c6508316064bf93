#include "flowcast/nn/model.hpp"

#include <algorithm>
#include <cmath>

#include "flowcast/errors.hpp"

namespace flowcast::nn {

std::vector<ConstParamRef> SequenceModel::parameters() const {
  auto refs = const_cast<SequenceModel*>(this)->parameters();
  std::vector<ConstParamRef> out;
  out.reserve(refs.size());
  for (auto& r : refs) out.push_back({std::move(r.name), r.tensor});
  return out;
}

std::vector<Tensor> zeros_like(std::span<const ConstParamRef> params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.tensor->shape(), 0.0);
  return out;
}

Tensor predict(const SequenceModel& model, const Tensor& inputs) {
  if (inputs.rank() != 3 || inputs.dim(1) != model.look_back() ||
      inputs.dim(2) != model.stations()) {
    throw StructuralError("predict: inputs " + inputs.shape_string() + " do not match model [n x " +
                          std::to_string(model.look_back()) + " x " +
                          std::to_string(model.stations()) + "]");
  }
  const std::size_t n = inputs.dim(0);
  Tensor out({n, model.horizon(), model.stations()});
  for (std::size_t k = 0; k < n; ++k) model.predict_sample(inputs.slab(k), out.slab(k));
  out.ensure_finite(model.name() + " forward pass");
  return out;
}

GradientResult batch_gradient(const SequenceModel& model, const Tensor& inputs,
                              const Tensor& targets, std::span<const std::size_t> rows) {
  if (inputs.rank() != 3 || targets.rank() != 3 || inputs.dim(0) != targets.dim(0) ||
      inputs.dim(1) != model.look_back() || inputs.dim(2) != model.stations() ||
      targets.dim(1) != model.horizon() || targets.dim(2) != model.stations()) {
    throw StructuralError("batch_gradient: inputs " + inputs.shape_string() + " / targets " +
                          targets.shape_string() + " do not match the model");
  }
  if (rows.empty()) throw SizeError("batch_gradient: empty batch");
  const auto params = model.parameters();
  GradientResult result{zeros_like(params), 0.0};
  const double scale =
      1.0 / (static_cast<double>(rows.size()) * static_cast<double>(model.output_size()));
  double sse = 0.0;
  for (std::size_t r : rows) {
    sse += model.accumulate_gradient(inputs.slab(r), targets.slab(r), result.grads, scale);
  }
  result.loss = sse * scale;
  return result;
}

ModelParams ModelParams::init(const ModelConfig& c) {
  if (c.stations == 0 || c.look_back == 0 || c.horizon == 0 || c.lstm_hidden.empty()) {
    throw DomainError("model config needs stations, look_back, horizon and one LSTM layer");
  }
  Rng rng(c.seed);
  ModelParams p;
  p.seed = c.seed;
  std::size_t width = 1;
  for (std::size_t d : c.gcn_dims) {
    if (d == 0) throw DomainError("graph-convolution width must be positive");
    p.gcn.push_back(init_gcn(width, d, c.gcn_activation, rng));
    width = d;
  }
  std::size_t in = c.stations * width;
  for (std::size_t h : c.lstm_hidden) {
    if (h == 0) throw DomainError("LSTM hidden size must be positive");
    p.lstm.push_back(init_lstm(in, h, rng));
    in = h;
  }
  p.attention = init_attention(in, rng);
  p.head = init_dense(in, c.stations * c.horizon, rng);
  return p;
}

std::vector<ParamRef> ModelParams::tensors() {
  std::vector<ParamRef> out;
  for (std::size_t l = 0; l < gcn.size(); ++l) {
    out.push_back({"gcn." + std::to_string(l) + ".weight", &gcn[l].weight});
    out.push_back({"gcn." + std::to_string(l) + ".bias", &gcn[l].bias});
  }
  for (std::size_t l = 0; l < lstm.size(); ++l) {
    out.push_back({"lstm." + std::to_string(l) + ".weight", &lstm[l].weight});
    out.push_back({"lstm." + std::to_string(l) + ".bias", &lstm[l].bias});
  }
  out.push_back({"attention.weight", &attention.weight});
  out.push_back({"attention.bias", &attention.bias});
  out.push_back({"head.weight", &head.weight});
  out.push_back({"head.bias", &head.bias});
  return out;
}

std::vector<ConstParamRef> ModelParams::tensors() const {
  auto refs = const_cast<ModelParams*>(this)->tensors();
  std::vector<ConstParamRef> out;
  for (auto& r : refs) out.push_back({std::move(r.name), r.tensor});
  return out;
}

AttentionOutput lstm_attention_forward(const Tensor& seq, std::span<const LstmParams> lstm,
                                       const AttentionParams& attention, const DenseParams& head) {
  if (seq.rank() != 2 || seq.dim(0) == 0) throw StructuralError("sequence must be [steps x dim]");
  if (lstm.empty()) throw StructuralError("at least one LSTM layer is required");
  const std::size_t steps = seq.dim(0);
  if (seq.dim(1) != lstm.front().in_dim()) {
    throw StructuralError("sequence width does not match the LSTM input size");
  }
  std::vector<LstmTrace> traces(lstm.size());
  std::span<const double> in = seq.data();
  for (std::size_t k = 0; k < lstm.size(); ++k) {
    lstm_forward_cached(lstm[k], in, steps, traces[k]);
    in = traces[k].hidden;
  }
  const std::size_t H = lstm.back().hidden();
  AttentionTrace att;
  attention_forward_cached(attention, in, steps, H, att);
  AttentionOutput out;
  out.prediction = Tensor({head.weight.dim(1)});
  dense_forward(head, att.context, out.prediction.data());
  out.prediction.ensure_finite("lstm_attention_forward");
  out.alphas = std::move(att.alphas);
  out.context = Tensor::vector(std::move(att.context));
  return out;
}

struct GcnLstmModel::Trace {
  std::vector<GcnTrace> gcn;  // [steps x layers]
  std::vector<double> seq;    // LSTM input sequence
  std::vector<LstmTrace> lstm;
  AttentionTrace attention;
  std::vector<double> output;
};

GcnLstmModel::GcnLstmModel(ModelConfig config, const graph::WeightedAdjacency& adjacency)
    : config_(std::move(config)), params_(ModelParams::init(config_)),
      a_hat_(adjacency.row_normalized()) {
  validate();
}

GcnLstmModel::GcnLstmModel(ModelConfig config, ModelParams params, const Tensor& a_hat)
    : config_(std::move(config)), params_(std::move(params)), a_hat_(a_hat) {
  validate();
}

void GcnLstmModel::validate() const {
  const std::size_t n = config_.stations;
  if (a_hat_.rank() != 2 || a_hat_.dim(0) != n || a_hat_.dim(1) != n) {
    throw StructuralError("adjacency " + a_hat_.shape_string() + " does not match " +
                          std::to_string(n) + " stations");
  }
  if (params_.gcn.size() != config_.gcn_dims.size() ||
      params_.lstm.size() != config_.lstm_hidden.size()) {
    throw StructuralError("parameter layer counts do not match the model config");
  }
  std::size_t width = 1;
  for (std::size_t l = 0; l < params_.gcn.size(); ++l) {
    const auto& g = params_.gcn[l];
    if (g.weight.rank() != 2 || g.in_dim() != width || g.out_dim() != config_.gcn_dims[l] ||
        g.bias.size() != g.out_dim()) {
      throw StructuralError("graph-convolution layer " + std::to_string(l) + " has wrong shape");
    }
    width = g.out_dim();
  }
  std::size_t in = n * width;
  for (std::size_t l = 0; l < params_.lstm.size(); ++l) {
    const auto& p = params_.lstm[l];
    const std::size_t h = config_.lstm_hidden[l];
    if (p.bias.size() != 4 * h || p.weight.rank() != 2 || p.weight.dim(0) != in + h ||
        p.weight.dim(1) != 4 * h) {
      throw StructuralError("LSTM layer " + std::to_string(l) + " has wrong shape");
    }
    in = h;
  }
  if (params_.attention.weight.size() != in || params_.attention.bias.size() != 1 ||
      params_.head.weight.rank() != 2 || params_.head.weight.dim(0) != in ||
      params_.head.weight.dim(1) != n * config_.horizon ||
      params_.head.bias.size() != n * config_.horizon) {
    throw StructuralError("attention/head parameters have wrong shape");
  }
}

void GcnLstmModel::forward(std::span<const double> window, Trace& tr) const {
  const std::size_t n = config_.stations;
  const std::size_t steps = config_.look_back;
  const std::size_t layers = params_.gcn.size();
  const std::size_t width = layers ? params_.gcn.back().out_dim() : 1;
  tr.gcn.resize(steps * layers);
  tr.seq.resize(steps * n * width);
  for (std::size_t t = 0; t < steps; ++t) {
    std::span<const double> h = window.subspan(t * n, n);
    for (std::size_t l = 0; l < layers; ++l) {
      auto& g = tr.gcn[t * layers + l];
      gcn_forward_cached(params_.gcn[l], a_hat_.data(), n, h, g);
      h = g.out;
    }
    std::ranges::copy(h, tr.seq.begin() + static_cast<std::ptrdiff_t>(t * n * width));
  }
  tr.lstm.resize(params_.lstm.size());
  std::span<const double> in = tr.seq;
  for (std::size_t k = 0; k < params_.lstm.size(); ++k) {
    lstm_forward_cached(params_.lstm[k], in, steps, tr.lstm[k]);
    in = tr.lstm[k].hidden;
  }
  attention_forward_cached(params_.attention, in, steps, params_.lstm.back().hidden(), tr.attention);
  tr.output.resize(output_size());
  dense_forward(params_.head, tr.attention.context, tr.output);
}

void GcnLstmModel::predict_sample(std::span<const double> window, std::span<double> out) const {
  thread_local Trace tr;
  forward(window, tr);
  std::ranges::copy(tr.output, out.begin());
}

std::vector<double> GcnLstmModel::attention_weights(std::span<const double> window) const {
  Trace tr;
  forward(window, tr);
  return tr.attention.alphas;
}

double GcnLstmModel::accumulate_gradient(std::span<const double> window,
                                         std::span<const double> target, std::span<Tensor> grads,
                                         double scale) const {
  thread_local Trace tr;
  forward(window, tr);

  // View the flat gradient list as a ModelParams for the layer routines.
  ModelParams g;
  std::size_t idx = 0;
  g.gcn.resize(params_.gcn.size());
  for (std::size_t l = 0; l < params_.gcn.size(); ++l) {
    g.gcn[l].weight = std::move(grads[idx++]);
    g.gcn[l].bias = std::move(grads[idx++]);
    g.gcn[l].activation = params_.gcn[l].activation;
  }
  g.lstm.resize(params_.lstm.size());
  for (auto& l : g.lstm) {
    l.weight = std::move(grads[idx++]);
    l.bias = std::move(grads[idx++]);
  }
  g.attention.weight = std::move(grads[idx++]);
  g.attention.bias = std::move(grads[idx++]);
  g.head.weight = std::move(grads[idx++]);
  g.head.bias = std::move(grads[idx++]);

  const std::size_t n = config_.stations;
  const std::size_t steps = config_.look_back;
  const std::size_t out_n = output_size();
  double sse = 0.0;
  std::vector<double> d_out(out_n);
  for (std::size_t k = 0; k < out_n; ++k) {
    const double r = tr.output[k] - target[k];
    sse += r * r;
    d_out[k] = 2.0 * scale * r;
  }

  const std::size_t H = params_.lstm.back().hidden();
  std::vector<double> d_context(H);
  dense_backward(params_.head, tr.attention.context, d_out, g.head, d_context);
  std::vector<double> d_hidden(steps * H, 0.0);
  attention_backward(params_.attention, tr.lstm.back().hidden, steps, H, tr.attention, d_context,
                     g.attention, d_hidden);
  std::vector<double> d_in;
  for (std::size_t k = params_.lstm.size(); k-- > 0;) {
    d_in.assign(steps * params_.lstm[k].in_dim(), 0.0);
    lstm_backward(params_.lstm[k], tr.lstm[k], d_hidden, g.lstm[k], d_in);
    d_hidden.swap(d_in);
  }
  // d_hidden now holds the gradient w.r.t. the LSTM input sequence.
  const std::size_t layers = params_.gcn.size();
  if (layers > 0) {
    const std::size_t width = params_.gcn.back().out_dim();
    std::vector<double> d_layer, d_below;
    for (std::size_t t = 0; t < steps; ++t) {
      d_layer.assign(d_hidden.begin() + static_cast<std::ptrdiff_t>(t * n * width),
                     d_hidden.begin() + static_cast<std::ptrdiff_t>((t + 1) * n * width));
      for (std::size_t l = layers; l-- > 0;) {
        const auto& p = params_.gcn[l];
        if (l > 0) {
          d_below.assign(n * p.in_dim(), 0.0);
        } else {
          d_below.clear();
        }
        gcn_backward(p, a_hat_.data(), n, tr.gcn[t * layers + l], d_layer, g.gcn[l], d_below);
        d_layer.swap(d_below);
      }
    }
  }

  idx = 0;
  for (auto& l : g.gcn) {
    grads[idx++] = std::move(l.weight);
    grads[idx++] = std::move(l.bias);
  }
  for (auto& l : g.lstm) {
    grads[idx++] = std::move(l.weight);
    grads[idx++] = std::move(l.bias);
  }
  grads[idx++] = std::move(g.attention.weight);
  grads[idx++] = std::move(g.attention.bias);
  grads[idx++] = std::move(g.head.weight);
  grads[idx++] = std::move(g.head.bias);
  return sse;
}

ModelGradients backward(const Tensor& inputs, const Tensor& targets, const ModelParams& params,
                        const ModelConfig& config, const graph::WeightedAdjacency& adjacency) {
  GcnLstmModel model(config, params, adjacency.row_normalized());
  std::vector<std::size_t> rows(inputs.rank() == 3 ? inputs.dim(0) : 0);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  auto result = batch_gradient(model, inputs, targets, rows);
  ModelGradients out;
  out.loss = result.loss;
  out.grads = params;
  auto refs = out.grads.tensors();
  for (std::size_t i = 0; i < refs.size(); ++i) *refs[i].tensor = std::move(result.grads[i]);
  return out;
}

}  // namespace flowcast::nn
