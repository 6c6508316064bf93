#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flowcast/graph.hpp"
#include "flowcast/rng.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast::nn {

enum class Activation { ReLU, Linear };

struct GcnLayerParams {
  Tensor weight;  // [in_dim x out_dim]
  Tensor bias;    // [out_dim]
  Activation activation = Activation::ReLU;

  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }
};

// Gates are packed along the columns in the order input, forget, cell candidate, output.
struct LstmParams {
  Tensor weight;  // [(in_dim + hidden) x 4*hidden], rows act on [x_t, h_{t-1}]
  Tensor bias;    // [4*hidden]

  std::size_t hidden() const { return bias.size() / 4; }
  std::size_t in_dim() const { return weight.dim(0) - hidden(); }
};

struct AttentionParams {
  Tensor weight;  // [hidden x 1]
  Tensor bias;    // [1]
};

struct DenseParams {
  Tensor weight;  // [in_dim x out_dim]
  Tensor bias;    // [out_dim]
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases (forget gate +1).
GcnLayerParams init_gcn(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng);
LstmParams init_lstm(std::size_t in_dim, std::size_t hidden, Rng& rng);
AttentionParams init_attention(std::size_t hidden, Rng& rng);
DenseParams init_dense(std::size_t in_dim, std::size_t out_dim, Rng& rng);

// act(a_hat * x * W + b) for node features x [N x in_dim]; a_hat is [N x N].
Tensor gcn_forward(const Tensor& x, const Tensor& a_hat, const GcnLayerParams& p);
// Same, with a_hat the row-normalized adjacency.
Tensor gcn_forward(const Tensor& x, const graph::WeightedAdjacency& adjacency,
                   const GcnLayerParams& p);

// ---------------------------------------------------------------------------
// Cached forward passes and their reverse-mode counterparts. Buffers are
// flat row-major spans; gradients are accumulated (+=) into the given params.

struct GcnTrace {
  std::vector<double> aggregated;  // a_hat * h_in, [N x in_dim]
  std::vector<double> pre;         // aggregated * W + b, [N x out_dim]
  std::vector<double> out;         // activation(pre)
};

void gcn_forward_cached(const GcnLayerParams& p, std::span<const double> a_hat, std::size_t nodes,
                        std::span<const double> h_in, GcnTrace& trace);

// d_out: [N x out_dim]. d_in (optional, may be empty): receives gradient w.r.t. h_in.
void gcn_backward(const GcnLayerParams& p, std::span<const double> a_hat, std::size_t nodes,
                  const GcnTrace& trace, std::span<const double> d_out, GcnLayerParams& grad,
                  std::span<double> d_in);

struct LstmTrace {
  std::size_t steps = 0;
  std::vector<double> xh;         // [steps x (in + hidden)]
  std::vector<double> gates;      // [steps x 4*hidden], post-activation
  std::vector<double> cell;       // [(steps + 1) x hidden], row 0 is the zero state
  std::vector<double> tanh_cell;  // [steps x hidden]
  std::vector<double> hidden;     // [steps x hidden]
};

void lstm_forward_cached(const LstmParams& p, std::span<const double> inputs, std::size_t steps,
                         LstmTrace& trace);

// d_hidden: [steps x hidden], gradient flowing into every h_t from above.
// d_inputs (optional): receives [steps x in_dim].
void lstm_backward(const LstmParams& p, const LstmTrace& trace, std::span<const double> d_hidden,
                   LstmParams& grad, std::span<double> d_inputs);

struct AttentionTrace {
  std::vector<double> scores;  // e_t = tanh(h_t . w + b)
  std::vector<double> alphas;  // softmax(e)
  std::vector<double> context;  // sum_t alpha_t h_t
};

void attention_forward_cached(const AttentionParams& p, std::span<const double> hidden_seq,
                              std::size_t steps, std::size_t hidden, AttentionTrace& trace);

// d_context: [hidden]. d_hidden_seq: [steps x hidden], accumulated (+=).
void attention_backward(const AttentionParams& p, std::span<const double> hidden_seq,
                        std::size_t steps, std::size_t hidden, const AttentionTrace& trace,
                        std::span<const double> d_context, AttentionParams& grad,
                        std::span<double> d_hidden_seq);

void dense_forward(const DenseParams& p, std::span<const double> in, std::span<double> out);
// d_in (optional) is overwritten.
void dense_backward(const DenseParams& p, std::span<const double> in, std::span<const double> d_out,
                    DenseParams& grad, std::span<double> d_in);

// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace flowcast::nn
