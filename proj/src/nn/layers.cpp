#include "flowcast/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "flowcast/errors.hpp"

namespace flowcast::nn {
namespace {

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation act, double x) {
  return act == Activation::ReLU ? (x > 0.0 ? x : 0.0) : x;
}

double activate_grad(Activation act, double pre) {
  return act == Activation::ReLU ? (pre > 0.0 ? 1.0 : 0.0) : 1.0;
}

}  // namespace

GcnLayerParams init_gcn(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng) {
  GcnLayerParams p{Tensor({in_dim, out_dim}), Tensor({out_dim}), act};
  fill_uniform(p.weight, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
  return p;
}

LstmParams init_lstm(std::size_t in_dim, std::size_t hidden, Rng& rng) {
  LstmParams p{Tensor({in_dim + hidden, 4 * hidden}), Tensor({4 * hidden})};
  fill_uniform(p.weight, 1.0 / std::sqrt(static_cast<double>(in_dim + hidden)), rng);
  for (std::size_t j = 0; j < hidden; ++j) p.bias[hidden + j] = 1.0;
  return p;
}

AttentionParams init_attention(std::size_t hidden, Rng& rng) {
  AttentionParams p{Tensor({hidden, 1}), Tensor({1})};
  fill_uniform(p.weight, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  return p;
}

DenseParams init_dense(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  DenseParams p{Tensor({in_dim, out_dim}), Tensor({out_dim})};
  fill_uniform(p.weight, 1.0 / std::sqrt(static_cast<double>(in_dim)), rng);
  return p;
}

void gcn_forward_cached(const GcnLayerParams& p, std::span<const double> a_hat, std::size_t nodes,
                        std::span<const double> h_in, GcnTrace& trace) {
  const std::size_t in = p.in_dim(), out = p.out_dim();
  trace.aggregated.assign(nodes * in, 0.0);
  trace.pre.resize(nodes * out);
  trace.out.resize(nodes * out);
  for (std::size_t i = 0; i < nodes; ++i) {
    double* agg = &trace.aggregated[i * in];
    for (std::size_t j = 0; j < nodes; ++j) {
      const double a = a_hat[i * nodes + j];
      if (a == 0.0) continue;
      const double* h = &h_in[j * in];
      for (std::size_t f = 0; f < in; ++f) agg[f] += a * h[f];
    }
    double* pre = &trace.pre[i * out];
    std::copy(p.bias.data().begin(), p.bias.data().end(), pre);
    for (std::size_t f = 0; f < in; ++f) {
      const double x = agg[f];
      const double* w = &p.weight.data()[f * out];
      for (std::size_t o = 0; o < out; ++o) pre[o] += x * w[o];
    }
    for (std::size_t o = 0; o < out; ++o) trace.out[i * out + o] = activate(p.activation, pre[o]);
  }
}

void gcn_backward(const GcnLayerParams& p, std::span<const double> a_hat, std::size_t nodes,
                  const GcnTrace& trace, std::span<const double> d_out, GcnLayerParams& grad,
                  std::span<double> d_in) {
  const std::size_t in = p.in_dim(), out = p.out_dim();
  std::vector<double> d_pre(nodes * out);
  for (std::size_t k = 0; k < nodes * out; ++k) {
    d_pre[k] = d_out[k] * activate_grad(p.activation, trace.pre[k]);
  }
  auto gw = grad.weight.data();
  auto gb = grad.bias.data();
  for (std::size_t i = 0; i < nodes; ++i) {
    const double* dp = &d_pre[i * out];
    for (std::size_t o = 0; o < out; ++o) gb[o] += dp[o];
    for (std::size_t f = 0; f < in; ++f) {
      const double x = trace.aggregated[i * in + f];
      double* g = &gw[f * out];
      for (std::size_t o = 0; o < out; ++o) g[o] += x * dp[o];
    }
  }
  if (d_in.empty()) return;
  // d_agg = d_pre * W^T, then d_in = a_hat^T * d_agg.
  std::vector<double> d_agg(nodes * in, 0.0);
  for (std::size_t i = 0; i < nodes; ++i) {
    for (std::size_t f = 0; f < in; ++f) {
      const double* w = &p.weight.data()[f * out];
      double s = 0.0;
      for (std::size_t o = 0; o < out; ++o) s += w[o] * d_pre[i * out + o];
      d_agg[i * in + f] = s;
    }
  }
  std::fill(d_in.begin(), d_in.end(), 0.0);
  for (std::size_t i = 0; i < nodes; ++i) {
    for (std::size_t j = 0; j < nodes; ++j) {
      const double a = a_hat[i * nodes + j];
      if (a == 0.0) continue;
      for (std::size_t f = 0; f < in; ++f) d_in[j * in + f] += a * d_agg[i * in + f];
    }
  }
}

Tensor gcn_forward(const Tensor& x, const Tensor& a_hat, const GcnLayerParams& p) {
  if (x.rank() != 2 || a_hat.rank() != 2 || a_hat.dim(0) != x.dim(0) ||
      a_hat.dim(1) != x.dim(0) || x.dim(1) != p.in_dim() || p.bias.size() != p.out_dim()) {
    throw StructuralError("gcn_forward: inconsistent shapes x" + x.shape_string() + " a" +
                          a_hat.shape_string() + " W" + p.weight.shape_string());
  }
  const std::size_t nodes = x.dim(0);
  GcnTrace trace;
  gcn_forward_cached(p, a_hat.data(), nodes, x.data(), trace);
  Tensor out({nodes, p.out_dim()}, std::move(trace.out));
  out.ensure_finite("gcn_forward");
  return out;
}

Tensor gcn_forward(const Tensor& x, const graph::WeightedAdjacency& adjacency,
                   const GcnLayerParams& p) {
  return gcn_forward(x, adjacency.row_normalized(), p);
}

void lstm_forward_cached(const LstmParams& p, std::span<const double> inputs, std::size_t steps,
                         LstmTrace& trace) {
  const std::size_t H = p.hidden();
  const std::size_t in = p.in_dim();
  const std::size_t width = in + H;
  const std::size_t G = 4 * H;
  trace.steps = steps;
  trace.xh.resize(steps * width);
  trace.gates.resize(steps * G);
  trace.cell.assign((steps + 1) * H, 0.0);
  trace.tanh_cell.resize(steps * H);
  trace.hidden.resize(steps * H);
  const double* W = p.weight.data().data();
  const double* b = p.bias.data().data();
  std::vector<double> z(G);
  for (std::size_t t = 0; t < steps; ++t) {
    double* xh = &trace.xh[t * width];
    std::copy_n(&inputs[t * in], in, xh);
    if (t == 0) {
      std::fill_n(xh + in, H, 0.0);
    } else {
      std::copy_n(&trace.hidden[(t - 1) * H], H, xh + in);
    }
    std::copy_n(b, G, z.data());
    for (std::size_t k = 0; k < width; ++k) {
      const double v = xh[k];
      if (v == 0.0) continue;
      const double* w = W + k * G;
      for (std::size_t j = 0; j < G; ++j) z[j] += v * w[j];
    }
    double* g = &trace.gates[t * G];
    for (std::size_t j = 0; j < H; ++j) {
      g[j] = sigmoid(z[j]);
      g[H + j] = sigmoid(z[H + j]);
      g[2 * H + j] = std::tanh(z[2 * H + j]);
      g[3 * H + j] = sigmoid(z[3 * H + j]);
    }
    const double* c_prev = &trace.cell[t * H];
    double* c = &trace.cell[(t + 1) * H];
    double* tc = &trace.tanh_cell[t * H];
    double* h = &trace.hidden[t * H];
    for (std::size_t j = 0; j < H; ++j) {
      c[j] = g[H + j] * c_prev[j] + g[j] * g[2 * H + j];
      tc[j] = std::tanh(c[j]);
      h[j] = g[3 * H + j] * tc[j];
    }
  }
}

void lstm_backward(const LstmParams& p, const LstmTrace& trace, std::span<const double> d_hidden,
                   LstmParams& grad, std::span<double> d_inputs) {
  const std::size_t H = p.hidden();
  const std::size_t in = p.in_dim();
  const std::size_t width = in + H;
  const std::size_t G = 4 * H;
  const double* W = p.weight.data().data();
  double* gW = grad.weight.data().data();
  double* gb = grad.bias.data().data();
  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(G), dxh(width);
  for (std::size_t t = trace.steps; t-- > 0;) {
    const double* g = &trace.gates[t * G];
    const double* c_prev = &trace.cell[t * H];
    const double* tc = &trace.tanh_cell[t * H];
    for (std::size_t j = 0; j < H; ++j) {
      const double dh = d_hidden[t * H + j] + dh_next[j];
      const double i = g[j], f = g[H + j], cand = g[2 * H + j], o = g[3 * H + j];
      const double d_o = dh * tc[j];
      const double dc = dh * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
      dz[j] = dc * cand * i * (1.0 - i);
      dz[H + j] = dc * c_prev[j] * f * (1.0 - f);
      dz[2 * H + j] = dc * i * (1.0 - cand * cand);
      dz[3 * H + j] = d_o * o * (1.0 - o);
      dc_next[j] = dc * f;
    }
    for (std::size_t j = 0; j < G; ++j) gb[j] += dz[j];
    const double* xh = &trace.xh[t * width];
    for (std::size_t k = 0; k < width; ++k) {
      const double* w = W + k * G;
      double* gw = gW + k * G;
      const double v = xh[k];
      double s = 0.0;
      for (std::size_t j = 0; j < G; ++j) {
        gw[j] += v * dz[j];
        s += w[j] * dz[j];
      }
      dxh[k] = s;
    }
    if (!d_inputs.empty()) std::copy_n(dxh.data(), in, &d_inputs[t * in]);
    std::copy_n(dxh.data() + in, H, dh_next.data());
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::ranges::max_element(logits);
  double sum = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    out[t] = std::exp(logits[t] - m);
    sum += out[t];
  }
  for (double& v : out) v /= sum;
  return out;
}

void attention_forward_cached(const AttentionParams& p, std::span<const double> hidden_seq,
                              std::size_t steps, std::size_t hidden, AttentionTrace& trace) {
  const double* w = p.weight.data().data();
  trace.scores.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    double s = p.bias[0];
    for (std::size_t j = 0; j < hidden; ++j) s += hidden_seq[t * hidden + j] * w[j];
    trace.scores[t] = std::tanh(s);
  }
  trace.alphas = softmax(trace.scores);
  trace.context.assign(hidden, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const double a = trace.alphas[t];
    for (std::size_t j = 0; j < hidden; ++j) trace.context[j] += a * hidden_seq[t * hidden + j];
  }
}

void attention_backward(const AttentionParams& p, std::span<const double> hidden_seq,
                        std::size_t steps, std::size_t hidden, const AttentionTrace& trace,
                        std::span<const double> d_context, AttentionParams& grad,
                        std::span<double> d_hidden_seq) {
  std::vector<double> d_alpha(steps);
  double weighted = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < hidden; ++j) s += d_context[j] * hidden_seq[t * hidden + j];
    d_alpha[t] = s;
    weighted += trace.alphas[t] * s;
  }
  const double* w = p.weight.data().data();
  double* gw = grad.weight.data().data();
  for (std::size_t t = 0; t < steps; ++t) {
    const double a = trace.alphas[t];
    const double d_score = a * (d_alpha[t] - weighted);
    const double e = trace.scores[t];
    const double d_pre = d_score * (1.0 - e * e);
    grad.bias[0] += d_pre;
    const double* h = &hidden_seq[t * hidden];
    double* dh = &d_hidden_seq[t * hidden];
    for (std::size_t j = 0; j < hidden; ++j) {
      gw[j] += d_pre * h[j];
      dh[j] += a * d_context[j] + d_pre * w[j];
    }
  }
}

void dense_forward(const DenseParams& p, std::span<const double> in, std::span<double> out) {
  const std::size_t n_in = p.weight.dim(0), n_out = p.weight.dim(1);
  std::copy(p.bias.data().begin(), p.bias.data().end(), out.begin());
  const double* W = p.weight.data().data();
  for (std::size_t k = 0; k < n_in; ++k) {
    const double v = in[k];
    const double* w = W + k * n_out;
    for (std::size_t o = 0; o < n_out; ++o) out[o] += v * w[o];
  }
}

void dense_backward(const DenseParams& p, std::span<const double> in, std::span<const double> d_out,
                    DenseParams& grad, std::span<double> d_in) {
  const std::size_t n_in = p.weight.dim(0), n_out = p.weight.dim(1);
  const double* W = p.weight.data().data();
  double* gW = grad.weight.data().data();
  for (std::size_t o = 0; o < n_out; ++o) grad.bias[o] += d_out[o];
  for (std::size_t k = 0; k < n_in; ++k) {
    const double v = in[k];
    const double* w = W + k * n_out;
    double* gw = gW + k * n_out;
    double s = 0.0;
    for (std::size_t o = 0; o < n_out; ++o) {
      gw[o] += v * d_out[o];
      s += w[o] * d_out[o];
    }
    if (!d_in.empty()) d_in[k] = s;
  }
}

}  // namespace flowcast::nn
