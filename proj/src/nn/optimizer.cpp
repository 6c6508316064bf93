#include "flowcast/nn/optimizer.hpp"

#include <cmath>

#include "flowcast/errors.hpp"

namespace flowcast::nn {

OptimizerState OptimizerState::for_params(std::span<const ConstParamRef> params,
                                          RmspropConfig config) {
  OptimizerState s;
  s.config = config;
  s.accumulators = zeros_like(params);
  return s;
}

void rmsprop_step(std::span<const ParamRef> params, std::span<const Tensor> grads,
                  OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.accumulators.size()) {
    throw StructuralError("rmsprop_step: parameter, gradient and state counts differ");
  }
  const double lr = state.config.learning_rate;
  const double decay = state.config.decay;
  const double eps = state.config.eps;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].tensor;
    const Tensor& g = grads[i];
    Tensor& acc = state.accumulators[i];
    require_same_shape(p, g, "rmsprop_step " + params[i].name);
    require_same_shape(p, acc, "rmsprop_step " + params[i].name);
    for (std::size_t k = 0; k < p.size(); ++k) {
      acc[k] = decay * acc[k] + (1.0 - decay) * g[k] * g[k];
      p[k] -= lr * g[k] / (std::sqrt(acc[k]) + eps);
    }
  }
}

}  // namespace flowcast::nn
