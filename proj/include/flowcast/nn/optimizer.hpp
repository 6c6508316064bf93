#pragma once

#include <span>
#include <vector>

#include "flowcast/nn/model.hpp"
#include "flowcast/tensor.hpp"

namespace flowcast::nn {

struct RmspropConfig {
  double learning_rate = 0.0002;
  double decay = 0.9;
  double eps = 1e-8;
};

// Running mean of squared gradients, one accumulator per parameter tensor.
struct OptimizerState {
  RmspropConfig config;
  std::vector<Tensor> accumulators;

  static OptimizerState for_params(std::span<const ConstParamRef> params, RmspropConfig config = {});
};

// acc <- decay * acc + (1 - decay) * g^2;  p <- p - lr * g / (sqrt(acc) + eps)
void rmsprop_step(std::span<const ParamRef> params, std::span<const Tensor> grads,
                  OptimizerState& state);

}  // namespace flowcast::nn
