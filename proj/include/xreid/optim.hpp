#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "xreid/tensor.hpp"

namespace xreid {

struct OptimConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int decay_every = 10;
  double decay_factor = 0.1;
};

// Step schedule: lr = lr0 * factor^floor(epoch / every), epochs counted from 0.
inline double lr_at_epoch(const OptimConfig& cfg, int epoch) {
  if (epoch < 0) throw std::invalid_argument("lr_at_epoch: epoch must be >= 0");
  return cfg.lr0 * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
}

// Momentum buffers, one per parameter tensor, in parameter-list order.
template <class T>
struct SgdState {
  std::vector<std::vector<T>> velocity;
};

// Classic SGD with momentum and decoupled-from-nothing L2:
//   v <- momentum * v + (grad + weight_decay * param)
//   param <- param - lr * v
// Parameters never touched by the last backward pass contribute zero grad (so
// only weight decay moves them). A non-finite gradient aborts with the
// parameter's name.
template <class T>
void sgd_step(std::vector<std::pair<std::string, Tensor<T>>>& params, SgdState<T>& state,
              const OptimConfig& cfg, int epoch) {
  const T lr = static_cast<T>(lr_at_epoch(cfg, epoch));
  const T mom = static_cast<T>(cfg.momentum);
  const T wd = static_cast<T>(cfg.weight_decay);
  if (state.velocity.empty()) {
    state.velocity.resize(params.size());
    for (size_t k = 0; k < params.size(); ++k)
      state.velocity[k].assign(static_cast<size_t>(params[k].second.numel()), T(0));
  } else if (state.velocity.size() != params.size()) {
    throw std::invalid_argument("sgd_step: optimizer state does not match parameter list");
  }
  for (size_t k = 0; k < params.size(); ++k) {
    auto& [name, p] = params[k];
    const std::vector<T> grad = p.grad_or_zeros();
    auto& buf = p.leaf_value();
    auto& vel = state.velocity[k];
    if (vel.size() != grad.size())
      throw std::invalid_argument("sgd_step: state size mismatch for parameter " + name);
    for (size_t i = 0; i < grad.size(); ++i) {
      if (!std::isfinite(static_cast<double>(grad[i])))
        throw NumericError("sgd_step: non-finite gradient in parameter " + name);
      vel[i] = mom * vel[i] + (grad[i] + wd * buf[i]);
      buf[i] -= lr * vel[i];
    }
  }
}

}  // namespace xreid
