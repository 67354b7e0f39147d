#pragma once

#include <vector>

#include "pathflow/errors.hpp"
#include "pathflow/nn/layers.hpp"
#include "pathflow/tensor.hpp"

namespace pathflow::nn {

// SGD with momentum and coupled weight decay:
//   v <- momentum * v + g + weight_decay * w
//   w <- w - lr * v
// Batchnorm running statistics are not parameters and are never touched.
class Sgd {
 public:
  Sgd(double lr, double momentum, double weight_decay)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
    if (lr <= 0.0) throw ConfigError("sgd: learning rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("sgd: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("sgd: weight decay must be >= 0");
  }

  void step(const std::vector<ParamRef>& params) {
    if (velocity_.empty()) {
      velocity_.resize(params.size());
      for (std::size_t b = 0; b < params.size(); ++b)
        velocity_[b].assign(params[b].data->size(), 0.0);
    }
    if (velocity_.size() != params.size())
      throw ConfigError("sgd: parameter block count changed between steps");

    // abort before modifying anything if any gradient is non-finite
    for (const auto& p : params)
      if (!all_finite(*p.grad))
        throw NumericError("sgd: non-finite gradient in block '" + p.name + "', step aborted");

    for (std::size_t b = 0; b < params.size(); ++b) {
      auto& w = *params[b].data;
      const auto& g = *params[b].grad;
      auto& v = velocity_[b];
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = momentum_ * v[i] + g[i] + weight_decay_ * w[i];
        w[i] -= lr_ * v[i];
      }
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, momentum_, weight_decay_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace pathflow::nn
