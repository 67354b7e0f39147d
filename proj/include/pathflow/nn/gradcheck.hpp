#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pathflow/nn/network.hpp"
#include "pathflow/rng.hpp"

namespace pathflow::nn {

// loss function over the network output: returns (loss, dloss/doutput)
using LossFn = std::function<std::pair<double, Tensor4>(const Tensor4&)>;

struct GradCheckReport {
  struct Block {
    std::string name;
    double max_rel_error = 0.0;
  };
  std::vector<Block> blocks;
  double global_max = 0.0;
  double epsilon = 0.0;
};

namespace detail {

inline double eval_loss(Network& net, const Tensor4& x, const LossFn& loss_fn) {
  // train-mode forward with frozen running stats, so the loss is a pure
  // function of the parameters
  NetOutput out = net.forward(x, Mode::Train, /*update_running=*/false);
  return loss_fn(out.output).first;
}

}  // namespace detail

// Central finite differences on a random sample of coordinates per block,
// compared against externally supplied analytic gradients.
inline GradCheckReport grad_check_against(Network& net, const Tensor4& x, const LossFn& loss_fn,
                                          double epsilon,
                                          const std::vector<std::vector<double>>& analytic,
                                          std::uint64_t seed = 42, int coords_per_block = 32) {
  if (epsilon < 1e-7 || epsilon > 1e-3)
    throw ConfigError("grad_check: epsilon must be in [1e-7, 1e-3]");
  auto params = net.params();
  if (analytic.size() != params.size())
    throw ConfigError("grad_check: gradient block count mismatch");

  GradCheckReport report;
  report.epsilon = epsilon;
  Rng rng(seed);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& data = *params[b].data;
    std::vector<std::size_t> coords(data.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > static_cast<std::size_t>(coords_per_block)) {
      rng.shuffle(coords);
      coords.resize(coords_per_block);
    }
    double worst = 0.0;
    for (std::size_t ci : coords) {
      const double saved = data[ci];
      data[ci] = saved + epsilon;
      const double lp = detail::eval_loss(net, x, loss_fn);
      data[ci] = saved - epsilon;
      const double lm = detail::eval_loss(net, x, loss_fn);
      data[ci] = saved;
      const double numeric = (lp - lm) / (2.0 * epsilon);
      const double a = analytic[b][ci];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-12});
      worst = std::max(worst, rel);
    }
    report.blocks.push_back({params[b].name, worst});
    report.global_max = std::max(report.global_max, worst);
  }
  return report;
}

// End-to-end check of the network's own backward pass.
inline GradCheckReport grad_check(Network& net, const Tensor4& x, const LossFn& loss_fn,
                                  double epsilon, std::uint64_t seed = 42,
                                  int coords_per_block = 32) {
  NetOutput out = net.forward(x, Mode::Train, /*update_running=*/false);
  auto [loss, dout] = loss_fn(out.output);
  (void)loss;
  net.backward(dout);
  std::vector<std::vector<double>> analytic;
  for (const auto& p : net.params()) analytic.push_back(*p.grad);
  return grad_check_against(net, x, loss_fn, epsilon, analytic, seed, coords_per_block);
}

}  // namespace pathflow::nn
