#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pathflow/nn/layers.hpp"

namespace pathflow::nn {

enum class Mode { Train, Eval };

// Serializable layer descriptor. Field use depends on kind:
//   conv:      in_c, out_c, k, stride, pad
//   batchnorm: in_c (channels)
//   residual:  in_c, out_c, stride
//   dense:     in_c (features), units
struct LayerSpec {
  enum class Kind { Conv, BatchNorm, Relu, MaxPool, Residual, GlobalAvgPool, Dense };
  Kind kind = Kind::Relu;
  int in_c = 0, out_c = 0, k = 0, stride = 1, pad = 0, units = 0;

  static LayerSpec conv(int in_c, int out_c, int k, int stride, int pad) {
    if (pad == (k - 1) / 2 && k % 2 == 0)
      throw ConfigError("conv spec: same-padding requires an odd kernel");
    return {Kind::Conv, in_c, out_c, k, stride, pad, 0};
  }
  static LayerSpec batchnorm(int channels) { return {Kind::BatchNorm, channels, 0, 0, 1, 0, 0}; }
  static LayerSpec relu() { return {Kind::Relu}; }
  static LayerSpec maxpool() { return {Kind::MaxPool}; }
  static LayerSpec residual(int in_c, int out_c, int stride) {
    return {Kind::Residual, in_c, out_c, 0, stride, 0, 0};
  }
  static LayerSpec global_avg_pool() { return {Kind::GlobalAvgPool}; }
  static LayerSpec dense(int in_features, int units) {
    return {Kind::Dense, in_features, 0, 0, 1, 0, units};
  }

  bool operator==(const LayerSpec&) const = default;
};

inline const char* kind_name(LayerSpec::Kind k) {
  switch (k) {
    case LayerSpec::Kind::Conv: return "conv";
    case LayerSpec::Kind::BatchNorm: return "batchnorm";
    case LayerSpec::Kind::Relu: return "relu";
    case LayerSpec::Kind::MaxPool: return "maxpool";
    case LayerSpec::Kind::Residual: return "residual_block";
    case LayerSpec::Kind::GlobalAvgPool: return "global_avg_pool";
    default: return "dense";
  }
}

// Shape algebra: output (c,h,w) of one layer, throwing on invalid input.
inline std::array<int, 3> infer_shape(const LayerSpec& s, std::array<int, 3> in, int layer_index) {
  auto [c, h, w] = in;
  auto fail = [&](const std::string& why) {
    throw DataError("layer " + std::to_string(layer_index) + " (" + kind_name(s.kind) +
                    "): " + why);
  };
  switch (s.kind) {
    case LayerSpec::Kind::Conv: {
      if (c != s.in_c) fail("expects " + std::to_string(s.in_c) + " channels, got " + std::to_string(c));
      const int oh = ConvLayer::out_dim(h, s.k, s.stride, s.pad);
      const int ow = ConvLayer::out_dim(w, s.k, s.stride, s.pad);
      if (oh < 1 || ow < 1) fail("input too small for kernel");
      return {s.out_c, oh, ow};
    }
    case LayerSpec::Kind::BatchNorm:
      if (c != s.in_c) fail("channel mismatch");
      return in;
    case LayerSpec::Kind::Relu:
      return in;
    case LayerSpec::Kind::MaxPool:
      if (h % 2 != 0 || w % 2 != 0) fail("spatial dims must be even");
      return {c, h / 2, w / 2};
    case LayerSpec::Kind::Residual: {
      if (c != s.in_c) fail("expects " + std::to_string(s.in_c) + " channels, got " + std::to_string(c));
      const int oh = ConvLayer::out_dim(h, 3, s.stride, 1);
      const int ow = ConvLayer::out_dim(w, 3, s.stride, 1);
      if (oh < 1 || ow < 1) fail("input too small");
      return {s.out_c, oh, ow};
    }
    case LayerSpec::Kind::GlobalAvgPool:
      return {c, 1, 1};  // emitted as (n,1,1,c); feature count is c
    default:  // Dense
      if (c * h * w != s.in_c) fail("expects " + std::to_string(s.in_c) + " features, got " + std::to_string(c * h * w));
      return {1, 1, s.units};
  }
}

inline std::array<int, 3> infer_output_shape(const std::vector<LayerSpec>& specs,
                                             std::array<int, 3> in) {
  std::array<int, 3> cur = in;
  bool after_gap = false;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (after_gap) {
      // embedding lives in the last axis: (1,1,F)
      cur = infer_shape(specs[i], {cur[0] * cur[1] * cur[2], 1, 1}, static_cast<int>(i));
      after_gap = specs[i].kind == LayerSpec::Kind::GlobalAvgPool;
      continue;
    }
    cur = infer_shape(specs[i], cur, static_cast<int>(i));
    if (specs[i].kind == LayerSpec::Kind::GlobalAvgPool ||
        specs[i].kind == LayerSpec::Kind::Dense)
      cur = {1, 1, cur[0] * cur[1] * cur[2]};
  }
  return cur;
}

struct NetOutput {
  Tensor4 embedding;  // (n, 1, 1, F), the vectorized feature maps
  Tensor4 output;     // (n, 1, 1, units), the head input
};

// The residual network: an ordered layer list executed as a tape. Training
// calls are serialized per instance; inference workers clone the network.
class Network {
 public:
  Network(std::vector<LayerSpec> specs, std::array<int, 3> input_chw)
      : specs_(std::move(specs)), input_chw_(input_chw) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const LayerSpec& s = specs_[i];
      switch (s.kind) {
        case LayerSpec::Kind::Conv:
          layers_.emplace_back(ConvLayer(s.in_c, s.out_c, s.k, s.stride, s.pad));
          break;
        case LayerSpec::Kind::BatchNorm:
          layers_.emplace_back(BatchNormLayer(s.in_c));
          break;
        case LayerSpec::Kind::Relu:
          layers_.emplace_back(ReluLayer());
          break;
        case LayerSpec::Kind::MaxPool:
          layers_.emplace_back(MaxPoolLayer());
          break;
        case LayerSpec::Kind::Residual:
          layers_.emplace_back(ResidualBlock(s.in_c, s.out_c, s.stride));
          break;
        case LayerSpec::Kind::GlobalAvgPool:
          layers_.emplace_back(GlobalAvgPoolLayer());
          break;
        case LayerSpec::Kind::Dense:
          layers_.emplace_back(DenseLayer(s.in_c, s.units));
          break;
      }
    }
    // validate the composition up front
    infer_output_shape(specs_, input_chw_);
  }

  void init_params(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : layers_)
      std::visit(
          [&rng](auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, ConvLayer> || std::is_same_v<T, DenseLayer> ||
                          std::is_same_v<T, ResidualBlock>)
              l.init(rng);
          },
          layer);
  }

  NetOutput forward(const Tensor4& x, Mode mode, bool update_running = true,
                    bool keep_cache = true) {
    if (x.c != input_chw_[0] || x.h != input_chw_[1] || x.w != input_chw_[2])
      throw DataError("network: input shape mismatch");
    ForwardCtx ctx;
    ctx.training = mode == Mode::Train;
    ctx.update_running = update_running;
    ctx.keep_cache = keep_cache;

    NetOutput out;
    Tensor4 cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      cur = std::visit([&](auto& l) { return l.forward(cur, ctx); }, layers_[i]);
      if (!all_finite(cur))
        throw NumericError("non-finite activation at layer " + std::to_string(i) + " (" +
                           kind_name(specs_[i].kind) + ")");
      if (specs_[i].kind == LayerSpec::Kind::GlobalAvgPool) out.embedding = cur;
    }
    if (out.embedding.size() == 0) out.embedding = cur;
    out.output = cur;
    return out;
  }

  // Backward through the tape; fills every layer's parameter gradients and
  // returns the input gradient.
  Tensor4 backward(const Tensor4& dout) {
    Tensor4 cur = dout;
    for (std::size_t i = layers_.size(); i-- > 0;)
      cur = std::visit([&](auto& l) { return l.backward(cur); }, layers_[i]);
    return cur;
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string prefix = "L" + std::to_string(i);
      std::visit(
          [&](auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, ConvLayer>)
              l.collect(prefix + ".conv", out);
            else if constexpr (std::is_same_v<T, BatchNormLayer>)
              l.collect(prefix + ".bn", out);
            else if constexpr (std::is_same_v<T, DenseLayer>)
              l.collect(prefix + ".dense", out);
            else if constexpr (std::is_same_v<T, ResidualBlock>)
              l.collect(prefix + ".res", out);
          },
          layers_[i]);
    }
    return out;
  }

  std::vector<StatRef> stats() {
    std::vector<StatRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string prefix = "L" + std::to_string(i);
      std::visit(
          [&](auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, BatchNormLayer>)
              l.collect_stats(prefix + ".bn", out);
            else if constexpr (std::is_same_v<T, ResidualBlock>)
              l.collect_stats(prefix + ".res", out);
          },
          layers_[i]);
    }
    return out;
  }

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::array<int, 3> input_shape() const { return input_chw_; }

  std::array<int, 3> output_shape() const { return infer_output_shape(specs_, input_chw_); }

 private:
  using Layer = std::variant<ConvLayer, BatchNormLayer, ReluLayer, MaxPoolLayer, ResidualBlock,
                             GlobalAvgPoolLayer, DenseLayer>;
  std::vector<LayerSpec> specs_;
  std::array<int, 3> input_chw_;
  std::vector<Layer> layers_;
};

// Default architecture: 3x3/16 stem, one maxpool, three stages of two
// residual blocks at widths 16/32/64 with a stride-2 projection entering
// each stage, global average pooling and a dense head.
inline std::vector<LayerSpec> default_network_spec(int in_channels = 3, int units = 1) {
  const int widths[3] = {16, 32, 64};
  std::vector<LayerSpec> specs;
  specs.push_back(LayerSpec::conv(in_channels, widths[0], 3, 1, 1));
  specs.push_back(LayerSpec::batchnorm(widths[0]));
  specs.push_back(LayerSpec::relu());
  specs.push_back(LayerSpec::maxpool());
  int cur = widths[0];
  for (int stage = 0; stage < 3; ++stage) {
    specs.push_back(LayerSpec::residual(cur, widths[stage], 2));
    specs.push_back(LayerSpec::residual(widths[stage], widths[stage], 1));
    cur = widths[stage];
  }
  specs.push_back(LayerSpec::global_avg_pool());
  specs.push_back(LayerSpec::dense(cur, units));
  return specs;
}

}  // namespace pathflow::nn
