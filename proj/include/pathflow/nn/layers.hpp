#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pathflow/errors.hpp"
#include "pathflow/rng.hpp"
#include "pathflow/tensor.hpp"

namespace pathflow::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

constexpr double kBnEpsilon = 1e-5;
constexpr double kBnMomentum = 0.9;

struct ForwardCtx {
  bool training = false;
  bool update_running = true;  // gradcheck freezes running stats
  bool keep_cache = true;      // pure inference can skip caches
};

// view of one parameter block, used by the optimizer, the gradient checker
// and the model serializer
struct ParamRef {
  std::string name;
  std::vector<double>* data;
  std::vector<double>* grad;
};

struct StatRef {
  std::string name;
  std::vector<double>* data;
};

inline void init_uniform_fan(std::vector<double>& w, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : w) v = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------
// Convolution (cross-correlation, no kernel flip)

struct ConvLayer {
  int in_c, out_c, k, stride, pad;
  std::vector<double> w, b;    // w: (out_c, in_c, k, k) row-major
  std::vector<double> dw, db;
  Tensor4 x_cache;

  ConvLayer(int in_c_, int out_c_, int k_, int stride_, int pad_)
      : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_),
        w(static_cast<std::size_t>(out_c_) * in_c_ * k_ * k_, 0.0), b(out_c_, 0.0),
        dw(w.size(), 0.0), db(out_c_, 0.0) {
    if (stride_ < 1) throw ConfigError("conv: stride must be >= 1");
    if (k_ < 1 || pad_ < 0) throw ConfigError("conv: bad kernel/padding");
  }

  static int out_dim(int d, int k, int stride, int pad) {
    return (d + 2 * pad - k) / stride + 1;
  }

  void init(Rng& rng) {
    init_uniform_fan(w, in_c * k * k, out_c * k * k, rng);
    std::fill(b.begin(), b.end(), 0.0);
  }

  Tensor4 forward(const Tensor4& x, const ForwardCtx& ctx) {
    if (x.c != in_c)
      throw DataError("conv: expected " + std::to_string(in_c) + " input channels, got " +
                      std::to_string(x.c));
    const int oh = out_dim(x.h, k, stride, pad);
    const int ow = out_dim(x.w, k, stride, pad);
    if (oh < 1 || ow < 1) throw DataError("conv: input too small for kernel");
    if (ctx.keep_cache) x_cache = x;

    const int ckk = in_c * k * k;
    const int p = oh * ow;
    cols_.resize(static_cast<std::size_t>(ckk) * p);
    Tensor4 y(x.n, out_c, oh, ow);
    CMapMat wm(w.data(), out_c, ckk);
    CMapVec bv(b.data(), out_c);
    for (int i = 0; i < x.n; ++i) {
      im2col(x, i, oh, ow);
      CMapMat cm(cols_.data(), ckk, p);
      MapMat ym(y.plane(i, 0), out_c, p);
      ym.noalias() = wm * cm;
      ym.colwise() += bv;
    }
    return y;
  }

  Tensor4 backward(const Tensor4& dy) {
    const Tensor4& x = x_cache;
    const int oh = dy.h, ow = dy.w;
    const int ckk = in_c * k * k;
    const int p = oh * ow;
    std::fill(dw.begin(), dw.end(), 0.0);
    std::fill(db.begin(), db.end(), 0.0);
    Tensor4 dx = Tensor4::zeros_like(x);

    cols_.resize(static_cast<std::size_t>(ckk) * p);
    dcols_.resize(cols_.size());
    CMapMat wm(w.data(), out_c, ckk);
    MapMat dwm(dw.data(), out_c, ckk);
    MapVec dbv(db.data(), out_c);
    for (int i = 0; i < x.n; ++i) {
      im2col(x, i, oh, ow);
      CMapMat cm(cols_.data(), ckk, p);
      CMapMat dym(dy.plane(i, 0), out_c, p);
      dbv += dym.rowwise().sum();
      dwm.noalias() += dym * cm.transpose();
      MapMat dcm(dcols_.data(), ckk, p);
      dcm.noalias() = wm.transpose() * dym;
      col2im_add(dx, i, oh, ow);
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w, &dw});
    out.push_back({prefix + ".b", &b, &db});
  }

 private:
  std::vector<double> cols_;   // im2col scratch, (in_c*k*k, oh*ow)
  std::vector<double> dcols_;

  void im2col(const Tensor4& x, int sample, int oh, int ow) {
    const int p = oh * ow;
    double* out = cols_.data();
    for (int c = 0; c < in_c; ++c) {
      const double* src = x.plane(sample, c);
      for (int ki = 0; ki < k; ++ki)
        for (int kj = 0; kj < k; ++kj) {
          double* row = out;
          out += p;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ki - pad;
            if (iy < 0 || iy >= x.h) {
              for (int ox = 0; ox < ow; ++ox) *row++ = 0.0;
              continue;
            }
            const double* srow = src + static_cast<std::size_t>(iy) * x.w;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride + kj - pad;
              *row++ = (ix < 0 || ix >= x.w) ? 0.0 : srow[ix];
            }
          }
        }
    }
  }

  void col2im_add(Tensor4& dx, int sample, int oh, int ow) {
    const int p = oh * ow;
    const double* in = dcols_.data();
    for (int c = 0; c < in_c; ++c) {
      double* dst = dx.plane(sample, c);
      for (int ki = 0; ki < k; ++ki)
        for (int kj = 0; kj < k; ++kj) {
          const double* row = in;
          in += p;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ki - pad;
            if (iy < 0 || iy >= dx.h) continue;
            double* drow = dst + static_cast<std::size_t>(iy) * dx.w;
            const double* srow = row + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride + kj - pad;
              if (ix >= 0 && ix < dx.w) drow[ix] += srow[ox];
            }
          }
        }
    }
  }
};

// ---------------------------------------------------------------------------
// Batch normalization over (n, h, w) per channel

struct BatchNormLayer {
  int channels;
  std::vector<double> gamma, beta;
  std::vector<double> dgamma, dbeta;
  std::vector<double> running_mean, running_var;

  explicit BatchNormLayer(int channels_)
      : channels(channels_), gamma(channels_, 1.0), beta(channels_, 0.0),
        dgamma(channels_, 0.0), dbeta(channels_, 0.0), running_mean(channels_, 0.0),
        running_var(channels_, 1.0) {}

  Tensor4 forward(const Tensor4& x, const ForwardCtx& ctx) {
    if (x.c != channels) throw DataError("batchnorm: channel mismatch");
    Tensor4 y = Tensor4::zeros_like(x);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    if (ctx.training) {
      if (x.n < 2) throw DataError("batchnorm: train mode requires batch size >= 2");
      const double m = static_cast<double>(x.n) * plane;
      if (ctx.keep_cache) {
        xhat_cache = Tensor4::zeros_like(x);
        invstd_cache.assign(channels, 0.0);
      }
      for (int c = 0; c < channels; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < x.n; ++i) {
          const double* p = x.plane(i, c);
          for (std::size_t t = 0; t < plane; ++t) {
            sum += p[t];
            sumsq += p[t] * p[t];
          }
        }
        const double mean = sum / m;
        double var = sumsq / m - mean * mean;
        if (var < 0.0) var = 0.0;
        const double invstd = 1.0 / std::sqrt(var + kBnEpsilon);
        for (int i = 0; i < x.n; ++i) {
          const double* p = x.plane(i, c);
          double* q = y.plane(i, c);
          double* xh = ctx.keep_cache ? xhat_cache.plane(i, c) : nullptr;
          for (std::size_t t = 0; t < plane; ++t) {
            const double h = (p[t] - mean) * invstd;
            if (xh) xh[t] = h;
            q[t] = gamma[c] * h + beta[c];
          }
        }
        if (ctx.keep_cache) invstd_cache[c] = invstd;
        if (ctx.update_running) {
          running_mean[c] = kBnMomentum * running_mean[c] + (1.0 - kBnMomentum) * mean;
          running_var[c] = kBnMomentum * running_var[c] + (1.0 - kBnMomentum) * var;
        }
      }
    } else {
      for (int c = 0; c < channels; ++c) {
        const double invstd = 1.0 / std::sqrt(running_var[c] + kBnEpsilon);
        for (int i = 0; i < x.n; ++i) {
          const double* p = x.plane(i, c);
          double* q = y.plane(i, c);
          for (std::size_t t = 0; t < plane; ++t)
            q[t] = gamma[c] * (p[t] - running_mean[c]) * invstd + beta[c];
        }
      }
    }
    return y;
  }

  Tensor4 backward(const Tensor4& dy) {
    Tensor4 dx = Tensor4::zeros_like(dy);
    const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
    const double m = static_cast<double>(dy.n) * plane;
    for (int c = 0; c < channels; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int i = 0; i < dy.n; ++i) {
        const double* d = dy.plane(i, c);
        const double* xh = xhat_cache.plane(i, c);
        for (std::size_t t = 0; t < plane; ++t) {
          sum_dy += d[t];
          sum_dy_xhat += d[t] * xh[t];
        }
      }
      dgamma[c] = sum_dy_xhat;
      dbeta[c] = sum_dy;
      const double scale = gamma[c] * invstd_cache[c] / m;
      for (int i = 0; i < dy.n; ++i) {
        const double* d = dy.plane(i, c);
        const double* xh = xhat_cache.plane(i, c);
        double* dst = dx.plane(i, c);
        for (std::size_t t = 0; t < plane; ++t)
          dst[t] = scale * (m * d[t] - sum_dy - xh[t] * sum_dy_xhat);
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gamma", &gamma, &dgamma});
    out.push_back({prefix + ".beta", &beta, &dbeta});
  }

  void collect_stats(const std::string& prefix, std::vector<StatRef>& out) {
    out.push_back({prefix + ".running_mean", &running_mean});
    out.push_back({prefix + ".running_var", &running_var});
  }

 private:
  Tensor4 xhat_cache;
  std::vector<double> invstd_cache;
};

// ---------------------------------------------------------------------------

struct ReluLayer {
  Tensor4 forward(const Tensor4& x, const ForwardCtx& ctx) {
    Tensor4 y = x;
    for (auto& v : y.v) v = v > 0.0 ? v : 0.0;
    if (ctx.keep_cache) {
      mask_.assign(x.size(), 0);
      for (std::size_t t = 0; t < x.size(); ++t) mask_[t] = x.v[t] > 0.0;
    }
    return y;
  }

  Tensor4 backward(const Tensor4& dy) {
    Tensor4 dx = dy;
    for (std::size_t t = 0; t < dx.size(); ++t)
      if (!mask_[t]) dx.v[t] = 0.0;
    return dx;
  }

 private:
  std::vector<std::uint8_t> mask_;
};

// 2x2 max pooling, stride 2. Gradient routes to the first row-major maximum.
struct MaxPoolLayer {
  Tensor4 forward(const Tensor4& x, const ForwardCtx& ctx) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
      throw DataError("maxpool: spatial dims must be even, got " + std::to_string(x.h) + "x" +
                      std::to_string(x.w));
    in_h_ = x.h;
    in_w_ = x.w;
    const int oh = x.h / 2, ow = x.w / 2;
    Tensor4 y(x.n, x.c, oh, ow);
    if (ctx.keep_cache) argmax_.assign(y.size(), 0);
    std::size_t oi = 0;
    for (int i = 0; i < x.n; ++i)
      for (int c = 0; c < x.c; ++c) {
        const double* p = x.plane(i, c);
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox, ++oi) {
            const std::size_t base = static_cast<std::size_t>(2 * oy) * x.w + 2 * ox;
            // row-major window order: (0,0), (0,1), (1,0), (1,1)
            const std::size_t idx[4] = {base, base + 1, base + x.w, base + x.w + 1};
            std::size_t best = idx[0];
            double bv = p[idx[0]];
            for (int t = 1; t < 4; ++t)
              if (p[idx[t]] > bv) {
                bv = p[idx[t]];
                best = idx[t];
              }
            y.v[oi] = bv;
            if (ctx.keep_cache) argmax_[oi] = best;
          }
      }
    return y;
  }

  Tensor4 backward(const Tensor4& dy) {
    Tensor4 dx(dy.n, dy.c, in_h_, in_w_);
    std::size_t oi = 0;
    for (int i = 0; i < dy.n; ++i)
      for (int c = 0; c < dy.c; ++c) {
        double* dst = dx.plane(i, c);
        const std::size_t cnt = static_cast<std::size_t>(dy.h) * dy.w;
        for (std::size_t t = 0; t < cnt; ++t, ++oi) dst[argmax_[oi]] += dy.v[oi];
      }
    return dx;
  }

 private:
  std::vector<std::size_t> argmax_;
  int in_h_ = 0, in_w_ = 0;
};

// Global average pooling; output is the embedding vector as (n, 1, 1, c).
struct GlobalAvgPoolLayer {
  Tensor4 forward(const Tensor4& x, const ForwardCtx&) {
    in_c_ = x.c;
    in_h_ = x.h;
    in_w_ = x.w;
    Tensor4 y(x.n, 1, 1, x.c);
    const double inv = 1.0 / (static_cast<double>(x.h) * x.w);
    for (int i = 0; i < x.n; ++i)
      for (int c = 0; c < x.c; ++c) {
        const double* p = x.plane(i, c);
        double s = 0.0;
        const std::size_t cnt = static_cast<std::size_t>(x.h) * x.w;
        for (std::size_t t = 0; t < cnt; ++t) s += p[t];
        y.at(i, 0, 0, c) = s * inv;
      }
    return y;
  }

  Tensor4 backward(const Tensor4& dy) {
    Tensor4 dx(dy.n, in_c_, in_h_, in_w_);
    const double inv = 1.0 / (static_cast<double>(in_h_) * in_w_);
    for (int i = 0; i < dy.n; ++i)
      for (int c = 0; c < in_c_; ++c) {
        const double g = dy.at(i, 0, 0, c) * inv;
        double* dst = dx.plane(i, c);
        const std::size_t cnt = static_cast<std::size_t>(in_h_) * in_w_;
        for (std::size_t t = 0; t < cnt; ++t) dst[t] = g;
      }
    return dx;
  }

 private:
  int in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

struct DenseLayer {
  int in_features, units;
  std::vector<double> w, b;  // w: (units, in_features) row-major
  std::vector<double> dw, db;

  DenseLayer(int in_features_, int units_)
      : in_features(in_features_), units(units_),
        w(static_cast<std::size_t>(units_) * in_features_, 0.0), b(units_, 0.0),
        dw(w.size(), 0.0), db(units_, 0.0) {}

  void init(Rng& rng) {
    init_uniform_fan(w, in_features, units, rng);
    std::fill(b.begin(), b.end(), 0.0);
  }

  Tensor4 forward(const Tensor4& x, const ForwardCtx& ctx) {
    if (x.c * x.h * x.w != in_features)
      throw DataError("dense: expected " + std::to_string(in_features) + " features, got " +
                      std::to_string(x.c * x.h * x.w));
    if (ctx.keep_cache) x_cache_ = x;
    Tensor4 y(x.n, 1, 1, units);
    CMapMat xm(x.v.data(), x.n, in_features);
    CMapMat wm(w.data(), units, in_features);
    MapMat ym(y.v.data(), x.n, units);
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += CMapVec(b.data(), units).transpose();
    return y;
  }

  Tensor4 backward(const Tensor4& dy) {
    const Tensor4& x = x_cache_;
    CMapMat xm(x.v.data(), x.n, in_features);
    CMapMat dym(dy.v.data(), dy.n, units);
    MapMat dwm(dw.data(), units, in_features);
    dwm.noalias() = dym.transpose() * xm;
    MapVec(db.data(), units) = dym.colwise().sum();
    Tensor4 dx = Tensor4::zeros_like(x);
    MapMat dxm(dx.v.data(), x.n, in_features);
    dxm.noalias() = dym * CMapMat(w.data(), units, in_features);
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w", &w, &dw});
    out.push_back({prefix + ".b", &b, &db});
  }

 private:
  Tensor4 x_cache_;
};

// ---------------------------------------------------------------------------
// Residual block: conv-bn-relu-conv-bn + shortcut, then relu.
// Projection shortcut (1x1 conv + bn) iff stride > 1 or the channel
// count changes; identity otherwise.

struct ResidualBlock {
  int in_c, out_c, stride;
  ConvLayer conv1, conv2;
  BatchNormLayer bn1, bn2;
  ReluLayer relu1, relu_out;
  bool has_projection;
  ConvLayer proj_conv;
  BatchNormLayer proj_bn;

  ResidualBlock(int in_c_, int out_c_, int stride_)
      : in_c(in_c_), out_c(out_c_), stride(stride_),
        conv1(in_c_, out_c_, 3, stride_, 1), conv2(out_c_, out_c_, 3, 1, 1),
        bn1(out_c_), bn2(out_c_),
        has_projection(stride_ > 1 || in_c_ != out_c_),
        proj_conv(in_c_, out_c_, 1, stride_, 0), proj_bn(out_c_) {}

  void init(Rng& rng) {
    conv1.init(rng);
    conv2.init(rng);
    if (has_projection) proj_conv.init(rng);
  }

  Tensor4 forward(const Tensor4& x, const ForwardCtx& ctx) {
    Tensor4 branch = relu1.forward(bn1.forward(conv1.forward(x, ctx), ctx), ctx);
    branch = bn2.forward(conv2.forward(branch, ctx), ctx);
    Tensor4 shortcut = has_projection ? proj_bn.forward(proj_conv.forward(x, ctx), ctx) : x;
    if (!branch.same_shape(shortcut))
      throw DataError("residual block: branch/shortcut shape mismatch");
    for (std::size_t t = 0; t < branch.size(); ++t) branch.v[t] += shortcut.v[t];
    return relu_out.forward(branch, ctx);
  }

  Tensor4 backward(const Tensor4& dy) {
    Tensor4 dsum = relu_out.backward(dy);
    Tensor4 dbranch = conv1.backward(relu1.backward(bn1.backward(
        conv2.backward(bn2.backward(dsum)))));
    if (has_projection) {
      Tensor4 dshort = proj_conv.backward(proj_bn.backward(dsum));
      for (std::size_t t = 0; t < dbranch.size(); ++t) dbranch.v[t] += dshort.v[t];
    } else {
      for (std::size_t t = 0; t < dbranch.size(); ++t) dbranch.v[t] += dsum.v[t];
    }
    return dbranch;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    conv1.collect(prefix + ".conv1", out);
    bn1.collect(prefix + ".bn1", out);
    conv2.collect(prefix + ".conv2", out);
    bn2.collect(prefix + ".bn2", out);
    if (has_projection) {
      proj_conv.collect(prefix + ".proj", out);
      proj_bn.collect(prefix + ".proj_bn", out);
    }
  }

  void collect_stats(const std::string& prefix, std::vector<StatRef>& out) {
    bn1.collect_stats(prefix + ".bn1", out);
    bn2.collect_stats(prefix + ".bn2", out);
    if (has_projection) proj_bn.collect_stats(prefix + ".proj_bn", out);
  }
};

}  // namespace pathflow::nn
