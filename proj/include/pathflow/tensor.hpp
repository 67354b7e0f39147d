#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pathflow/errors.hpp"

namespace pathflow {

// Dense 4-D array in (batch, channel, height, width) row-major order, fp64.
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {
    if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
      throw DataError("Tensor4: all dimensions must be positive");
  }

  std::size_t size() const { return v.size(); }

  std::size_t index(int i, int j, int y, int x) const {
    return ((static_cast<std::size_t>(i) * c + j) * h + y) * w + x;
  }

  double& at(int i, int j, int y, int x) { return v[index(i, j, y, x)]; }
  double at(int i, int j, int y, int x) const { return v[index(i, j, y, x)]; }

  double* plane(int i, int j) { return v.data() + index(i, j, 0, 0); }
  const double* plane(int i, int j) const { return v.data() + index(i, j, 0, 0); }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  static Tensor4 zeros_like(const Tensor4& o) { return Tensor4(o.n, o.c, o.h, o.w); }
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const Tensor4& t) { return all_finite(t.v); }

}  // namespace pathflow
