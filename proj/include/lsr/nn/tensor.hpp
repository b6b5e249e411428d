#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lsr/error.hpp"

namespace lsr::nn {

// NCHW, contiguous, cols innermost. Templated on the scalar so the same
// kernels run in float for training and in double for gradient checks.
template <typename T>
struct Tensor4T {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4T() = default;
  Tensor4T(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

  static Tensor4T zeros_like(const Tensor4T& o) { return Tensor4T(o.n, o.c, o.h, o.w); }

  std::size_t size() const { return data.size(); }

  T& at(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * c + j) * h + k) * w + l];
  }
  T at(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * c + j) * h + k) * w + l];
  }

  T* plane(int i, int j) { return data.data() + (static_cast<std::size_t>(i) * c + j) * h * w; }
  const T* plane(int i, int j) const {
    return data.data() + (static_cast<std::size_t>(i) * c + j) * h * w;
  }

  bool same_shape(const Tensor4T& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

  std::string shape_str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }

  void check_finite(const char* where) const {
    for (const T v : data)
      if (!std::isfinite(v)) throw NumericError(std::string("non-finite value after ") + where);
  }
};

using Tensor4 = Tensor4T<float>;

}  // namespace lsr::nn
