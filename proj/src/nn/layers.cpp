#include "lsr/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "lsr/parallel.hpp"

namespace lsr::nn {

namespace {

void check_conv_args(const char* op, int x_c, const ConvSpec& cs, std::size_t wsz,
                     std::size_t bsz, int expect_in) {
  if (x_c != expect_in)
    throw ConfigError(std::string(op) + ": input has " + std::to_string(x_c) +
                      " channels, spec expects " + std::to_string(expect_in));
  if (wsz != cs.weight_count()) throw ConfigError(std::string(op) + ": weight size mismatch");
  if (bsz != static_cast<std::size_t>(cs.out_ch))
    throw ConfigError(std::string(op) + ": bias size mismatch");
  if (cs.kh < 1 || cs.kw < 1 || cs.sh < 1 || cs.sw < 1 || cs.ph < 0 || cs.pw < 0)
    throw ConfigError(std::string(op) + ": bad kernel/stride/padding");
}

// Valid output (or input) column range for a given kernel tap, so inner
// loops run branch-free.
inline int lo_index(int shift, int stride) {
  return shift >= 0 ? 0 : (-shift + stride - 1) / stride;
}

// Dot product with independent partial lanes so the reduction vectorizes
// under strict FP semantics. Fixed summation order keeps it deterministic.
template <typename T>
T dot_lanes(const T* __restrict a, const T* __restrict b, int n) {
  constexpr int kLanes = 16;
  T lane[kLanes] = {};
  int i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (int u = 0; u < kLanes; ++u) lane[u] += a[i + u] * b[i + u];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  T acc = T(0);
  for (int u = 0; u < kLanes; ++u) acc += lane[u];
  return acc + tail;
}

}  // namespace

template <typename T>
Tensor4T<T> conv2d_forward(const Tensor4T<T>& x, const ConvSpec& cs,
                           const std::vector<T>& weight, const std::vector<T>& bias) {
  check_conv_args("conv2d", x.c, cs, weight.size(), bias.size(), cs.in_ch);
  const int oh = cs.conv_out_h(x.h), ow = cs.conv_out_w(x.w);
  if (oh < 1 || ow < 1)
    throw ConfigError("conv2d: output would be empty for input " + x.shape_str());
  Tensor4T<T> y(x.n, cs.out_ch, oh, ow);

  // Row-local accumulator: each output row takes one pass over the taps
  // while staying in L1, instead of one output-plane sweep per tap.
  parallel_for(static_cast<std::int64_t>(x.n) * cs.out_ch, [&](std::int64_t b0, std::int64_t b1) {
    std::vector<T> acc(ow);
    for (std::int64_t idx = b0; idx < b1; ++idx) {
      const int n = static_cast<int>(idx / cs.out_ch);
      const int oc = static_cast<int>(idx % cs.out_ch);
      T* yp = y.plane(n, oc);
      for (int oi = 0; oi < oh; ++oi) {
        std::fill(acc.begin(), acc.end(), bias[oc]);
        T* __restrict a = acc.data();
        for (int ic = 0; ic < cs.in_ch; ++ic) {
          const T* xp = x.plane(n, ic);
          const T* wk =
              weight.data() + ((static_cast<std::size_t>(oc) * cs.in_ch + ic) * cs.kh) * cs.kw;
          for (int ki = 0; ki < cs.kh; ++ki) {
            const int ih = oi * cs.sh - cs.ph + ki;
            if (ih < 0 || ih >= x.h) continue;
            const T* __restrict xrow = xp + static_cast<std::size_t>(ih) * x.w;
            for (int kj = 0; kj < cs.kw; ++kj) {
              const T wv = wk[ki * cs.kw + kj];
              const int shift = kj - cs.pw;
              const int o_lo = lo_index(shift, cs.sw);
              const int o_hi = std::min(ow - 1, (x.w - 1 - shift) / cs.sw);
              if (cs.sw == 1) {
                for (int oj = o_lo; oj <= o_hi; ++oj) a[oj] += wv * xrow[oj + shift];
              } else {
                for (int oj = o_lo; oj <= o_hi; ++oj) a[oj] += wv * xrow[oj * cs.sw + shift];
              }
            }
          }
        }
        std::copy(acc.begin(), acc.end(), yp + static_cast<std::size_t>(oi) * ow);
      }
    }
  });
  return y;
}

template <typename T>
Tensor4T<T> conv2d_backward_input(const Tensor4T<T>& dy, const ConvSpec& cs,
                                  const std::vector<T>& weight, int in_h, int in_w) {
  if (dy.c != cs.out_ch) throw ConfigError("conv2d backward: dy channel mismatch");
  if (cs.conv_out_h(in_h) != dy.h || cs.conv_out_w(in_w) != dy.w)
    throw ConfigError("conv2d backward: dy dims inconsistent with input dims");
  Tensor4T<T> dx(dy.n, cs.in_ch, in_h, in_w);

  parallel_for(static_cast<std::int64_t>(dy.n) * cs.in_ch, [&](std::int64_t b0, std::int64_t b1) {
    std::vector<T> acc(in_w);
    for (std::int64_t idx = b0; idx < b1; ++idx) {
      const int n = static_cast<int>(idx / cs.in_ch);
      const int ic = static_cast<int>(idx % cs.in_ch);
      T* dxp = dx.plane(n, ic);
      for (int ih = 0; ih < in_h; ++ih) {
        std::fill(acc.begin(), acc.end(), T(0));
        T* __restrict a = acc.data();
        for (int oc = 0; oc < cs.out_ch; ++oc) {
          const T* dyp = dy.plane(n, oc);
          const T* wk =
              weight.data() + ((static_cast<std::size_t>(oc) * cs.in_ch + ic) * cs.kh) * cs.kw;
          for (int ki = 0; ki < cs.kh; ++ki) {
            const int t = ih + cs.ph - ki;
            if (t < 0 || t % cs.sh != 0) continue;
            const int oi = t / cs.sh;
            if (oi >= dy.h) continue;
            const T* __restrict dyrow = dyp + static_cast<std::size_t>(oi) * dy.w;
            for (int kj = 0; kj < cs.kw; ++kj) {
              const T wv = wk[ki * cs.kw + kj];
              const int shift = kj - cs.pw;
              const int o_lo = lo_index(shift, cs.sw);
              const int o_hi = std::min(dy.w - 1, (in_w - 1 - shift) / cs.sw);
              if (cs.sw == 1) {
                for (int oj = o_lo; oj <= o_hi; ++oj) a[oj + shift] += wv * dyrow[oj];
              } else {
                for (int oj = o_lo; oj <= o_hi; ++oj) a[oj * cs.sw + shift] += wv * dyrow[oj];
              }
            }
          }
        }
        std::copy(acc.begin(), acc.end(), dxp + static_cast<std::size_t>(ih) * in_w);
      }
    }
  });
  return dx;
}

template <typename T>
void conv2d_backward_params(const Tensor4T<T>& x, const ConvSpec& cs, const Tensor4T<T>& dy,
                            std::vector<T>* dweight, std::vector<T>* dbias) {
  dweight->assign(cs.weight_count(), T(0));
  dbias->assign(cs.out_ch, T(0));

  parallel_for(cs.out_ch, [&](std::int64_t c0, std::int64_t c1) {
    for (std::int64_t oc = c0; oc < c1; ++oc) {
      T bsum = T(0);
      for (int n = 0; n < dy.n; ++n) {
        const T* dyp = dy.plane(n, static_cast<int>(oc));
        for (std::size_t i = 0; i < static_cast<std::size_t>(dy.h) * dy.w; ++i) bsum += dyp[i];
        for (int ic = 0; ic < cs.in_ch; ++ic) {
          const T* xp = x.plane(n, ic);
          T* dwk = dweight->data() + ((static_cast<std::size_t>(oc) * cs.in_ch + ic) * cs.kh) * cs.kw;
          for (int ki = 0; ki < cs.kh; ++ki) {
            for (int kj = 0; kj < cs.kw; ++kj) {
              const int shift = kj - cs.pw;
              const int o_lo = lo_index(shift, cs.sw);
              const int o_hi = std::min(dy.w - 1, (x.w - 1 - shift) / cs.sw);
              T acc = T(0);
              for (int oi = 0; oi < dy.h; ++oi) {
                const int ih = oi * cs.sh - cs.ph + ki;
                if (ih < 0 || ih >= x.h) continue;
                const T* xrow = xp + static_cast<std::size_t>(ih) * x.w;
                const T* dyrow = dyp + static_cast<std::size_t>(oi) * dy.w;
                if (cs.sw == 1) {
                  acc += dot_lanes(dyrow + o_lo, xrow + o_lo + shift, o_hi - o_lo + 1);
                } else {
                  for (int oj = o_lo; oj <= o_hi; ++oj) acc += dyrow[oj] * xrow[oj * cs.sw + shift];
                }
              }
              dwk[ki * cs.kw + kj] += acc;
            }
          }
        }
      }
      (*dbias)[oc] = bsum;
    }
  });
}

template <typename T>
Tensor4T<T> tconv2d_forward(const Tensor4T<T>& x, const ConvSpec& cs,
                            const std::vector<T>& weight, const std::vector<T>& bias) {
  check_conv_args("tconv2d", x.c, cs, weight.size(), bias.size(), cs.in_ch);
  const int oh = cs.tconv_out_h(x.h), ow = cs.tconv_out_w(x.w);
  if (oh < 1 || ow < 1)
    throw ConfigError("tconv2d: output would be empty for input " + x.shape_str());
  Tensor4T<T> y(x.n, cs.out_ch, oh, ow);

  parallel_for(static_cast<std::int64_t>(x.n) * cs.out_ch, [&](std::int64_t b0, std::int64_t b1) {
    std::vector<T> acc(ow);
    for (std::int64_t idx = b0; idx < b1; ++idx) {
      const int n = static_cast<int>(idx / cs.out_ch);
      const int oc = static_cast<int>(idx % cs.out_ch);
      T* yp = y.plane(n, oc);
      for (int oi = 0; oi < oh; ++oi) {
        std::fill(acc.begin(), acc.end(), bias[oc]);
        T* __restrict a = acc.data();
        for (int ic = 0; ic < cs.in_ch; ++ic) {
          const T* xp = x.plane(n, ic);
          const T* wk =
              weight.data() + ((static_cast<std::size_t>(ic) * cs.out_ch + oc) * cs.kh) * cs.kw;
          for (int ki = 0; ki < cs.kh; ++ki) {
            const int t = oi + cs.ph - ki;  // oi = ih * sh - ph + ki
            if (t < 0 || t % cs.sh != 0) continue;
            const int ih = t / cs.sh;
            if (ih >= x.h) continue;
            const T* __restrict xrow = xp + static_cast<std::size_t>(ih) * x.w;
            for (int kj = 0; kj < cs.kw; ++kj) {
              const T wv = wk[ki * cs.kw + kj];
              const int shift = kj - cs.pw;  // out col = in col * sw + shift
              const int i_lo = lo_index(shift, cs.sw);
              const int i_hi = std::min(x.w - 1, (ow - 1 - shift) / cs.sw);
              if (cs.sw == 1) {
                for (int ij = i_lo; ij <= i_hi; ++ij) a[ij + shift] += wv * xrow[ij];
              } else {
                for (int ij = i_lo; ij <= i_hi; ++ij) a[ij * cs.sw + shift] += wv * xrow[ij];
              }
            }
          }
        }
        std::copy(acc.begin(), acc.end(), yp + static_cast<std::size_t>(oi) * ow);
      }
    }
  });
  return y;
}

template <typename T>
Tensor4T<T> tconv2d_backward_input(const Tensor4T<T>& dy, const ConvSpec& cs,
                                   const std::vector<T>& weight) {
  // The gradient w.r.t. the input of a transposed conv is a plain strided
  // cross-correlation of dy with the same kernel.
  if (dy.c != cs.out_ch) throw ConfigError("tconv2d backward: dy channel mismatch");
  const int in_h = (dy.h + 2 * cs.ph - cs.kh) / cs.sh + 1;
  const int in_w = (dy.w + 2 * cs.pw - cs.kw) / cs.sw + 1;
  Tensor4T<T> dx(dy.n, cs.in_ch, in_h, in_w);

  parallel_for(static_cast<std::int64_t>(dy.n) * cs.in_ch, [&](std::int64_t b0, std::int64_t b1) {
    std::vector<T> acc(in_w);
    for (std::int64_t idx = b0; idx < b1; ++idx) {
      const int n = static_cast<int>(idx / cs.in_ch);
      const int ic = static_cast<int>(idx % cs.in_ch);
      T* dxp = dx.plane(n, ic);
      for (int ih = 0; ih < in_h; ++ih) {
        std::fill(acc.begin(), acc.end(), T(0));
        T* __restrict a = acc.data();
        for (int oc = 0; oc < cs.out_ch; ++oc) {
          const T* dyp = dy.plane(n, oc);
          const T* wk =
              weight.data() + ((static_cast<std::size_t>(ic) * cs.out_ch + oc) * cs.kh) * cs.kw;
          for (int ki = 0; ki < cs.kh; ++ki) {
            const int oi = ih * cs.sh - cs.ph + ki;
            if (oi < 0 || oi >= dy.h) continue;
            const T* __restrict dyrow = dyp + static_cast<std::size_t>(oi) * dy.w;
            for (int kj = 0; kj < cs.kw; ++kj) {
              const T wv = wk[ki * cs.kw + kj];
              const int shift = kj - cs.pw;
              const int i_lo = lo_index(shift, cs.sw);
              const int i_hi = std::min(in_w - 1, (dy.w - 1 - shift) / cs.sw);
              if (cs.sw == 1) {
                for (int ij = i_lo; ij <= i_hi; ++ij) a[ij] += wv * dyrow[ij + shift];
              } else {
                for (int ij = i_lo; ij <= i_hi; ++ij) a[ij] += wv * dyrow[ij * cs.sw + shift];
              }
            }
          }
        }
        std::copy(acc.begin(), acc.end(), dxp + static_cast<std::size_t>(ih) * in_w);
      }
    }
  });
  return dx;
}

template <typename T>
void tconv2d_backward_params(const Tensor4T<T>& x, const ConvSpec& cs, const Tensor4T<T>& dy,
                             std::vector<T>* dweight, std::vector<T>* dbias) {
  dweight->assign(cs.weight_count(), T(0));
  dbias->assign(cs.out_ch, T(0));

  for (int n = 0; n < dy.n; ++n)
    for (int oc = 0; oc < cs.out_ch; ++oc) {
      const T* dyp = dy.plane(n, oc);
      T acc = T(0);
      for (std::size_t i = 0; i < static_cast<std::size_t>(dy.h) * dy.w; ++i) acc += dyp[i];
      (*dbias)[oc] += acc;
    }

  parallel_for(cs.in_ch, [&](std::int64_t c0, std::int64_t c1) {
    for (std::int64_t ic = c0; ic < c1; ++ic) {
      for (int oc = 0; oc < cs.out_ch; ++oc) {
        T* dwk = dweight->data() + ((static_cast<std::size_t>(ic) * cs.out_ch + oc) * cs.kh) * cs.kw;
        for (int n = 0; n < x.n; ++n) {
          const T* xp = x.plane(n, static_cast<int>(ic));
          const T* dyp = dy.plane(n, oc);
          for (int ki = 0; ki < cs.kh; ++ki) {
            for (int kj = 0; kj < cs.kw; ++kj) {
              const int shift = kj - cs.pw;
              const int i_lo = shift >= 0 ? 0 : (-shift + cs.sw - 1) / cs.sw;
              const int i_hi = std::min(x.w - 1, (dy.w - 1 - shift) / cs.sw);
              T acc = T(0);
              for (int ih = 0; ih < x.h; ++ih) {
                const int oi = ih * cs.sh - cs.ph + ki;
                if (oi < 0 || oi >= dy.h) continue;
                const T* xrow = xp + static_cast<std::size_t>(ih) * x.w;
                const T* dyrow = dyp + static_cast<std::size_t>(oi) * dy.w;
                if (cs.sw == 1) {
                  for (int ij = i_lo; ij <= i_hi; ++ij) acc += xrow[ij] * dyrow[ij + shift];
                } else {
                  for (int ij = i_lo; ij <= i_hi; ++ij) acc += xrow[ij] * dyrow[ij * cs.sw + shift];
                }
              }
              dwk[ki * cs.kw + kj] += acc;
            }
          }
        }
      }
    }
  });
}

template <typename T>
Tensor4T<T> batchnorm_forward(const Tensor4T<T>& x, T momentum, T eps, bool training,
                              const std::vector<T>& gamma, const std::vector<T>& beta,
                              std::vector<T>& running_mean, std::vector<T>& running_var,
                              BnCache<T>* cache) {
  if (static_cast<int>(gamma.size()) != x.c || static_cast<int>(beta.size()) != x.c ||
      static_cast<int>(running_mean.size()) != x.c || static_cast<int>(running_var.size()) != x.c)
    throw ConfigError("batchnorm: parameter size mismatch for " + std::to_string(x.c) + " channels");

  Tensor4T<T> y = Tensor4T<T>::zeros_like(x);
  if (cache) {
    cache->xhat = Tensor4T<T>::zeros_like(x);
    cache->inv_std.assign(x.c, T(0));
    cache->training = training;
  }
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  const T m = static_cast<T>(static_cast<double>(x.n) * plane);

  parallel_for(x.c, [&](std::int64_t c0, std::int64_t c1) {
    for (std::int64_t c = c0; c < c1; ++c) {
      T mean, var;
      if (training) {
        T sum = T(0);
        for (int n = 0; n < x.n; ++n) {
          const T* xp = x.plane(n, static_cast<int>(c));
          for (std::size_t i = 0; i < plane; ++i) sum += xp[i];
        }
        mean = sum / m;
        T sq = T(0);
        for (int n = 0; n < x.n; ++n) {
          const T* xp = x.plane(n, static_cast<int>(c));
          for (std::size_t i = 0; i < plane; ++i) {
            const T d = xp[i] - mean;
            sq += d * d;
          }
        }
        var = sq / m;
        running_mean[c] = momentum * running_mean[c] + (T(1) - momentum) * mean;
        running_var[c] = momentum * running_var[c] + (T(1) - momentum) * var;
      } else {
        mean = running_mean[c];
        var = running_var[c];
      }
      const T inv_std = T(1) / std::sqrt(var + eps);
      if (cache) cache->inv_std[c] = inv_std;
      const T g = gamma[c], b = beta[c];
      for (int n = 0; n < x.n; ++n) {
        const T* xp = x.plane(n, static_cast<int>(c));
        T* yp = y.plane(n, static_cast<int>(c));
        T* hp = cache ? cache->xhat.plane(n, static_cast<int>(c)) : nullptr;
        for (std::size_t i = 0; i < plane; ++i) {
          const T xh = (xp[i] - mean) * inv_std;
          if (hp) hp[i] = xh;
          yp[i] = g * xh + b;
        }
      }
    }
  });
  return y;
}

template <typename T>
void batchnorm_backward(const BnCache<T>& cache, const std::vector<T>& gamma,
                        const Tensor4T<T>& dy, Tensor4T<T>* dx, std::vector<T>* dgamma,
                        std::vector<T>* dbeta) {
  const Tensor4T<T>& xhat = cache.xhat;
  if (!dy.same_shape(xhat)) throw ConfigError("batchnorm backward: shape mismatch");
  *dx = Tensor4T<T>::zeros_like(dy);
  dgamma->assign(dy.c, T(0));
  dbeta->assign(dy.c, T(0));
  const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
  const T m = static_cast<T>(static_cast<double>(dy.n) * plane);

  parallel_for(dy.c, [&](std::int64_t c0, std::int64_t c1) {
    for (std::int64_t c = c0; c < c1; ++c) {
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (int n = 0; n < dy.n; ++n) {
        const T* dyp = dy.plane(n, static_cast<int>(c));
        const T* hp = xhat.plane(n, static_cast<int>(c));
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += dyp[i];
          sum_dy_xhat += dyp[i] * hp[i];
        }
      }
      (*dbeta)[c] = sum_dy;
      (*dgamma)[c] = sum_dy_xhat;
      const T scale = gamma[c] * cache.inv_std[c];
      for (int n = 0; n < dy.n; ++n) {
        const T* dyp = dy.plane(n, static_cast<int>(c));
        const T* hp = xhat.plane(n, static_cast<int>(c));
        T* dxp = dx->plane(n, static_cast<int>(c));
        if (cache.training) {
          for (std::size_t i = 0; i < plane; ++i)
            dxp[i] = scale * (dyp[i] - sum_dy / m - hp[i] * sum_dy_xhat / m);
        } else {
          for (std::size_t i = 0; i < plane; ++i) dxp[i] = scale * dyp[i];
        }
      }
    }
  });
}

template <typename T>
Tensor4T<T> relu_forward(const Tensor4T<T>& x) {
  Tensor4T<T> y = x;
  for (T& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor4T<T> relu_backward(const Tensor4T<T>& y, const Tensor4T<T>& dy) {
  if (!y.same_shape(dy)) throw ConfigError("relu backward: shape mismatch");
  Tensor4T<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(y.data[i] > T(0))) dx.data[i] = T(0);
  return dx;
}

template <typename T>
Tensor4T<T> avgpool_forward(const Tensor4T<T>& x, int k) {
  if (k < 1 || x.h % k != 0 || x.w % k != 0)
    throw ConfigError("avgpool: dims " + x.shape_str() + " not divisible by " + std::to_string(k));
  Tensor4T<T> y(x.n, x.c, x.h / k, x.w / k);
  const T inv = T(1) / static_cast<T>(k * k);
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < x.c; ++c) {
      const T* xp = x.plane(n, c);
      T* yp = y.plane(n, c);
      for (int oi = 0; oi < y.h; ++oi)
        for (int oj = 0; oj < y.w; ++oj) {
          T acc = T(0);
          for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) acc += xp[(oi * k + a) * x.w + (oj * k + b)];
          yp[oi * y.w + oj] = acc * inv;
        }
    }
  return y;
}

template <typename T>
Tensor4T<T> avgpool_backward(const Tensor4T<T>& dy, int k) {
  Tensor4T<T> dx(dy.n, dy.c, dy.h * k, dy.w * k);
  const T inv = T(1) / static_cast<T>(k * k);
  for (int n = 0; n < dy.n; ++n)
    for (int c = 0; c < dy.c; ++c) {
      const T* dyp = dy.plane(n, c);
      T* dxp = dx.plane(n, c);
      for (int oi = 0; oi < dy.h; ++oi)
        for (int oj = 0; oj < dy.w; ++oj) {
          const T g = dyp[oi * dy.w + oj] * inv;
          for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) dxp[(oi * k + a) * dx.w + (oj * k + b)] = g;
        }
    }
  return dx;
}

template <typename T>
Tensor4T<T> dropout_forward(const Tensor4T<T>& x, double rate, bool active, Rng& rng,
                            Tensor4T<T>* mask) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  if (!active) {
    if (mask) *mask = Tensor4T<T>();
    return x;
  }
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor4T<T> y = Tensor4T<T>::zeros_like(x);
  Tensor4T<T> local = Tensor4T<T>::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T m = rng.uniform() >= rate ? scale : T(0);
    local.data[i] = m;
    y.data[i] = x.data[i] * m;
  }
  if (mask) *mask = std::move(local);
  return y;
}

template <typename T>
Tensor4T<T> dropout_backward(const Tensor4T<T>& dy, const Tensor4T<T>& mask) {
  if (mask.size() == 0) return dy;  // was inactive
  if (!dy.same_shape(mask)) throw ConfigError("dropout backward: shape mismatch");
  Tensor4T<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= mask.data[i];
  return dx;
}

template <typename T>
Tensor4T<T> concat_forward(const Tensor4T<T>& a, const Tensor4T<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw ConfigError("concat: spatial dims differ (" + a.shape_str() + " vs " + b.shape_str() + ")");
  Tensor4T<T> y(a.n, a.c + b.c, a.h, a.w);
  const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
  for (int n = 0; n < a.n; ++n) {
    for (int c = 0; c < a.c; ++c)
      std::copy(a.plane(n, c), a.plane(n, c) + plane, y.plane(n, c));
    for (int c = 0; c < b.c; ++c)
      std::copy(b.plane(n, c), b.plane(n, c) + plane, y.plane(n, a.c + c));
  }
  return y;
}

template <typename T>
void concat_backward(const Tensor4T<T>& dy, int a_channels, Tensor4T<T>* da, Tensor4T<T>* db) {
  const int b_channels = dy.c - a_channels;
  if (a_channels < 1 || b_channels < 1) throw ConfigError("concat backward: bad channel split");
  *da = Tensor4T<T>(dy.n, a_channels, dy.h, dy.w);
  *db = Tensor4T<T>(dy.n, b_channels, dy.h, dy.w);
  const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
  for (int n = 0; n < dy.n; ++n) {
    for (int c = 0; c < a_channels; ++c)
      std::copy(dy.plane(n, c), dy.plane(n, c) + plane, da->plane(n, c));
    for (int c = 0; c < b_channels; ++c)
      std::copy(dy.plane(n, a_channels + c), dy.plane(n, a_channels + c) + plane, db->plane(n, c));
  }
}

template <typename T>
T l1_loss(const Tensor4T<T>& pred, const Tensor4T<T>& target, Tensor4T<T>* grad) {
  if (!pred.same_shape(target))
    throw ConfigError("l1_loss: shape mismatch (" + pred.shape_str() + " vs " + target.shape_str() + ")");
  const T inv_n = T(1) / static_cast<T>(static_cast<double>(pred.size()));
  T acc = T(0);
  if (grad) *grad = Tensor4T<T>::zeros_like(pred);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred.data[i] - target.data[i];
    acc += d >= T(0) ? d : -d;
    if (grad) grad->data[i] = d > T(0) ? inv_n : (d < T(0) ? -inv_n : T(0));
  }
  return acc * inv_n;
}

#define LSR_INSTANTIATE(T)                                                                        \
  template Tensor4T<T> conv2d_forward<T>(const Tensor4T<T>&, const ConvSpec&,                     \
                                         const std::vector<T>&, const std::vector<T>&);          \
  template Tensor4T<T> conv2d_backward_input<T>(const Tensor4T<T>&, const ConvSpec&,             \
                                                const std::vector<T>&, int, int);                \
  template void conv2d_backward_params<T>(const Tensor4T<T>&, const ConvSpec&,                   \
                                          const Tensor4T<T>&, std::vector<T>*, std::vector<T>*); \
  template Tensor4T<T> tconv2d_forward<T>(const Tensor4T<T>&, const ConvSpec&,                   \
                                          const std::vector<T>&, const std::vector<T>&);         \
  template Tensor4T<T> tconv2d_backward_input<T>(const Tensor4T<T>&, const ConvSpec&,            \
                                                 const std::vector<T>&);                         \
  template void tconv2d_backward_params<T>(const Tensor4T<T>&, const ConvSpec&,                  \
                                           const Tensor4T<T>&, std::vector<T>*,                  \
                                           std::vector<T>*);                                     \
  template Tensor4T<T> batchnorm_forward<T>(const Tensor4T<T>&, T, T, bool,                      \
                                            const std::vector<T>&, const std::vector<T>&,        \
                                            std::vector<T>&, std::vector<T>&, BnCache<T>*);      \
  template void batchnorm_backward<T>(const BnCache<T>&, const std::vector<T>&,                  \
                                      const Tensor4T<T>&, Tensor4T<T>*, std::vector<T>*,         \
                                      std::vector<T>*);                                          \
  template Tensor4T<T> relu_forward<T>(const Tensor4T<T>&);                                      \
  template Tensor4T<T> relu_backward<T>(const Tensor4T<T>&, const Tensor4T<T>&);                 \
  template Tensor4T<T> avgpool_forward<T>(const Tensor4T<T>&, int);                              \
  template Tensor4T<T> avgpool_backward<T>(const Tensor4T<T>&, int);                             \
  template Tensor4T<T> dropout_forward<T>(const Tensor4T<T>&, double, bool, Rng&, Tensor4T<T>*); \
  template Tensor4T<T> dropout_backward<T>(const Tensor4T<T>&, const Tensor4T<T>&);              \
  template Tensor4T<T> concat_forward<T>(const Tensor4T<T>&, const Tensor4T<T>&);                \
  template void concat_backward<T>(const Tensor4T<T>&, int, Tensor4T<T>*, Tensor4T<T>*);         \
  template T l1_loss<T>(const Tensor4T<T>&, const Tensor4T<T>&, Tensor4T<T>*);

LSR_INSTANTIATE(float)
LSR_INSTANTIATE(double)

#undef LSR_INSTANTIATE

}  // namespace lsr::nn
