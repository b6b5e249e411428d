#pragma once

#include <vector>

#include "lsr/nn/tensor.hpp"
#include "lsr/rng.hpp"

namespace lsr::nn {

// Geometry shared by conv and transposed conv.
struct ConvSpec {
  int in_ch = 0, out_ch = 0;
  int kh = 1, kw = 1;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;

  std::size_t weight_count() const {
    return static_cast<std::size_t>(in_ch) * out_ch * kh * kw;
  }
  // conv: floor((in + 2p - k) / s) + 1, must chain exactly
  int conv_out_h(int h) const { return (h + 2 * ph - kh) / sh + 1; }
  int conv_out_w(int w) const { return (w + 2 * pw - kw) / sw + 1; }
  // transposed conv: (in - 1) * s - 2p + k
  int tconv_out_h(int h) const { return (h - 1) * sh - 2 * ph + kh; }
  int tconv_out_w(int w) const { return (w - 1) * sw - 2 * pw + kw; }
};

// Cross-correlation, weights laid out [out_ch][in_ch][kh][kw].
template <typename T>
Tensor4T<T> conv2d_forward(const Tensor4T<T>& x, const ConvSpec& cs,
                           const std::vector<T>& weight, const std::vector<T>& bias);

template <typename T>
Tensor4T<T> conv2d_backward_input(const Tensor4T<T>& dy, const ConvSpec& cs,
                                  const std::vector<T>& weight, int in_h, int in_w);

template <typename T>
void conv2d_backward_params(const Tensor4T<T>& x, const ConvSpec& cs, const Tensor4T<T>& dy,
                            std::vector<T>* dweight, std::vector<T>* dbias);

// Transposed conv, weights laid out [in_ch][out_ch][kh][kw] so that its
// forward pass is exactly conv2d_backward_input with the roles swapped.
template <typename T>
Tensor4T<T> tconv2d_forward(const Tensor4T<T>& x, const ConvSpec& cs,
                            const std::vector<T>& weight, const std::vector<T>& bias);

template <typename T>
Tensor4T<T> tconv2d_backward_input(const Tensor4T<T>& dy, const ConvSpec& cs,
                                   const std::vector<T>& weight);

template <typename T>
void tconv2d_backward_params(const Tensor4T<T>& x, const ConvSpec& cs, const Tensor4T<T>& dy,
                             std::vector<T>* dweight, std::vector<T>* dbias);

template <typename T>
struct BnCache {
  Tensor4T<T> xhat;
  std::vector<T> inv_std;  // per channel
  bool training = false;
};

// Train mode uses batch statistics and folds them into the running stats
// (running = momentum * running + (1 - momentum) * batch); eval mode uses
// the running statistics.
template <typename T>
Tensor4T<T> batchnorm_forward(const Tensor4T<T>& x, T momentum, T eps, bool training,
                              const std::vector<T>& gamma, const std::vector<T>& beta,
                              std::vector<T>& running_mean, std::vector<T>& running_var,
                              BnCache<T>* cache);

template <typename T>
void batchnorm_backward(const BnCache<T>& cache, const std::vector<T>& gamma,
                        const Tensor4T<T>& dy, Tensor4T<T>* dx, std::vector<T>* dgamma,
                        std::vector<T>* dbeta);

template <typename T>
Tensor4T<T> relu_forward(const Tensor4T<T>& x);

template <typename T>
Tensor4T<T> relu_backward(const Tensor4T<T>& y, const Tensor4T<T>& dy);

template <typename T>
Tensor4T<T> avgpool_forward(const Tensor4T<T>& x, int k);

template <typename T>
Tensor4T<T> avgpool_backward(const Tensor4T<T>& dy, int k);

// Inverted dropout; kept units scale by 1/(1-rate). With active=false the
// input passes through bit-exactly and the mask is left empty.
template <typename T>
Tensor4T<T> dropout_forward(const Tensor4T<T>& x, double rate, bool active, Rng& rng,
                            Tensor4T<T>* mask);

template <typename T>
Tensor4T<T> dropout_backward(const Tensor4T<T>& dy, const Tensor4T<T>& mask);

// Channel concatenation [a; b].
template <typename T>
Tensor4T<T> concat_forward(const Tensor4T<T>& a, const Tensor4T<T>& b);

template <typename T>
void concat_backward(const Tensor4T<T>& dy, int a_channels, Tensor4T<T>* da, Tensor4T<T>* db);

// Mean absolute error over all elements; gradient sign(pred - target) / N.
template <typename T>
T l1_loss(const Tensor4T<T>& pred, const Tensor4T<T>& target, Tensor4T<T>* grad);

}  // namespace lsr::nn
