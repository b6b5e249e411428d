#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsr/nn/layers.hpp"
#include "lsr/nn/tensor.hpp"
#include "lsr/rng.hpp"

namespace lsr::nn {

enum class LayerKind { Conv, TransposedConv, BatchNorm, ReLU, AvgPool, Dropout, Concat };

// One node of the (linearized) network graph. Concat appends the cached
// output of the named earlier layer to the running activation.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::string name;
  ConvSpec conv;               // Conv / TransposedConv
  float momentum = 0.9f;       // BatchNorm
  float eps = 1e-5f;
  int channels = 0;            // BatchNorm
  int pool = 2;                // AvgPool
  float rate = 0.0f;           // Dropout
  std::string skip_source;     // Concat
};

struct Shape {
  int c = 0, h = 0, w = 0;
  bool operator==(const Shape&) const = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  int upscale_factor = 4;
  int input_channels = 1;

  // Propagates (c, h, w) through every layer; throws ConfigError naming the
  // offending layer on any mismatch. Returns the per-layer output shapes.
  std::vector<Shape> check_shapes(int in_h, int in_w) const;

  int layer_index(const std::string& name) const;  // -1 if absent

  nlohmann::ordered_json to_json() const;
  static NetworkSpec from_json(const nlohmann::json& j);
};

struct LayerParams {
  std::vector<float> weight, bias;                      // conv / tconv
  std::vector<float> gamma, beta;                       // batchnorm
  std::vector<float> running_mean, running_var;         // batchnorm
};

struct NetworkParams {
  std::vector<LayerParams> layers;
};

// Adam moments congruent with the trainable arrays of NetworkParams.
struct AdamState {
  NetworkParams m, v;
  std::uint64_t step = 0;
};

// Encoder-decoder upscaler: log2(factor) vertical x2 transposed-conv input
// stages, 4 conv levels (f, 2f, 4f, 8f) with avg-pooling and dropout around
// each block, a mirrored decoder with skip concatenations, and a final
// single-filter conv with no batch norm.
NetworkSpec build_srnet(int factor, int base_filters, float dropout_rate);

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);
AdamState init_adam(const NetworkSpec& spec);
std::size_t parameter_count(const NetworkSpec& spec);

struct ForwardCache {
  std::vector<Tensor4> acts;           // acts[0] = input, acts[i+1] = layer i output
  std::vector<BnCache<float>> bn;      // indexed by layer
  std::vector<Tensor4> dropout_mask;   // indexed by layer
};

// Training-mode forward: batch statistics, running-stat update, active
// dropout. `cache` is required for a subsequent backward pass.
Tensor4 forward_train(const NetworkSpec& spec, NetworkParams& params, const Tensor4& x,
                      Rng& rng, ForwardCache* cache);

// Deterministic inference: running statistics, dropout off.
Tensor4 forward_eval(const NetworkSpec& spec, const NetworkParams& params, const Tensor4& x);

// MC-dropout inference: running statistics, dropout active.
Tensor4 forward_mc(const NetworkSpec& spec, const NetworkParams& params, const Tensor4& x,
                   Rng& rng);

// Backpropagates dy through the cached forward pass; returns parameter
// gradients shaped like NetworkParams (running stats left empty).
NetworkParams backward(const NetworkSpec& spec, const NetworkParams& params,
                       const ForwardCache& cache, const Tensor4& dy);

// Bias-corrected Adam (beta1 0.9, beta2 0.999, eps 1e-8).
void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state, float lr);

}  // namespace lsr::nn
