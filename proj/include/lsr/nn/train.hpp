#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "lsr/nn/network.hpp"

namespace lsr::nn {

struct TrainConfig {
  int epochs = 50;
  int batch = 4;
  float lr = 1e-4f;
  float decay = 1e-5f;  // inverse-time: lr_e = lr / (1 + decay * e)
  std::uint64_t seed = 1;
  int start_epoch = 0;  // nonzero when resuming
  std::function<void(int epoch, double lr, double l1)> on_epoch;
};

struct LossPoint {
  int epoch = 0;
  double lr = 0.0;
  double train_l1 = 0.0;
};

// Samples are (input, target) tensors with n == 1. Updates params/adam in
// place; one curve point per epoch. Throws NumericError if the loss goes
// non-finite.
std::vector<LossPoint> train(const NetworkSpec& spec, NetworkParams& params, AdamState& adam,
                             const std::vector<std::pair<Tensor4, Tensor4>>& samples,
                             const TrainConfig& cfg);

double effective_lr(float lr, float decay, int epoch);

}  // namespace lsr::nn
