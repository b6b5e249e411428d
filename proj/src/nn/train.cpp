#include "lsr/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lsr/error.hpp"

namespace lsr::nn {

double effective_lr(float lr, float decay, int epoch) {
  return static_cast<double>(lr) / (1.0 + static_cast<double>(decay) * epoch);
}

namespace {

Tensor4 stack_batch(const std::vector<std::pair<Tensor4, Tensor4>>& samples,
                    const std::vector<std::size_t>& order, std::size_t begin, std::size_t end,
                    bool target) {
  const Tensor4& first = target ? samples[order[begin]].second : samples[order[begin]].first;
  Tensor4 out(static_cast<int>(end - begin), first.c, first.h, first.w);
  const std::size_t one = first.size();
  for (std::size_t i = begin; i < end; ++i) {
    const Tensor4& s = target ? samples[order[i]].second : samples[order[i]].first;
    if (s.size() != one) throw ConfigError("train: samples have inconsistent shapes");
    std::copy(s.data.begin(), s.data.end(), out.data.begin() + (i - begin) * one);
  }
  return out;
}

}  // namespace

std::vector<LossPoint> train(const NetworkSpec& spec, NetworkParams& params, AdamState& adam,
                             const std::vector<std::pair<Tensor4, Tensor4>>& samples,
                             const TrainConfig& cfg) {
  if (samples.empty()) throw ConfigError("train: empty dataset");
  if (cfg.batch < 1) throw ConfigError("train: batch must be >= 1");

  std::vector<LossPoint> curve;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int e = cfg.start_epoch; e < cfg.start_epoch + cfg.epochs; ++e) {
    const double lr = effective_lr(cfg.lr, cfg.decay, e);

    Rng shuffle = Rng::keyed(cfg.seed, {0x5u, static_cast<std::uint64_t>(e)});
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle.uniform_int(i)]);

    double loss_sum = 0.0;
    std::size_t px_count = 0;
    std::size_t step_in_epoch = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch, ++step_in_epoch) {
      const std::size_t end = std::min(begin + cfg.batch, order.size());
      Tensor4 x = stack_batch(samples, order, begin, end, false);
      Tensor4 t = stack_batch(samples, order, begin, end, true);

      Rng rng = Rng::keyed(cfg.seed, {0xD0ull, static_cast<std::uint64_t>(e), step_in_epoch});
      ForwardCache cache;
      Tensor4 y = forward_train(spec, params, x, rng, &cache);

      Tensor4 grad;
      const float loss = l1_loss(y, t, &grad);
      if (!std::isfinite(loss)) throw NumericError("train: loss became non-finite");
      loss_sum += static_cast<double>(loss) * y.size();
      px_count += y.size();

      NetworkParams grads = backward(spec, params, cache, grad);
      adam_step(params, grads, adam, static_cast<float>(lr));
    }

    LossPoint pt{e, lr, loss_sum / static_cast<double>(px_count)};
    curve.push_back(pt);
    if (cfg.on_epoch) cfg.on_epoch(pt.epoch, pt.lr, pt.train_l1);
  }
  return curve;
}

}  // namespace lsr::nn
