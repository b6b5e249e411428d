#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "lsr/geometry.hpp"
#include "lsr/nn/network.hpp"

namespace lsr {

struct McConfig {
  int passes = 50;       // T
  double lambda = 0.03;  // keep a pixel when std < lambda * mean
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-pixel ensemble outputs of MC-dropout inference. `final` keeps mean
// where the ensemble agrees and zeroes the rest.
struct McResult {
  NormalizedImage mean;
  NormalizedImage std;
  NormalizedImage final;
  double removed_fraction = 0.0;  // percent of positive-mean pixels zeroed
};

struct EnsembleStats {
  double mean = 0.0;
  double stddev = 0.0;  // population std, sqrt(sum((y_i - mean)^2) / T)
};

EnsembleStats ensemble_stats(const float* values, int count);

// Catmull-Rom value between p1 and p2 at parameter t in [0, 1].
double catmull_rom(double p0, double p1, double p2, double p3, double t);

// Per-column interpolation along rows. Input row k anchors output row
// k*factor; rows below the last anchor replicate it; any span touching an
// invalid (0) anchor outputs 0 for its interpolated rows.
NormalizedImage upscale_linear(const NormalizedImage& low, std::uint32_t factor);
NormalizedImage upscale_cubic(const NormalizedImage& low, std::uint32_t factor);

// Single deterministic forward pass (dropout off, running batch stats).
NormalizedImage nn_upscale(const nn::NetworkSpec& spec, const nn::NetworkParams& params,
                           const NormalizedImage& low);

// T forward passes with active dropout; per-pass RNG streams derive from
// (seed, pass index) so results are schedule-independent.
McResult mc_infer(const NormalizedImage& low, const nn::NetworkSpec& spec,
                  const nn::NetworkParams& params, const McConfig& cfg);

struct UpscaleOutput {
  NormalizedImage image;
  std::optional<McResult> mc;
};

class Upscaler {
 public:
  virtual ~Upscaler() = default;
  virtual std::string name() const = 0;
  virtual std::uint32_t factor() const = 0;
  virtual UpscaleOutput run(const NormalizedImage& low) const = 0;
};

class LinearUpscaler : public Upscaler {
 public:
  explicit LinearUpscaler(std::uint32_t factor) : factor_(factor) {}
  std::string name() const override { return "linear"; }
  std::uint32_t factor() const override { return factor_; }
  UpscaleOutput run(const NormalizedImage& low) const override {
    return {upscale_linear(low, factor_), std::nullopt};
  }

 private:
  std::uint32_t factor_;
};

class CubicUpscaler : public Upscaler {
 public:
  explicit CubicUpscaler(std::uint32_t factor) : factor_(factor) {}
  std::string name() const override { return "cubic"; }
  std::uint32_t factor() const override { return factor_; }
  UpscaleOutput run(const NormalizedImage& low) const override {
    return {upscale_cubic(low, factor_), std::nullopt};
  }

 private:
  std::uint32_t factor_;
};

// mc == nullopt: plain single-pass inference. Otherwise MC-dropout with the
// filtered image as the primary output.
class NeuralUpscaler : public Upscaler {
 public:
  NeuralUpscaler(nn::NetworkSpec spec, nn::NetworkParams params, std::optional<McConfig> mc)
      : spec_(std::move(spec)), params_(std::move(params)), mc_(mc) {}
  std::string name() const override { return mc_ ? "nn-mc" : "nn"; }
  std::uint32_t factor() const override { return static_cast<std::uint32_t>(spec_.upscale_factor); }
  UpscaleOutput run(const NormalizedImage& low) const override;

 private:
  nn::NetworkSpec spec_;
  nn::NetworkParams params_;
  std::optional<McConfig> mc_;
};

// normalize -> upscale -> denormalize (clamped to [0, max_range]) ->
// unproject. Forwards the McResult when the upscaler produces one.
PointCloud upscale_pipeline(const RangeImage& low, const Upscaler& upscaler,
                            McResult* mc_out = nullptr);

}  // namespace lsr
