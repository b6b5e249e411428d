#include "lsr/upscale.hpp"

#include <algorithm>
#include <cmath>

#include "lsr/error.hpp"

namespace lsr {

void McConfig::validate() const {
  if (passes < 1) throw ConfigError("mc: inference count T must be >= 1");
  if (!(lambda > 0.0)) throw ConfigError("mc: lambda must be > 0");
}

EnsembleStats ensemble_stats(const float* values, int count) {
  if (count < 1) throw ConfigError("ensemble_stats: need at least one value");
  float lo = values[0], hi = values[0];
  double sum = 0.0;
  for (int i = 0; i < count; ++i) {
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
    sum += values[i];
  }
  if (lo == hi) return {static_cast<double>(lo), 0.0};  // exact for degenerate ensembles
  const double mean = sum / count;
  double sq = 0.0;
  for (int i = 0; i < count; ++i) {
    const double d = values[i] - mean;
    sq += d * d;
  }
  return {mean, std::sqrt(sq / count)};
}

double catmull_rom(double p0, double p1, double p2, double p3, double t) {
  return 0.5 * (2.0 * p1 + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
}

namespace {

void check_upscale_factor(std::uint32_t factor) {
  if (factor != 2 && factor != 4 && factor != 8)
    throw ConfigError("upscale: factor must be 2, 4 or 8");
}

NormalizedImage make_output(const NormalizedImage& low, std::uint32_t factor) {
  NormalizedImage out;
  out.intrinsics = expand_intrinsics(low.intrinsics, factor);
  out.data.assign(static_cast<std::size_t>(out.intrinsics.channels) * out.intrinsics.h_res, 0.0f);
  return out;
}

}  // namespace

NormalizedImage upscale_linear(const NormalizedImage& low, std::uint32_t factor) {
  check_upscale_factor(factor);
  NormalizedImage out = make_output(low, factor);
  const std::uint32_t in_rows = low.rows(), cols = low.cols(), out_rows = out.rows();

  for (std::uint32_t c = 0; c < cols; ++c) {
    for (std::uint32_t k = 0; k < in_rows; ++k) out.at(k * factor, c) = low.at(k, c);
    for (std::uint32_t k = 0; k + 1 < in_rows; ++k) {
      const float a = low.at(k, c), b = low.at(k + 1, c);
      if (a == 0.0f || b == 0.0f) continue;  // span rows stay 0
      for (std::uint32_t j = 1; j < factor; ++j)
        out.at(k * factor + j, c) =
            static_cast<float>(a + (static_cast<double>(b) - a) * j / factor);
    }
    const float last = low.at(in_rows - 1, c);
    for (std::uint32_t r = (in_rows - 1) * factor + 1; r < out_rows; ++r) out.at(r, c) = last;
  }
  return out;
}

NormalizedImage upscale_cubic(const NormalizedImage& low, std::uint32_t factor) {
  check_upscale_factor(factor);
  NormalizedImage out = make_output(low, factor);
  const std::uint32_t in_rows = low.rows(), cols = low.cols(), out_rows = out.rows();

  for (std::uint32_t c = 0; c < cols; ++c) {
    for (std::uint32_t k = 0; k < in_rows; ++k) out.at(k * factor, c) = low.at(k, c);
    for (std::uint32_t k = 0; k + 1 < in_rows; ++k) {
      // Edge anchors replicated; a span with any invalid control stays 0.
      const float p0 = low.at(k == 0 ? 0 : k - 1, c);
      const float p1 = low.at(k, c);
      const float p2 = low.at(k + 1, c);
      const float p3 = low.at(std::min(k + 2, in_rows - 1), c);
      if (p0 == 0.0f || p1 == 0.0f || p2 == 0.0f || p3 == 0.0f) continue;
      for (std::uint32_t j = 1; j < factor; ++j)
        out.at(k * factor + j, c) = static_cast<float>(
            catmull_rom(p0, p1, p2, p3, static_cast<double>(j) / factor));
    }
    const float last = low.at(in_rows - 1, c);
    for (std::uint32_t r = (in_rows - 1) * factor + 1; r < out_rows; ++r) out.at(r, c) = last;
  }
  return out;
}

namespace {

nn::Tensor4 to_tensor(const NormalizedImage& img) {
  nn::Tensor4 t(1, 1, static_cast<int>(img.rows()), static_cast<int>(img.cols()));
  std::copy(img.data.begin(), img.data.end(), t.data.begin());
  return t;
}

NormalizedImage from_tensor(const nn::Tensor4& t, const SensorIntrinsics& intr) {
  if (t.n != 1 || t.c != 1 || t.h != static_cast<int>(intr.channels) ||
      t.w != static_cast<int>(intr.h_res))
    throw ConfigError("network output shape " + t.shape_str() + " does not match intrinsics");
  NormalizedImage img;
  img.intrinsics = intr;
  img.data.assign(t.data.begin(), t.data.end());
  return img;
}

void check_model_input(const nn::NetworkSpec& spec, const NormalizedImage& low) {
  const std::uint32_t f = static_cast<std::uint32_t>(spec.upscale_factor);
  const std::uint32_t oh = low.rows() * f;
  if (oh % 8 != 0 || low.cols() % 8 != 0)
    throw ConfigError("model input: upscaled rows and cols must be divisible by 8, got " +
                      std::to_string(oh) + "x" + std::to_string(low.cols()));
  spec.check_shapes(static_cast<int>(low.rows()), static_cast<int>(low.cols()));
}

}  // namespace

NormalizedImage nn_upscale(const nn::NetworkSpec& spec, const nn::NetworkParams& params,
                           const NormalizedImage& low) {
  check_model_input(spec, low);
  const nn::Tensor4 y = nn::forward_eval(spec, params, to_tensor(low));
  return from_tensor(y, expand_intrinsics(low.intrinsics, spec.upscale_factor));
}

McResult mc_infer(const NormalizedImage& low, const nn::NetworkSpec& spec,
                  const nn::NetworkParams& params, const McConfig& cfg) {
  cfg.validate();
  check_model_input(spec, low);
  const SensorIntrinsics hi = expand_intrinsics(low.intrinsics, spec.upscale_factor);
  const nn::Tensor4 x = to_tensor(low);

  std::vector<nn::Tensor4> passes;
  passes.reserve(cfg.passes);
  for (int t = 0; t < cfg.passes; ++t) {
    Rng rng = Rng::keyed(cfg.seed, {0x3C1ull, static_cast<std::uint64_t>(t)});
    passes.push_back(nn::forward_mc(spec, params, x, rng));
  }

  McResult res;
  res.mean = NormalizedImage::zeros(hi);
  res.std = NormalizedImage::zeros(hi);
  res.final = NormalizedImage::zeros(hi);

  const std::size_t px = res.mean.data.size();
  std::vector<float> column(cfg.passes);
  std::size_t positive = 0, removed = 0;
  for (std::size_t i = 0; i < px; ++i) {
    for (int t = 0; t < cfg.passes; ++t) column[t] = passes[t].data[i];
    const EnsembleStats st = ensemble_stats(column.data(), cfg.passes);
    const float mean_f = static_cast<float>(st.mean);
    res.mean.data[i] = mean_f;
    res.std.data[i] = static_cast<float>(st.stddev);
    const bool keep = st.stddev < cfg.lambda * st.mean;
    res.final.data[i] = keep ? mean_f : 0.0f;
    if (mean_f > 0.0f) {
      ++positive;
      if (!keep) ++removed;
    }
  }
  res.removed_fraction =
      positive == 0 ? 0.0 : 100.0 * static_cast<double>(removed) / static_cast<double>(positive);
  return res;
}

UpscaleOutput NeuralUpscaler::run(const NormalizedImage& low) const {
  if (!mc_) return {nn_upscale(spec_, params_, low), std::nullopt};
  McResult mc = mc_infer(low, spec_, params_, *mc_);
  NormalizedImage primary = mc.final;
  return {std::move(primary), std::move(mc)};
}

PointCloud upscale_pipeline(const RangeImage& low, const Upscaler& upscaler, McResult* mc_out) {
  UpscaleOutput out = upscaler.run(normalize(low));
  if (mc_out && out.mc) *mc_out = *out.mc;

  RangeImage ranges;
  ranges.intrinsics = out.image.intrinsics;
  ranges.data.resize(out.image.data.size());
  const double max_r = out.image.intrinsics.max_range_m;
  for (std::size_t i = 0; i < out.image.data.size(); ++i) {
    const double n = std::clamp(static_cast<double>(out.image.data[i]), 0.0, 1.0);
    ranges.data[i] = static_cast<float>(n * max_r);
  }
  return unproject(ranges);
}

}  // namespace lsr
