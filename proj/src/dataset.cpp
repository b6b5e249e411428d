#include "lsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lsr/error.hpp"

namespace lsr {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

void flip_rows(RangeImage& img) {
  const std::uint32_t rows = img.rows(), cols = img.cols();
  for (std::uint32_t r = 0; r < rows / 2; ++r)
    std::swap_ranges(img.data.begin() + static_cast<std::size_t>(r) * cols,
                     img.data.begin() + static_cast<std::size_t>(r + 1) * cols,
                     img.data.begin() + static_cast<std::size_t>(rows - 1 - r) * cols);
}

void flip_cols(RangeImage& img) {
  const std::uint32_t cols = img.cols();
  for (std::uint32_t r = 0; r < img.rows(); ++r) {
    auto row = img.data.begin() + static_cast<std::size_t>(r) * cols;
    std::reverse(row, row + cols);
  }
}

void rotate_cols(RangeImage& img, std::uint32_t shift) {
  const std::uint32_t cols = img.cols();
  shift %= cols;
  if (shift == 0) return;
  for (std::uint32_t r = 0; r < img.rows(); ++r) {
    auto row = img.data.begin() + static_cast<std::size_t>(r) * cols;
    std::rotate(row, row + shift, row + cols);
  }
}

void scale_ranges(RangeImage& img, double s) {
  const float max_r = img.intrinsics.max_range_m;
  for (float& v : img.data) {
    if (v == 0.0f) continue;
    v = std::min(static_cast<float>(v * s), max_r);
  }
}

}  // namespace

void AugmentConfig::validate() const {
  if (flip_topdown < 0.0 || flip_topdown > 1.0 || flip_horizontal < 0.0 || flip_horizontal > 1.0)
    throw ConfigError("augment: flip probabilities must be in [0, 1]");
  if (!(scale_lo > 0.0) || scale_hi < scale_lo)
    throw ConfigError("augment: need 0 < scale_lo <= scale_hi");
}

ScanPair augment_pair(const ScanPair& pair, const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  if (pair.low.rows() == 0 || pair.high.rows() % pair.low.rows() != 0)
    throw ConfigError("augment: pair rows are not an integer factor apart");
  const std::uint32_t factor = pair.high.rows() / pair.low.rows();

  ScanPair out;
  out.pose = pair.pose;
  out.high = pair.high;
  if (rng.bernoulli(cfg.flip_topdown)) flip_rows(out.high);
  if (rng.bernoulli(cfg.flip_horizontal)) flip_cols(out.high);
  if (cfg.shift_cols > 0)
    rotate_cols(out.high, static_cast<std::uint32_t>(rng.uniform_int(cfg.shift_cols + 1)));
  if (cfg.scale_lo != 1.0 || cfg.scale_hi != 1.0)
    scale_ranges(out.high, rng.uniform(cfg.scale_lo, cfg.scale_hi));
  out.low = subsample_rows(out.high, factor);
  return out;
}

std::vector<ScanPair> generate_dataset(const Scene& scene, const Trajectory& traj,
                                       const SensorIntrinsics& hi_intr, std::uint32_t factor,
                                       const AugmentConfig& augment, std::uint32_t multiplier,
                                       double attitude_jitter_deg) {
  if (traj.poses.empty()) throw ConfigError("dataset: trajectory has no poses");
  if (factor != 2 && factor != 4 && factor != 8)
    throw ConfigError("dataset: factor must be 2, 4 or 8");
  if (multiplier < 1) throw ConfigError("dataset: multiplier must be >= 1");
  augment.validate();
  hi_intr.validate();

  std::vector<ScanPair> pairs;
  pairs.reserve(traj.poses.size() * multiplier);
  for (std::size_t i = 0; i < traj.poses.size(); ++i) {
    Pose pose = traj.poses[i];
    if (attitude_jitter_deg > 0.0) {
      Rng jitter = Rng::keyed(augment.seed, {0xA77Eull, i});
      pose.pitch += jitter.uniform(-attitude_jitter_deg, attitude_jitter_deg) * kDegToRad;
      pose.roll += jitter.uniform(-attitude_jitter_deg, attitude_jitter_deg) * kDegToRad;
    }
    ScanPair base;
    base.pose = pose;
    base.high = raycast_scan(scene, pose, hi_intr);
    base.low = subsample_rows(base.high, factor);
    pairs.push_back(base);
    for (std::uint32_t copy = 1; copy < multiplier; ++copy) {
      Rng rng = Rng::keyed(augment.seed, {i, copy});
      pairs.push_back(augment_pair(base, augment, rng));
    }
  }
  return pairs;
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("trajectory file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!doc.is_array()) throw FormatError(path + ": trajectory file must be a JSON array");

  Trajectory traj;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const std::string ctx = path + ": pose " + std::to_string(i);
    try {
      const auto& pos = rec.at("position");
      if (!pos.is_array() || pos.size() != 3) throw FormatError(ctx + ".position: expected [x, y, z]");
      Pose p;
      p.x = pos[0].get<double>();
      p.y = pos[1].get<double>();
      p.z = pos[2].get<double>();
      p.yaw = rec.value("yaw_deg", 0.0) * kDegToRad;
      p.pitch = rec.value("pitch_deg", 0.0) * kDegToRad;
      p.roll = rec.value("roll_deg", 0.0) * kDegToRad;
      traj.poses.push_back(p);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(ctx + ": " + e.what());
    }
  }
  if (traj.poses.empty()) throw FormatError(path + ": trajectory has no poses");
  return traj;
}

}  // namespace lsr
