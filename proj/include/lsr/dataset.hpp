#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsr/geometry.hpp"
#include "lsr/rng.hpp"
#include "lsr/scene.hpp"

namespace lsr {

struct Trajectory {
  std::vector<Pose> poses;
  double spacing_m = 0.0;  // nominal spacing metadata, not enforced
};

Trajectory load_trajectory(const std::string& path);

// Training pair; low is always a row-subsampled copy of high.
struct ScanPair {
  RangeImage low;
  RangeImage high;
  Pose pose;
};

struct AugmentConfig {
  double flip_topdown = 0.0;    // probability
  double flip_horizontal = 0.0; // probability
  std::uint32_t shift_cols = 0; // max circular column shift
  double scale_lo = 1.0;        // multiplicative range-scale interval
  double scale_hi = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Applies (in order) top-down flip, horizontal flip, circular column shift
// and range scaling to the high image, then rebuilds low by re-subsampling,
// so the pair correspondence survives every op.
ScanPair augment_pair(const ScanPair& pair, const AugmentConfig& cfg, Rng& rng);

// One raycast per pose (with optional uniform +-jitter on pitch/roll), plus
// multiplier-1 augmented copies per pose. Pure function of its arguments.
std::vector<ScanPair> generate_dataset(const Scene& scene, const Trajectory& traj,
                                       const SensorIntrinsics& hi_intr, std::uint32_t factor,
                                       const AugmentConfig& augment, std::uint32_t multiplier,
                                       double attitude_jitter_deg);

}  // namespace lsr
