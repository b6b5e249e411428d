#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "lsr/geometry.hpp"

namespace lsr {

struct OccupancyParams {
  float l_hit = 0.84729786f;    // log(0.7 / 0.3)
  float l_miss = -0.40546511f;  // log(0.4 / 0.6)
  float l_min = -2.0f;
  float l_max = 3.5f;
  float state_delta = 0.02f;  // ternary readout band around p = 0.5

  void validate() const;
};

struct GridConfig {
  Vec3 origin;
  double resolution = 0.05;
  std::uint32_t nx = 1, ny = 1, nz = 1;
  OccupancyParams occ;

  void validate() const;
  bool congruent(const GridConfig& o) const;  // same lattice (ignores occ)
};

enum class VoxelState { Free, Unknown, Occupied };

struct VoxelIndex {
  int x = 0, y = 0, z = 0;
  bool operator==(const VoxelIndex&) const = default;
  bool operator<(const VoxelIndex& o) const {
    return std::tie(x, y, z) < std::tie(o.x, o.y, o.z);
  }
};

// Walks the voxels a world-space segment [a, b] passes through, clipped to
// the grid, in order. Exposed for oracle testing.
void walk_segment(const GridConfig& cfg, const Vec3& a, const Vec3& b,
                  const std::function<void(const VoxelIndex&)>& visit);

// Dense log-odds occupancy grid. Untouched voxels read probability 0.5.
class VoxelGrid {
 public:
  explicit VoxelGrid(const GridConfig& cfg);

  const GridConfig& config() const { return cfg_; }
  std::size_t voxel_count() const { return log_odds_.size(); }

  bool inside(const VoxelIndex& v) const {
    return v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x < static_cast<int>(cfg_.nx) &&
           v.y < static_cast<int>(cfg_.ny) && v.z < static_cast<int>(cfg_.nz);
  }
  std::size_t flat(const VoxelIndex& v) const {
    return (static_cast<std::size_t>(v.z) * cfg_.ny + v.y) * cfg_.nx + v.x;
  }
  VoxelIndex voxel_of(const Vec3& p) const;
  Vec3 center_of(const VoxelIndex& v) const;

  float log_odds(const VoxelIndex& v) const;
  bool touched(const VoxelIndex& v) const;
  double occupancy(const VoxelIndex& v) const;  // untouched -> 0.5
  VoxelState state(const VoxelIndex& v) const;

  // Registers the cloud with `pose`, then casts a ray per point from the
  // sensor origin: l_miss along the ray, l_hit at the endpoint. Within one
  // scan a voxel is updated at most once as free and once as occupied, and
  // occupied wins. Endpoints beyond max_range or outside the grid register
  // no hit; the traversed part still counts as free space.
  void integrate_scan(const PointCloud& cloud, const Pose& pose, double max_range);

  const std::vector<float>& raw_log_odds() const { return log_odds_; }
  const std::vector<std::uint8_t>& raw_touched() const { return touched_; }
  void load_raw(std::vector<float> log_odds, std::vector<std::uint8_t> touched);

 private:
  GridConfig cfg_;
  std::vector<float> log_odds_;
  std::vector<std::uint8_t> touched_;
  // Per-scan update stamps so repeat visits within one scan are ignored.
  std::vector<std::uint32_t> stamp_hit_, stamp_miss_;
  std::uint32_t scan_id_ = 0;
};

// Sequential integration of registered clouds; order-deterministic.
VoxelGrid build_map(const std::vector<std::pair<PointCloud, Pose>>& scans, const GridConfig& cfg,
                    double max_range);

// Smallest grid (origin snapped to the resolution lattice, one voxel of
// padding) covering all points and sensor origins.
GridConfig fit_grid_bounds(const std::vector<std::pair<PointCloud, Pose>>& scans,
                           double resolution, const OccupancyParams& occ);

}  // namespace lsr
