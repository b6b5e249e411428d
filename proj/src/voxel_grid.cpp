#include "lsr/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lsr/error.hpp"

namespace lsr {

void OccupancyParams::validate() const {
  if (!(l_hit > 0.0f) || !(l_miss < 0.0f))
    throw ConfigError("occupancy: need l_hit > 0 > l_miss");
  if (!(l_min < l_max)) throw ConfigError("occupancy: need l_min < l_max");
  if (!(state_delta >= 0.0f) || state_delta >= 0.5f)
    throw ConfigError("occupancy: state_delta must be in [0, 0.5)");
}

void GridConfig::validate() const {
  if (!(resolution > 0.0)) throw ConfigError("grid: resolution must be > 0");
  if (nx < 1 || ny < 1 || nz < 1) throw ConfigError("grid: dims must be >= 1");
  const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
  if (n > (1ull << 28))
    throw ConfigError("grid: " + std::to_string(n) +
                      " voxels exceeds the dense-grid budget; use a coarser resolution");
  occ.validate();
}

bool GridConfig::congruent(const GridConfig& o) const {
  return nx == o.nx && ny == o.ny && nz == o.nz && resolution == o.resolution &&
         origin.x == o.origin.x && origin.y == o.origin.y && origin.z == o.origin.z;
}

namespace {

// Clips the parametric segment a + t*(b-a), t in [0,1], against the grid
// box. Returns false when it misses entirely.
bool clip_segment(const GridConfig& cfg, const Vec3& a, const Vec3& b, double& t0, double& t1) {
  t0 = 0.0;
  t1 = 1.0;
  const double lo[3] = {cfg.origin.x, cfg.origin.y, cfg.origin.z};
  const double hi[3] = {cfg.origin.x + cfg.nx * cfg.resolution,
                        cfg.origin.y + cfg.ny * cfg.resolution,
                        cfg.origin.z + cfg.nz * cfg.resolution};
  const double o[3] = {a.x, a.y, a.z};
  const double d[3] = {b.x - a.x, b.y - a.y, b.z - a.z};
  for (int ax = 0; ax < 3; ++ax) {
    if (std::abs(d[ax]) < 1e-15) {
      if (o[ax] < lo[ax] || o[ax] > hi[ax]) return false;
      continue;
    }
    double ta = (lo[ax] - o[ax]) / d[ax];
    double tb = (hi[ax] - o[ax]) / d[ax];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

void walk_segment(const GridConfig& cfg, const Vec3& a, const Vec3& b,
                  const std::function<void(const VoxelIndex&)>& visit) {
  double t0, t1;
  if (!clip_segment(cfg, a, b, t0, t1)) return;
  const double res = cfg.resolution;
  const Vec3 d = b - a;
  const Vec3 p0 = a + d * t0;
  const Vec3 p1 = a + d * t1;

  const auto clamp_idx = [&](double coord, double org, std::uint32_t n) {
    int i = static_cast<int>(std::floor((coord - org) / res));
    return std::clamp(i, 0, static_cast<int>(n) - 1);
  };
  VoxelIndex v{clamp_idx(p0.x, cfg.origin.x, cfg.nx), clamp_idx(p0.y, cfg.origin.y, cfg.ny),
               clamp_idx(p0.z, cfg.origin.z, cfg.nz)};
  const VoxelIndex v_end{clamp_idx(p1.x, cfg.origin.x, cfg.nx),
                         clamp_idx(p1.y, cfg.origin.y, cfg.ny),
                         clamp_idx(p1.z, cfg.origin.z, cfg.nz)};

  // Amanatides-Woo incremental traversal.
  int step[3];
  double t_max[3], t_delta[3];
  const double dd[3] = {d.x, d.y, d.z};
  const double org[3] = {cfg.origin.x, cfg.origin.y, cfg.origin.z};
  const double pp[3] = {p0.x, p0.y, p0.z};
  int vi[3] = {v.x, v.y, v.z};
  for (int ax = 0; ax < 3; ++ax) {
    if (dd[ax] > 1e-15) {
      step[ax] = 1;
      const double boundary = org[ax] + (vi[ax] + 1) * res;
      t_max[ax] = t0 + (boundary - pp[ax]) / dd[ax];
      t_delta[ax] = res / dd[ax];
    } else if (dd[ax] < -1e-15) {
      step[ax] = -1;
      const double boundary = org[ax] + vi[ax] * res;
      t_max[ax] = t0 + (boundary - pp[ax]) / dd[ax];
      t_delta[ax] = -res / dd[ax];
    } else {
      step[ax] = 0;
      t_max[ax] = std::numeric_limits<double>::infinity();
      t_delta[ax] = std::numeric_limits<double>::infinity();
    }
  }

  const long max_steps = static_cast<long>(cfg.nx) + cfg.ny + cfg.nz + 3;
  for (long n = 0; n <= max_steps; ++n) {
    visit({vi[0], vi[1], vi[2]});
    if (vi[0] == v_end.x && vi[1] == v_end.y && vi[2] == v_end.z) return;
    int ax = 0;
    if (t_max[1] < t_max[ax]) ax = 1;
    if (t_max[2] < t_max[ax]) ax = 2;
    if (t_max[ax] > t1 + 1e-12) return;  // numeric guard; normally ends at v_end
    vi[ax] += step[ax];
    if (vi[ax] < 0 || (ax == 0 && vi[0] >= static_cast<int>(cfg.nx)) ||
        (ax == 1 && vi[1] >= static_cast<int>(cfg.ny)) ||
        (ax == 2 && vi[2] >= static_cast<int>(cfg.nz)))
      return;
    t_max[ax] += t_delta[ax];
  }
}

VoxelGrid::VoxelGrid(const GridConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t n = static_cast<std::size_t>(cfg_.nx) * cfg_.ny * cfg_.nz;
  log_odds_.assign(n, 0.0f);
  touched_.assign(n, 0);
  stamp_hit_.assign(n, 0);
  stamp_miss_.assign(n, 0);
}

VoxelIndex VoxelGrid::voxel_of(const Vec3& p) const {
  return {static_cast<int>(std::floor((p.x - cfg_.origin.x) / cfg_.resolution)),
          static_cast<int>(std::floor((p.y - cfg_.origin.y) / cfg_.resolution)),
          static_cast<int>(std::floor((p.z - cfg_.origin.z) / cfg_.resolution))};
}

Vec3 VoxelGrid::center_of(const VoxelIndex& v) const {
  return {cfg_.origin.x + (v.x + 0.5) * cfg_.resolution,
          cfg_.origin.y + (v.y + 0.5) * cfg_.resolution,
          cfg_.origin.z + (v.z + 0.5) * cfg_.resolution};
}

float VoxelGrid::log_odds(const VoxelIndex& v) const {
  if (!inside(v)) throw ConfigError("voxel index out of bounds");
  return log_odds_[flat(v)];
}

bool VoxelGrid::touched(const VoxelIndex& v) const {
  if (!inside(v)) throw ConfigError("voxel index out of bounds");
  return touched_[flat(v)] != 0;
}

double VoxelGrid::occupancy(const VoxelIndex& v) const {
  if (!inside(v)) throw ConfigError("voxel index out of bounds");
  const std::size_t i = flat(v);
  if (!touched_[i]) return 0.5;
  return 1.0 / (1.0 + std::exp(-static_cast<double>(log_odds_[i])));
}

VoxelState VoxelGrid::state(const VoxelIndex& v) const {
  const std::size_t i = flat(v);
  if (!touched_[i]) return VoxelState::Unknown;
  const double p = occupancy(v);
  if (p > 0.5 + cfg_.occ.state_delta) return VoxelState::Occupied;
  if (p < 0.5 - cfg_.occ.state_delta) return VoxelState::Free;
  return VoxelState::Unknown;
}

void VoxelGrid::integrate_scan(const PointCloud& cloud, const Pose& pose, double max_range) {
  if (cloud.empty()) return;
  ++scan_id_;
  const Vec3 origin{pose.x, pose.y, pose.z};

  std::vector<Vec3> endpoints;
  std::vector<bool> is_hit;
  endpoints.reserve(cloud.size());
  is_hit.reserve(cloud.size());

  // Phase 1: endpoint hits (occupied wins within a scan).
  for (const LidarPoint& lp : cloud.points) {
    Vec3 e = pose.transform({lp.x, lp.y, lp.z});
    const Vec3 delta = e - origin;
    const double len = delta.norm();
    bool hit = true;
    if (max_range > 0.0 && len > max_range) {
      e = origin + delta * (max_range / len);
      hit = false;
    }
    const VoxelIndex ve = voxel_of(e);
    if (hit && inside(ve)) {
      const std::size_t i = flat(ve);
      if (stamp_hit_[i] != scan_id_) {
        stamp_hit_[i] = scan_id_;
        log_odds_[i] = std::min(cfg_.occ.l_max, log_odds_[i] + cfg_.occ.l_hit);
        touched_[i] = 1;
      }
    }
    endpoints.push_back(e);
    is_hit.push_back(hit);
  }

  // Phase 2: free space along each ray, skipping voxels hit this scan.
  for (std::size_t k = 0; k < endpoints.size(); ++k) {
    walk_segment(cfg_, origin, endpoints[k], [&](const VoxelIndex& v) {
      const std::size_t i = flat(v);
      if (stamp_hit_[i] == scan_id_ || stamp_miss_[i] == scan_id_) return;
      stamp_miss_[i] = scan_id_;
      log_odds_[i] = std::max(cfg_.occ.l_min, log_odds_[i] + cfg_.occ.l_miss);
      touched_[i] = 1;
    });
  }
}

void VoxelGrid::load_raw(std::vector<float> log_odds, std::vector<std::uint8_t> touched) {
  if (log_odds.size() != voxel_count() || touched.size() != voxel_count())
    throw FormatError("grid payload size does not match dims");
  log_odds_ = std::move(log_odds);
  touched_ = std::move(touched);
}

VoxelGrid build_map(const std::vector<std::pair<PointCloud, Pose>>& scans, const GridConfig& cfg,
                    double max_range) {
  VoxelGrid grid(cfg);
  for (const auto& [cloud, pose] : scans) grid.integrate_scan(cloud, pose, max_range);
  return grid;
}

GridConfig fit_grid_bounds(const std::vector<std::pair<PointCloud, Pose>>& scans,
                           double resolution, const OccupancyParams& occ) {
  if (!(resolution > 0.0)) throw ConfigError("grid: resolution must be > 0");
  double lo[3], hi[3];
  std::fill(lo, lo + 3, std::numeric_limits<double>::infinity());
  std::fill(hi, hi + 3, -std::numeric_limits<double>::infinity());
  const auto take = [&](const Vec3& p) {
    lo[0] = std::min(lo[0], p.x);
    lo[1] = std::min(lo[1], p.y);
    lo[2] = std::min(lo[2], p.z);
    hi[0] = std::max(hi[0], p.x);
    hi[1] = std::max(hi[1], p.y);
    hi[2] = std::max(hi[2], p.z);
  };
  for (const auto& [cloud, pose] : scans) {
    take({pose.x, pose.y, pose.z});
    for (const LidarPoint& lp : cloud.points) take(pose.transform({lp.x, lp.y, lp.z}));
  }
  if (!std::isfinite(lo[0])) throw ConfigError("grid bounds: no points to fit");

  GridConfig cfg;
  cfg.resolution = resolution;
  cfg.occ = occ;
  cfg.origin = {std::floor(lo[0] / resolution - 1.0) * resolution,
                std::floor(lo[1] / resolution - 1.0) * resolution,
                std::floor(lo[2] / resolution - 1.0) * resolution};
  cfg.nx = static_cast<std::uint32_t>(std::ceil((hi[0] - cfg.origin.x) / resolution)) + 1;
  cfg.ny = static_cast<std::uint32_t>(std::ceil((hi[1] - cfg.origin.y) / resolution)) + 1;
  cfg.nz = static_cast<std::uint32_t>(std::ceil((hi[2] - cfg.origin.z) / resolution)) + 1;
  cfg.validate();
  return cfg;
}

}  // namespace lsr
