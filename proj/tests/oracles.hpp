#pragma once

// Test-only oracles. Each one recomputes an expected result along a path
// independent of the implementation it checks: central finite differences
// for gradients, pairwise Mann-Whitney counting for AUC, plane-crossing
// enumeration and dense sampling for voxel traversal, and inside-predicate
// ray marching for the analytic primitive intersections.

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "lsr/geometry.hpp"
#include "lsr/scene.hpp"
#include "lsr/voxel_grid.hpp"

namespace oracle {

// Guarded relative error; exact zeros compare equal.
inline double rel_err(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

// Central finite difference of scalar() w.r.t. *slot.
template <typename F>
double central_diff(double* slot, F&& scalar, double h = 1e-4) {
  const double orig = *slot;
  *slot = orig + h;
  const double fp = scalar();
  *slot = orig - h;
  const double fm = scalar();
  *slot = orig;
  return (fp - fm) / (2.0 * h);
}

inline double mann_whitney_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  double u = 0.0;
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    ++pos;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j])
        u += 1.0;
      else if (scores[i] == scores[j])
        u += 0.5;
    }
  }
  for (bool l : labels)
    if (!l) ++neg;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

inline bool clip01(const lsr::GridConfig& cfg, const lsr::Vec3& a, const lsr::Vec3& b, double& t0,
                   double& t1) {
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

inline lsr::VoxelIndex voxel_at(const lsr::GridConfig& cfg, const lsr::Vec3& p) {
  const auto idx = [&](double c, double org, std::uint32_t n) {
    return std::clamp(static_cast<int>(std::floor((c - org) / cfg.resolution)), 0,
                      static_cast<int>(n) - 1);
  };
  return {idx(p.x, cfg.origin.x, cfg.nx), idx(p.y, cfg.origin.y, cfg.ny),
          idx(p.z, cfg.origin.z, cfg.nz)};
}

// The dense-sampling oracle taken to its exact limit: sample the segment at
// `samples` points, then add every boundary-crossing parameter so no sliver
// voxel can slip between two samples.
inline std::set<lsr::VoxelIndex> segment_voxels_dense(const lsr::GridConfig& cfg,
                                                      const lsr::Vec3& a, const lsr::Vec3& b,
                                                      int samples = 10000) {
  std::set<lsr::VoxelIndex> out;
  double t0, t1;
  if (!clip01(cfg, a, b, t0, t1)) return out;
  const lsr::Vec3 d = b - a;

  std::vector<double> ts;
  ts.reserve(samples + 64);
  for (int i = 0; i <= samples; ++i)
    ts.push_back(t0 + (t1 - t0) * (static_cast<double>(i) / samples));

  const double org[3] = {cfg.origin.x, cfg.origin.y, cfg.origin.z};
  const double oo[3] = {a.x, a.y, a.z};
  const double dd[3] = {d.x, d.y, d.z};
  const std::uint32_t dims[3] = {cfg.nx, cfg.ny, cfg.nz};
  for (int ax = 0; ax < 3; ++ax) {
    if (std::abs(dd[ax]) < 1e-15) continue;
    for (std::uint32_t k = 0; k <= dims[ax]; ++k) {
      const double plane = org[ax] + k * cfg.resolution;
      const double t = (plane - oo[ax]) / dd[ax];
      if (t > t0 + 1e-12 && t < t1 - 1e-12) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());
  // Sample the midpoint of every sub-interval (robust against points that
  // sit exactly on voxel boundaries).
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double tm = 0.5 * (ts[i] + ts[i + 1]);
    out.insert(voxel_at(cfg, a + d * tm));
  }
  out.insert(voxel_at(cfg, a + d * t0));
  out.insert(voxel_at(cfg, a + d * t1));
  return out;
}

// Pure uniform sampling (no crossing refinement); every voxel it finds must
// be visited by the traversal.
inline std::set<lsr::VoxelIndex> segment_voxels_sampled(const lsr::GridConfig& cfg,
                                                        const lsr::Vec3& a, const lsr::Vec3& b,
                                                        int samples = 10000) {
  std::set<lsr::VoxelIndex> out;
  double t0, t1;
  if (!clip01(cfg, a, b, t0, t1)) return out;
  const lsr::Vec3 d = b - a;
  for (int i = 0; i <= samples; ++i) {
    const double t = t0 + (t1 - t0) * (static_cast<double>(i) / samples);
    out.insert(voxel_at(cfg, a + d * t));
  }
  return out;
}

// ---- ray marching against inside-predicates ------------------------------

inline bool inside_primitive(const lsr::Primitive& prim, const lsr::Vec3& p) {
  return std::visit(
      [&](const auto& pr) -> bool {
        using T = std::decay_t<decltype(pr)>;
        if constexpr (std::is_same_v<T, lsr::GroundPlane>) {
          return p.z <= pr.z;
        } else if constexpr (std::is_same_v<T, lsr::Box>) {
          return p.x >= pr.min.x && p.x <= pr.max.x && p.y >= pr.min.y && p.y <= pr.max.y &&
                 p.z >= pr.min.z && p.z <= pr.max.z;
        } else if constexpr (std::is_same_v<T, lsr::Sphere>) {
          const lsr::Vec3 d = p - pr.center;
          return d.dot(d) <= pr.radius * pr.radius;
        } else {
          const double dx = p.x - pr.cx, dy = p.y - pr.cy;
          return dx * dx + dy * dy <= pr.radius * pr.radius && p.z >= pr.z_min && p.z <= pr.z_max;
        }
      },
      prim);
}

inline bool inside_scene(const lsr::Scene& scene, const lsr::Vec3& p) {
  for (const auto& prim : scene.primitives)
    if (inside_primitive(prim, p)) return true;
  return false;
}

// First entry distance along the ray found by marching + bisection, or +inf.
// The ray origin must start outside every primitive.
inline double march_hit(const lsr::Scene& scene, const lsr::Ray& ray, double t_max,
                        double step = 5e-4) {
  double prev = 1e-9;
  for (double t = prev; t <= t_max + step; t += step) {
    const lsr::Vec3 p = ray.origin + ray.dir * t;
    if (inside_scene(scene, p)) {
      double lo = prev, hi = t;
      for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (inside_scene(scene, ray.origin + ray.dir * mid))
          hi = mid;
        else
          lo = mid;
      }
      return hi;
    }
    prev = t;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace oracle
