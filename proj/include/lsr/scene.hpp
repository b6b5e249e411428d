#pragma once

#include <string>
#include <variant>
#include <vector>

#include "lsr/geometry.hpp"

namespace lsr {

// World primitives, all solid. Good enough to stand in for the simply
// structured meshes a driving simulator would provide.
struct GroundPlane {
  double z = 0.0;
};

struct Box {
  Vec3 min, max;
};

struct Sphere {
  Vec3 center;
  double radius = 1.0;
};

// Axis-aligned vertical cylinder with end caps.
struct Cylinder {
  double cx = 0.0, cy = 0.0;
  double radius = 1.0;
  double z_min = 0.0, z_max = 1.0;
};

using Primitive = std::variant<GroundPlane, Box, Sphere, Cylinder>;

struct Scene {
  std::vector<Primitive> primitives;

  void validate() const;  // throws ConfigError on degenerate extents
};

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
};

// Each returns the smallest positive hit distance, or +inf on a miss.
double intersect(const Ray& ray, const GroundPlane& p);
double intersect(const Ray& ray, const Box& b);
double intersect(const Ray& ray, const Sphere& s);
double intersect(const Ray& ray, const Cylinder& c);

double scene_hit(const Scene& scene, const Ray& ray);

// Casts one ray per (row, col) beam from the posed sensor. Pixels outside
// [min_range, max_range] are 0.
RangeImage raycast_scan(const Scene& scene, const Pose& pose, const SensorIntrinsics& intr);

Scene load_scene(const std::string& path);
Scene parse_scene_json(const std::string& text, const std::string& origin_hint);

}  // namespace lsr
