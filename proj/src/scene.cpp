#include "lsr/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "lsr/error.hpp"
#include "lsr/parallel.hpp"

namespace lsr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTMin = 1e-9;  // ignore self-hits at the ray origin
constexpr double kPi = 3.14159265358979323846;
}  // namespace

void Scene::validate() const {
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const auto bad = [&](const std::string& why) {
      throw ConfigError("scene primitive " + std::to_string(i) + ": " + why);
    };
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, GroundPlane>) {
            if (!std::isfinite(p.z)) bad("plane z must be finite");
          } else if constexpr (std::is_same_v<T, Box>) {
            if (!(p.min.x < p.max.x && p.min.y < p.max.y && p.min.z < p.max.z))
              bad("box extents must be positive");
          } else if constexpr (std::is_same_v<T, Sphere>) {
            if (!(p.radius > 0.0)) bad("sphere radius must be positive");
          } else if constexpr (std::is_same_v<T, Cylinder>) {
            if (!(p.radius > 0.0)) bad("cylinder radius must be positive");
            if (!(p.z_min < p.z_max)) bad("cylinder z extent must be positive");
          }
        },
        primitives[i]);
  }
}

double intersect(const Ray& ray, const GroundPlane& p) {
  if (std::abs(ray.dir.z) < 1e-15) return kInf;
  const double t = (p.z - ray.origin.z) / ray.dir.z;
  return t > kTMin ? t : kInf;
}

double intersect(const Ray& ray, const Box& b) {
  double t0 = -kInf, t1 = kInf;
  const double o[3] = {ray.origin.x, ray.origin.y, ray.origin.z};
  const double d[3] = {ray.dir.x, ray.dir.y, ray.dir.z};
  const double lo[3] = {b.min.x, b.min.y, b.min.z};
  const double hi[3] = {b.max.x, b.max.y, b.max.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return kInf;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return kInf;
  }
  if (t0 > kTMin) return t0;
  if (t1 > kTMin) return t1;  // origin inside: first surface is the exit face
  return kInf;
}

double intersect(const Ray& ray, const Sphere& s) {
  const Vec3 oc = ray.origin - s.center;
  const double b = oc.dot(ray.dir);
  const double c = oc.dot(oc) - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return kInf;
  const double sq = std::sqrt(disc);
  const double t0 = -b - sq;
  if (t0 > kTMin) return t0;
  const double t1 = -b + sq;
  if (t1 > kTMin) return t1;
  return kInf;
}

double intersect(const Ray& ray, const Cylinder& c) {
  double best = kInf;
  const double ox = ray.origin.x - c.cx, oy = ray.origin.y - c.cy;
  const double dx = ray.dir.x, dy = ray.dir.y;
  const double a = dx * dx + dy * dy;
  if (a > 1e-15) {
    const double b = ox * dx + oy * dy;
    const double q = ox * ox + oy * oy - c.radius * c.radius;
    const double disc = b * b - a * q;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (const double t : {(-b - sq) / a, (-b + sq) / a}) {
        if (t > kTMin && t < best) {
          const double z = ray.origin.z + t * ray.dir.z;
          if (z >= c.z_min && z <= c.z_max) best = t;
        }
      }
    }
  }
  if (std::abs(ray.dir.z) > 1e-15) {
    for (const double zc : {c.z_min, c.z_max}) {
      const double t = (zc - ray.origin.z) / ray.dir.z;
      if (t > kTMin && t < best) {
        const double px = ray.origin.x + t * dx - c.cx;
        const double py = ray.origin.y + t * dy - c.cy;
        if (px * px + py * py <= c.radius * c.radius) best = t;
      }
    }
  }
  return best;
}

double scene_hit(const Scene& scene, const Ray& ray) {
  double best = kInf;
  for (const Primitive& p : scene.primitives) {
    const double t = std::visit([&](const auto& prim) { return intersect(ray, prim); }, p);
    best = std::min(best, t);
  }
  return best;
}

RangeImage raycast_scan(const Scene& scene, const Pose& pose, const SensorIntrinsics& intr) {
  intr.validate();
  scene.validate();
  RangeImage img = RangeImage::zeros(intr);
  const std::uint32_t rows = intr.channels, cols = intr.h_res;
  const Vec3 origin{pose.x, pose.y, pose.z};

  parallel_for(rows, [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t r = r0; r < r1; ++r) {
      const double phi = intr.elevation_rad(static_cast<std::uint32_t>(r));
      const double cphi = std::cos(phi), sphi = std::sin(phi);
      for (std::uint32_t c = 0; c < cols; ++c) {
        const double theta = (c + 0.5) / cols * 2.0 * kPi - kPi;
        const Vec3 dir = pose.rotate({cphi * std::cos(theta), cphi * std::sin(theta), sphi});
        const double t = scene_hit(scene, {origin, dir});
        if (t >= intr.min_range_m && t <= intr.max_range_m)
          img.at(static_cast<std::uint32_t>(r), c) = static_cast<float>(t);
      }
    }
  });
  return img;
}

namespace {

Vec3 vec3_from(const nlohmann::json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3)
    throw FormatError(ctx + ": expected an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

Scene parse_scene_json(const std::string& text, const std::string& origin_hint) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(origin_hint + ": " + e.what());
  }
  if (!doc.is_array()) throw FormatError(origin_hint + ": scene file must be a JSON array of primitives");

  Scene scene;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const std::string ctx = origin_hint + ": primitive " + std::to_string(i);
    try {
      const std::string type = rec.at("type").get<std::string>();
      if (type == "plane") {
        scene.primitives.push_back(GroundPlane{rec.at("z").get<double>()});
      } else if (type == "box") {
        scene.primitives.push_back(Box{vec3_from(rec.at("min"), ctx + ".min"),
                                       vec3_from(rec.at("max"), ctx + ".max")});
      } else if (type == "sphere") {
        scene.primitives.push_back(Sphere{vec3_from(rec.at("center"), ctx + ".center"),
                                          rec.at("radius").get<double>()});
      } else if (type == "cylinder") {
        const auto& ctr = rec.at("center");
        if (!ctr.is_array() || ctr.size() != 2)
          throw FormatError(ctx + ".center: expected [x, y]");
        scene.primitives.push_back(Cylinder{ctr[0].get<double>(), ctr[1].get<double>(),
                                            rec.at("radius").get<double>(),
                                            rec.at("z_min").get<double>(),
                                            rec.at("z_max").get<double>()});
      } else {
        throw FormatError(ctx + ": unknown primitive type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(ctx + ": " + e.what());
    }
  }
  scene.validate();
  return scene;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("scene file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene_json(ss.str(), path);
}

}  // namespace lsr
