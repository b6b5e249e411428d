#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace lsr {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

// Spinning-lidar model: `channels` beams spread uniformly over a vertical
// aperture of `v_fov_deg` centered at `v_center_deg`, sweeping `h_res`
// azimuth bins over 360 degrees. Row 0 is the highest beam.
struct SensorIntrinsics {
  std::uint32_t channels = 16;
  std::uint32_t h_res = 1024;
  float v_fov_deg = 30.0f;
  float v_center_deg = 0.0f;
  float max_range_m = 100.0f;
  float min_range_m = 0.3f;

  void validate() const;  // throws ConfigError on a bad field

  double beam_spacing_rad() const;
  double elevation_rad(std::uint32_t row) const;  // row 0 = top beam

  bool operator==(const SensorIntrinsics&) const = default;
};

std::vector<double> beam_elevations(const SensorIntrinsics& intr);

// Panoramic grid of ranges in meters; 0 marks an invalid pixel (no return).
struct RangeImage {
  SensorIntrinsics intrinsics;
  std::vector<float> data;  // rows*cols, row-major

  static RangeImage zeros(const SensorIntrinsics& intr);

  std::uint32_t rows() const { return intrinsics.channels; }
  std::uint32_t cols() const { return intrinsics.h_res; }
  float& at(std::uint32_t r, std::uint32_t c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  float at(std::uint32_t r, std::uint32_t c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

  // Full type invariant: dims match intrinsics, every value finite and
  // either 0 or inside [min_range, max_range].
  void validate() const;
};

// Same grid with ranges divided by max_range_m; 0 stays 0.
struct NormalizedImage {
  SensorIntrinsics intrinsics;
  std::vector<float> data;

  static NormalizedImage zeros(const SensorIntrinsics& intr);

  std::uint32_t rows() const { return intrinsics.channels; }
  std::uint32_t cols() const { return intrinsics.h_res; }
  float& at(std::uint32_t r, std::uint32_t c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
  float at(std::uint32_t r, std::uint32_t c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }
};

struct LidarPoint {
  double x = 0.0, y = 0.0, z = 0.0;
  std::uint16_t ring = 0;
};

struct PointCloud {
  std::vector<LidarPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// World pose; rotation applied in yaw-pitch-roll order (Rz * Ry * Rx),
// x forward / y left / z up.
struct Pose {
  double x = 0.0, y = 0.0, z = 0.0;
  double yaw = 0.0, pitch = 0.0, roll = 0.0;

  std::array<double, 9> rotation() const;  // row-major
  Vec3 rotate(const Vec3& v) const;
  Vec3 transform(const Vec3& v) const;  // rotate then translate
};

struct ProjectionResult {
  RangeImage image;
  std::size_t dropped = 0;  // points outside the FOV or range window
};

// Spherical projection. Row: nearest beam by elevation, rejected beyond half
// the beam spacing. Column: uniform azimuth binning with the seam at the
// rear (azimuth -pi maps to column 0). Collisions keep the closer surface.
ProjectionResult project(const PointCloud& cloud, const SensorIntrinsics& intr);

// One point per non-zero pixel, placed at the column center azimuth.
PointCloud unproject(const RangeImage& img);

NormalizedImage normalize(const RangeImage& img);
RangeImage denormalize(const NormalizedImage& img);

// Keeps rows 0, factor, 2*factor, ... (bit-identical copies). The output
// intrinsics span exactly the kept beams.
RangeImage subsample_rows(const RangeImage& img, std::uint32_t factor);
SensorIntrinsics subsample_intrinsics(const SensorIntrinsics& intr, std::uint32_t factor);

// Inverse of subsample_intrinsics: the beam grid a `factor`-times denser
// sensor would have, keeping the top beam fixed.
SensorIntrinsics expand_intrinsics(const SensorIntrinsics& intr, std::uint32_t factor);

}  // namespace lsr
