#include "lsr/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lsr/error.hpp"

namespace lsr {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
}  // namespace

void SensorIntrinsics::validate() const {
  if (channels < 2) throw ConfigError("intrinsics: channels must be >= 2, got " + std::to_string(channels));
  if (h_res < 4) throw ConfigError("intrinsics: h_res must be >= 4, got " + std::to_string(h_res));
  if (!(v_fov_deg > 0.0f) || !(v_fov_deg < 180.0f))
    throw ConfigError("intrinsics: v_fov_deg must be in (0, 180), got " + std::to_string(v_fov_deg));
  if (!std::isfinite(v_center_deg)) throw ConfigError("intrinsics: v_center_deg must be finite");
  if (!(min_range_m > 0.0f) || !(max_range_m > min_range_m))
    throw ConfigError("intrinsics: need max_range_m > min_range_m > 0");
}

double SensorIntrinsics::beam_spacing_rad() const {
  return static_cast<double>(v_fov_deg) * kDegToRad / (channels - 1);
}

double SensorIntrinsics::elevation_rad(std::uint32_t row) const {
  const double top = (static_cast<double>(v_center_deg) + static_cast<double>(v_fov_deg) / 2.0) * kDegToRad;
  return top - row * beam_spacing_rad();
}

std::vector<double> beam_elevations(const SensorIntrinsics& intr) {
  intr.validate();
  std::vector<double> out(intr.channels);
  for (std::uint32_t r = 0; r < intr.channels; ++r) out[r] = intr.elevation_rad(r);
  return out;
}

RangeImage RangeImage::zeros(const SensorIntrinsics& intr) {
  intr.validate();
  RangeImage img;
  img.intrinsics = intr;
  img.data.assign(static_cast<std::size_t>(intr.channels) * intr.h_res, 0.0f);
  return img;
}

void RangeImage::validate() const {
  intrinsics.validate();
  if (data.size() != static_cast<std::size_t>(rows()) * cols())
    throw ConfigError("range image: data size does not match intrinsics dims");
  for (float v : data) {
    if (!std::isfinite(v)) throw NumericError("range image: non-finite range value");
    if (v != 0.0f && (v < intrinsics.min_range_m || v > intrinsics.max_range_m))
      throw ConfigError("range image: value " + std::to_string(v) + " outside [min_range, max_range]");
  }
}

NormalizedImage NormalizedImage::zeros(const SensorIntrinsics& intr) {
  intr.validate();
  NormalizedImage img;
  img.intrinsics = intr;
  img.data.assign(static_cast<std::size_t>(intr.channels) * intr.h_res, 0.0f);
  return img;
}

std::array<double, 9> Pose::rotation() const {
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  // Rz(yaw) * Ry(pitch) * Rx(roll)
  return {cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
          sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
          -sp,     cp * sr,                cp * cr};
}

Vec3 Pose::rotate(const Vec3& v) const {
  const auto r = rotation();
  return {r[0] * v.x + r[1] * v.y + r[2] * v.z,
          r[3] * v.x + r[4] * v.y + r[5] * v.z,
          r[6] * v.x + r[7] * v.y + r[8] * v.z};
}

Vec3 Pose::transform(const Vec3& v) const {
  Vec3 r = rotate(v);
  return {r.x + x, r.y + y, r.z + z};
}

ProjectionResult project(const PointCloud& cloud, const SensorIntrinsics& intr) {
  intr.validate();
  ProjectionResult res;
  res.image = RangeImage::zeros(intr);
  const double spacing = intr.beam_spacing_rad();
  const double top = intr.elevation_rad(0);
  const std::uint32_t cols = intr.h_res;

  for (const LidarPoint& p : cloud.points) {
    const double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    if (!(r >= intr.min_range_m) || r > intr.max_range_m) {
      ++res.dropped;
      continue;
    }
    const double elev = std::asin(p.z / r);
    const double row_f = (top - elev) / spacing;
    const long row = std::lround(row_f);
    if (row < 0 || row >= static_cast<long>(intr.channels) ||
        std::abs(elev - intr.elevation_rad(static_cast<std::uint32_t>(row))) > spacing * 0.5) {
      ++res.dropped;
      continue;
    }
    const double az = std::atan2(p.y, p.x);
    long col = static_cast<long>(std::floor((az + kPi) / (2.0 * kPi) * cols));
    col = ((col % cols) + cols) % cols;

    float& px = res.image.at(static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(col));
    const float rf = static_cast<float>(r);
    if (px == 0.0f || rf < px) px = rf;
  }
  return res;
}

PointCloud unproject(const RangeImage& img) {
  img.intrinsics.validate();
  PointCloud cloud;
  const std::uint32_t rows = img.rows(), cols = img.cols();
  for (std::uint32_t r = 0; r < rows; ++r) {
    const double phi = img.intrinsics.elevation_rad(r);
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    for (std::uint32_t c = 0; c < cols; ++c) {
      const float v = img.at(r, c);
      if (v == 0.0f) continue;
      const double theta = (c + 0.5) / cols * 2.0 * kPi - kPi;
      const double range = v;
      cloud.points.push_back({range * cphi * std::cos(theta),
                              range * cphi * std::sin(theta),
                              range * sphi,
                              static_cast<std::uint16_t>(r)});
    }
  }
  return cloud;
}

NormalizedImage normalize(const RangeImage& img) {
  NormalizedImage out;
  out.intrinsics = img.intrinsics;
  out.data.resize(img.data.size());
  const double inv = 1.0 / img.intrinsics.max_range_m;
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<float>(img.data[i] * inv);
  return out;
}

RangeImage denormalize(const NormalizedImage& img) {
  RangeImage out;
  out.intrinsics = img.intrinsics;
  out.data.resize(img.data.size());
  const double scale = img.intrinsics.max_range_m;
  for (std::size_t i = 0; i < img.data.size(); ++i)
    out.data[i] = static_cast<float>(img.data[i] * scale);
  return out;
}

SensorIntrinsics subsample_intrinsics(const SensorIntrinsics& intr, std::uint32_t factor) {
  if (factor == 0 || intr.channels % factor != 0)
    throw ConfigError("subsample: factor " + std::to_string(factor) + " does not divide " +
                      std::to_string(intr.channels) + " rows");
  SensorIntrinsics out = intr;
  out.channels = intr.channels / factor;
  if (out.channels < 2) throw ConfigError("subsample: fewer than 2 rows would remain");
  const double spacing = intr.beam_spacing_rad() * factor;
  const double top = intr.elevation_rad(0);
  const double fov = spacing * (out.channels - 1);
  out.v_fov_deg = static_cast<float>(fov / kDegToRad);
  out.v_center_deg = static_cast<float>((top - fov / 2.0) / kDegToRad);
  return out;
}

SensorIntrinsics expand_intrinsics(const SensorIntrinsics& intr, std::uint32_t factor) {
  if (factor == 0) throw ConfigError("expand: factor must be >= 1");
  SensorIntrinsics out = intr;
  out.channels = intr.channels * factor;
  const double spacing = intr.beam_spacing_rad() / factor;
  const double top = intr.elevation_rad(0);
  const double fov = spacing * (out.channels - 1);
  out.v_fov_deg = static_cast<float>(fov / kDegToRad);
  out.v_center_deg = static_cast<float>((top - fov / 2.0) / kDegToRad);
  return out;
}

RangeImage subsample_rows(const RangeImage& img, std::uint32_t factor) {
  if (factor == 1) return img;
  RangeImage out;
  out.intrinsics = subsample_intrinsics(img.intrinsics, factor);
  const std::uint32_t cols = img.cols();
  out.data.resize(static_cast<std::size_t>(out.intrinsics.channels) * cols);
  for (std::uint32_t r = 0; r < out.intrinsics.channels; ++r) {
    const float* src = img.data.data() + static_cast<std::size_t>(r) * factor * cols;
    std::copy(src, src + cols, out.data.data() + static_cast<std::size_t>(r) * cols);
  }
  return out;
}

}  // namespace lsr
