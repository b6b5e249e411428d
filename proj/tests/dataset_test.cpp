#include <doctest.h>

#include <set>

#include "lsr/dataset.hpp"
#include "lsr/error.hpp"

using namespace lsr;

namespace {

Scene test_scene() {
  Scene s;
  s.primitives.push_back(GroundPlane{0.0});
  s.primitives.push_back(Box{{6, -3, 0}, {8, 3, 2.5}});
  s.primitives.push_back(Cylinder{-4, 4, 0.5, 0.0, 3.0});
  return s;
}

Trajectory line_traj(std::size_t n) {
  Trajectory t;
  for (std::size_t i = 0; i < n; ++i) {
    Pose p;
    p.x = static_cast<double>(i) * 2.0;
    p.z = 0.6;
    p.yaw = 0.1 * static_cast<double>(i);
    t.poses.push_back(p);
  }
  return t;
}

const SensorIntrinsics kIntr{32, 128, 30.0f, 0.0f, 100.0f, 0.3f};

ScanPair sample_pair() {
  const Scene s = test_scene();
  ScanPair pair;
  pair.pose = Pose{0, 0, 0.6};
  pair.high = raycast_scan(s, pair.pose, kIntr);
  pair.low = subsample_rows(pair.high, 4);
  return pair;
}

}  // namespace

TEST_CASE("augment: horizontal flip moves column 10 to cols-1-10") {
  ScanPair pair = sample_pair();
  std::fill(pair.high.data.begin(), pair.high.data.end(), 0.0f);
  pair.high.at(0, 10) = 7.0f;
  pair.low = subsample_rows(pair.high, 4);

  AugmentConfig cfg;
  cfg.flip_horizontal = 1.0;
  Rng rng(1);
  const ScanPair out = augment_pair(pair, cfg, rng);
  CHECK(out.high.at(0, 128 - 1 - 10) == 7.0f);
  CHECK(out.high.at(0, 10) == 0.0f);
}

TEST_CASE("augment: fixed scale interval (1,1) is the identity") {
  const ScanPair pair = sample_pair();
  AugmentConfig cfg;  // all probabilities zero, scale (1,1)
  Rng rng(2);
  const ScanPair out = augment_pair(pair, cfg, rng);
  CHECK(out.high.data == pair.high.data);
  CHECK(out.low.data == pair.low.data);
}

TEST_CASE("augment: column shifts are circular and wrap at full width") {
  const ScanPair pair = sample_pair();
  const std::uint32_t cols = pair.high.cols();
  AugmentConfig cfg;
  cfg.shift_cols = cols;  // draws in [0, cols]; cols must wrap to identity

  int identity_count = 0;
  for (std::uint64_t seed = 0; seed < 600; ++seed) {
    Rng rng(seed);
    const ScanPair out = augment_pair(pair, cfg, rng);
    // Whatever was drawn, the result is a circular rotation of the rows.
    bool any_match = false;
    for (std::uint32_t s = 0; s < cols && !any_match; ++s) {
      bool all = true;
      for (std::uint32_t c = 0; c < cols && all; ++c)
        if (out.high.at(1, c) != pair.high.at(1, (c + s) % cols)) all = false;
      any_match = all;
    }
    CHECK(any_match);
    if (out.high.data == pair.high.data) ++identity_count;
  }
  CHECK(identity_count > 0);  // draws of 0 and of the full width hit identity
}

TEST_CASE("augment: top-down flip re-subsamples the flipped high image") {
  const ScanPair pair = sample_pair();
  AugmentConfig cfg;
  cfg.flip_topdown = 1.0;
  Rng rng(4);
  const ScanPair out = augment_pair(pair, cfg, rng);
  // High rows reversed.
  for (std::uint32_t r = 0; r < 32; ++r)
    CHECK(out.high.at(r, 5) == pair.high.at(31 - r, 5));
  // Low rebuilt from the flipped high: row k = flipped high row 4k.
  for (std::uint32_t r = 0; r < 8; ++r)
    CHECK(out.low.at(r, 63) == out.high.at(4 * r, 63));
}

TEST_CASE("augment: range scaling multiplies non-zero pixels and clamps") {
  ScanPair pair = sample_pair();
  std::fill(pair.high.data.begin(), pair.high.data.end(), 0.0f);
  pair.high.at(1, 1) = 50.0f;
  pair.high.at(2, 2) = 99.0f;
  pair.low = subsample_rows(pair.high, 4);
  AugmentConfig cfg;
  cfg.scale_lo = 1.10;
  cfg.scale_hi = 1.10;
  Rng rng(5);
  const ScanPair out = augment_pair(pair, cfg, rng);
  CHECK(out.high.at(1, 1) == doctest::Approx(55.0f));
  CHECK(out.high.at(2, 2) == 100.0f);  // clamped to max range
  CHECK(out.high.at(0, 0) == 0.0f);    // zeros stay zero
}

TEST_CASE("augment preserves the value-set property") {
  const ScanPair pair = sample_pair();
  AugmentConfig cfg{0.5, 0.5, 64, 0.9, 1.1, 9};
  for (std::uint64_t k = 0; k < 8; ++k) {
    Rng rng = Rng::keyed(9, {k});
    const ScanPair out = augment_pair(pair, cfg, rng);
    std::size_t in_nonzero = 0, out_nonzero = 0;
    for (float v : pair.high.data)
      if (v != 0.0f) ++in_nonzero;
    for (float v : out.high.data)
      if (v != 0.0f) ++out_nonzero;
    CHECK(in_nonzero == out_nonzero);  // flips/shift permute, scale keeps support
    CHECK(out.low.data == subsample_rows(out.high, 4).data);
  }
}

TEST_CASE("generate_dataset: counts, pairing invariant, determinism") {
  const Scene scene = test_scene();
  const Trajectory traj = line_traj(5);
  AugmentConfig cfg{0.5, 0.5, 32, 0.9, 1.1, 123};

  SUBCASE("no augmentation gives one pair per pose") {
    const auto pairs = generate_dataset(scene, traj, kIntr, 4, cfg, 1, 0.0);
    CHECK(pairs.size() == 5);
    for (const auto& p : pairs) CHECK(p.low.data == subsample_rows(p.high, 4).data);
  }
  SUBCASE("multiplier 8 gives 8x the pose count") {
    const auto pairs = generate_dataset(scene, traj, kIntr, 4, cfg, 8, 0.0);
    CHECK(pairs.size() == 40);
    for (const auto& p : pairs) CHECK(p.low.data == subsample_rows(p.high, 4).data);
  }
  SUBCASE("same seed twice is bit-identical") {
    const auto a = generate_dataset(scene, traj, kIntr, 4, cfg, 4, 3.0);
    const auto b = generate_dataset(scene, traj, kIntr, 4, cfg, 4, 3.0);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].high.data == b[i].high.data);
      CHECK(a[i].low.data == b[i].low.data);
    }
  }
  SUBCASE("different seeds differ") {
    AugmentConfig cfg2 = cfg;
    cfg2.seed = 321;
    const auto a = generate_dataset(scene, traj, kIntr, 4, cfg, 4, 3.0);
    const auto b = generate_dataset(scene, traj, kIntr, 4, cfg2, 4, 3.0);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].high.data != b[i].high.data) any_diff = true;
    CHECK(any_diff);
  }
  SUBCASE("empty trajectory throws") {
    CHECK_THROWS_AS(generate_dataset(scene, Trajectory{}, kIntr, 4, cfg, 1, 0.0), ConfigError);
  }
  SUBCASE("attitude jitter perturbs pitch and roll within bounds") {
    const auto pairs = generate_dataset(scene, traj, kIntr, 4, cfg, 1, 3.0);
    bool any_nonzero = false;
    for (const auto& p : pairs) {
      CHECK(std::abs(p.pose.pitch) <= 3.0 * 3.14159 / 180.0 + 1e-9);
      CHECK(std::abs(p.pose.roll) <= 3.0 * 3.14159 / 180.0 + 1e-9);
      if (p.pose.pitch != 0.0 || p.pose.roll != 0.0) any_nonzero = true;
    }
    CHECK(any_nonzero);
  }
}

TEST_CASE("augment config validation") {
  AugmentConfig bad;
  bad.flip_topdown = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  AugmentConfig bad2;
  bad2.scale_lo = 0.0;
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
  AugmentConfig bad3;
  bad3.scale_lo = 1.2;
  bad3.scale_hi = 1.1;
  CHECK_THROWS_AS(bad3.validate(), ConfigError);
}
