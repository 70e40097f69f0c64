#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "sscgan/error.hpp"
#include "sscgan/tsdf.hpp"
#include "support.hpp"

namespace sscgan {
namespace {

// Camera at z = 0.05 looking along +z so voxel (i, j, k) has projective depth
// k * 0.1; every pixel reports a surface at 1.0 m.
DepthImage flat_depth(const GridSpec& g, float d = 1.0f) {
  DepthImage img;
  img.camera.intrinsics = Intrinsics{41, 41, 30.0, 30.0, 20.0, 20.0};
  img.camera.position = Eigen::Vector3d(0.5 * g.height * g.voxel_size, 0.5 * g.width * g.voxel_size, 0.05);
  img.depths.assign(41 * 41, d);
  return img;
}

GridSpec grid(int h, int w, int d) {
  GridSpec g;
  g.height = h;
  g.width = w;
  g.depth = d;
  return g;
}

TEST(Tsdf, SignedDistanceAndTruncation) {
  const GridSpec g = grid(6, 6, 20);
  const TsdfVolume t = depth_to_tsdf(flat_depth(g), g, 0.3);
  auto at = [&](int k) { return t.values[g.index(3, 3, k)]; };
  EXPECT_NEAR(at(10), 0.0f, 1e-6);   // on the surface
  EXPECT_NEAR(at(7), 1.0f, 1e-6);    // tau in front
  EXPECT_NEAR(at(4), 1.0f, 1e-6);    // 2 tau in front, clamped
  EXPECT_NEAR(at(9), 1.0f / 3.0f, 1e-6);
  EXPECT_NEAR(at(11), -1.0f / 3.0f, 1e-6);
  EXPECT_NEAR(at(16), -1.0f, 1e-6);
  EXPECT_EQ(t.truncation, 0.3);
}

TEST(Tsdf, DefaultTruncationIsThreeVoxels) {
  GridSpec g = grid(4, 4, 12);
  g.input_scale = 2;
  const TsdfVolume t = depth_to_tsdf(flat_depth(g), g, TsdfOptions{});
  EXPECT_DOUBLE_EQ(t.truncation, 3 * 0.05);
  EXPECT_EQ(t.dims(), (std::array<int, 3>{8, 8, 24}));
  EXPECT_EQ(t.values.size(), 8u * 8 * 24);
}

TEST(Tsdf, NoReturnAndOutOfViewAreMinusOne) {
  const GridSpec g = grid(6, 6, 20);
  DepthImage d = flat_depth(g, 0.0f);
  const TsdfVolume t = depth_to_tsdf(d, g, 0.3);
  for (float v : t.values) ASSERT_EQ(v, -1.0f);
  const TsdfVolume f = depth_to_tsdf(d, g, 0.3, true);
  for (float v : f.values) ASSERT_EQ(v, 0.0f);
}

TEST(Tsdf, RejectsBadDepth) {
  const GridSpec g = grid(4, 4, 4);
  DepthImage d = flat_depth(g);
  d.depths[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(depth_to_tsdf(d, g, 0.3), ConversionError);
  d.depths[5] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(depth_to_tsdf(d, g, 0.3), ConversionError);
  d.depths[5] = -0.5f;
  EXPECT_THROW(depth_to_tsdf(d, g, 0.3), ConversionError);
  EXPECT_THROW(depth_to_tsdf(flat_depth(g), g, 0.0), ConfigError);
}

// Independent per-voxel projection written against the camera model alone.
float oracle_value(const DepthImage& d, const GridSpec& g, int i, int j, int k, double tau) {
  const Intrinsics& in = d.camera.intrinsics;
  const double px = g.origin[0] + (i + 0.5) * g.voxel_size;
  const double py = g.origin[1] + (j + 0.5) * g.voxel_size;
  const double pz = g.origin[2] + (k + 0.5) * g.voxel_size;
  const Eigen::Matrix3d& r = d.camera.rotation;
  const Eigen::Vector3d& c = d.camera.position;
  double cam[3];
  for (int a = 0; a < 3; ++a) cam[a] = r(0, a) * (px - c[0]) + r(1, a) * (py - c[1]) + r(2, a) * (pz - c[2]);
  if (cam[2] <= 0) return -1.0f;
  const double u = std::floor(in.fx * cam[0] / cam[2] + in.cx + 0.5);
  const double v = std::floor(in.fy * cam[1] / cam[2] + in.cy + 0.5);
  if (u < 0 || v < 0 || u >= in.width || v >= in.height) return -1.0f;
  const double depth = d.depths[static_cast<std::size_t>(v) * in.width + static_cast<std::size_t>(u)];
  if (depth <= 0) return -1.0f;
  double s = depth - cam[2];
  if (s > tau) s = tau;
  if (s < -tau) s = -tau;
  return static_cast<float>(s / tau);
}

TEST(Tsdf, FlatWallSceneMatchesProjectionOracle) {
  GridSpec g = grid(30, 10, 30);
  g.num_classes = 4;
  LabelVolume scene(g);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 10; ++j) scene.set_label(i, j, 25, 2);
  Camera cam;
  cam.intrinsics = Intrinsics{81, 61, 60.0, 60.0, 40.0, 30.0};
  cam.position = Eigen::Vector3d(1.55, 0.55, 0.5);
  const DepthImage d = render_depth(scene, cam);
  const double tau = 0.3;
  const TsdfVolume t = depth_to_tsdf(d, g, tau);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 10; ++j)
      for (int k = 0; k < 30; ++k) ASSERT_NEAR(t.values[g.index(i, j, k)], oracle_value(d, g, i, j, k, tau), 1e-6);
}

TEST(Tsdf, RangeAndFlippedEncodingOnGeneratedScenes) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    SceneConfig c;
    c.seed = seed;
    const SceneSample s = make_sample(c);
    const TsdfVolume plain = depth_to_tsdf(s.depth, c.grid, TsdfOptions{3.0, false});
    const TsdfVolume flipped = depth_to_tsdf(s.depth, c.grid, TsdfOptions{3.0, true});
    for (std::size_t v = 0; v < plain.values.size(); ++v) {
      const float p = plain.values[v];
      ASSERT_GE(p, -1.0f);
      ASSERT_LE(p, 1.0f);
      const float expected = p == -1.0f && flipped.values[v] == 0.0f
                                 ? 0.0f
                                 : static_cast<float>((p > 0 ? 1.0 : (p < 0 ? -1.0 : 0.0)) * (1.0 - std::abs(double(p))));
      ASSERT_NEAR(flipped.values[v], expected, 1e-6);
    }
  }
}

TEST(Tsdf, NonIncreasingAlongCameraRay) {
  const GridSpec g = grid(6, 6, 20);
  const TsdfVolume t = depth_to_tsdf(flat_depth(g), g, 0.3);
  // k = 0 sits on the image plane and is unobserved.
  EXPECT_EQ(t.values[g.index(3, 3, 0)], -1.0f);
  for (int k = 2; k < 20; ++k) ASSERT_LE(t.values[g.index(3, 3, k)], t.values[g.index(3, 3, k - 1)]);
}

TEST(ConditionChannel, IdentityAtUnitScale) {
  Rng rng(2);
  TsdfVolume t;
  t.spec = grid(3, 4, 5);
  t.truncation = 0.3;
  for (int i = 0; i < 60; ++i) t.values.push_back(static_cast<float>(rng.uniform(-1, 1)));
  EXPECT_EQ(condition_channel(t, t.spec), t.values);
}

TEST(ConditionChannel, ConstantStaysConstant) {
  TsdfVolume t;
  t.spec = grid(2, 3, 2);
  t.spec.input_scale = 2;
  t.truncation = 0.3;
  t.values.assign(4 * 6 * 4, 0.375f);
  for (float v : condition_channel(t, t.spec)) EXPECT_EQ(v, 0.375f);
}

TEST(ConditionChannel, BlockMeanOracle) {
  Rng rng(9);
  TsdfVolume t;
  t.spec = grid(3, 2, 4);
  t.spec.input_scale = 2;
  t.truncation = 0.3;
  const int H = 6, W = 4, D = 8;
  for (int i = 0; i < H * W * D; ++i) t.values.push_back(static_cast<float>(rng.uniform(-1, 1)));
  const auto out = condition_channel(t, t.spec);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 4; ++k) {
        double sum = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) sum += t.values[((2 * i + a) * W + (2 * j + b)) * D + (2 * k + c)];
        ASSERT_NEAR(out[(i * 2 + j) * 4 + k], sum / 8.0, 1e-6);
      }
}

TEST(ConditionChannel, RejectsNonMultipleResolution) {
  TsdfVolume t;
  t.spec = grid(3, 3, 3);
  t.spec.input_scale = 2;
  t.values.assign(6 * 6 * 6, 0.0f);
  GridSpec other = grid(4, 3, 3);
  EXPECT_THROW(condition_channel(t, other), ShapeError);
  t.values.pop_back();
  EXPECT_THROW(condition_channel(t, t.spec), ShapeError);
}

}  // namespace
}  // namespace sscgan
