#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "sscgan/error.hpp"
#include "sscgan/scenegen.hpp"
#include "support.hpp"

namespace sscgan {
namespace {

// 30 x 10 x 30 grid of 0.1 m voxels with a two-voxel-thick wall at z in
// [2.5, 2.7) m, and a camera at (0.55, 0.55, 0.5) looking along +z.
struct WallFixture {
  LabelVolume scene;
  Camera camera;

  WallFixture() {
    GridSpec g;
    g.height = 30;
    g.width = 10;
    g.depth = 30;
    g.num_classes = 4;
    scene = LabelVolume(g);
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 10; ++j)
        for (int k = 25; k < 27; ++k) scene.set_label(i, j, k, 2);
    camera.intrinsics = Intrinsics{81, 61, 60.0, 60.0, 40.0, 30.0};
    camera.position = Eigen::Vector3d(0.55, 0.55, 0.5);
  }
};

TEST(Scenegen, StructureWithoutFurniture) {
  SceneConfig c;
  c.min_boxes = 0;
  c.max_boxes = 0;
  const Scene s = generate_scene(c);
  EXPECT_TRUE(s.boxes.empty());
  std::set<int> classes(s.labels.labels().begin(), s.labels.labels().end());
  EXPECT_EQ(classes, (std::set<int>{0, 1, 2, 3}));
  EXPECT_EQ(s.labels.label(5, 0, 5), 1);   // floor
  EXPECT_EQ(s.labels.label(5, 23, 5), 3);  // ceiling
  EXPECT_EQ(s.labels.label(23, 10, 5), 2);
  EXPECT_EQ(s.labels.label(5, 10, 23), 2);
  EXPECT_EQ(s.labels.label(5, 10, 5), 0);
}

TEST(Scenegen, DeterministicInSeed) {
  SceneConfig c;
  c.seed = 42;
  const SceneSample a = make_sample(c);
  const SceneSample b = make_sample(c);
  EXPECT_EQ(encode_sscv(a.labels), encode_sscv(b.labels));
  EXPECT_EQ(a.depth.depths, b.depth.depths);
  c.seed = 43;
  EXPECT_NE(encode_sscv(make_sample(c).labels), encode_sscv(a.labels));
}

TEST(Scenegen, BoxesAreDisjointAndOnTheFloor) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SceneConfig c;
    c.seed = seed;
    const Scene s = generate_scene(c);
    ASSERT_GE(static_cast<int>(s.boxes.size()), c.min_boxes);
    ASSERT_LE(static_cast<int>(s.boxes.size()), c.max_boxes);
    for (std::size_t a = 0; a < s.boxes.size(); ++a) {
      EXPECT_EQ(s.boxes[a].lo[1], 1);
      EXPECT_GE(s.boxes[a].label, 4);
      for (std::size_t b = a + 1; b < s.boxes.size(); ++b) {
        bool apart = false;
        for (int ax = 0; ax < 3; ++ax) {
          apart = apart || s.boxes[a].hi[ax] <= s.boxes[b].lo[ax] || s.boxes[b].hi[ax] <= s.boxes[a].lo[ax];
        }
        EXPECT_TRUE(apart) << "seed " << seed;
      }
    }
  }
}

TEST(Scenegen, HundredSeedsCoverEveryClass) {
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SceneConfig c;
    c.seed = seed;
    const Scene s = generate_scene(c);
    seen.insert(s.labels.labels().begin(), s.labels.labels().end());
  }
  for (int cls = 1; cls < 6; ++cls) EXPECT_TRUE(seen.count(cls)) << "class " << cls;
}

TEST(Scenegen, PlacementFailureNamesSeed) {
  SceneConfig c;
  c.seed = 977;
  c.min_boxes = 4;
  c.max_boxes = 4;
  c.max_attempts = 1;
  c.class_priors = {BoxPrior{{2.0, 2.0}, {0.5, 0.5}, {2.0, 2.0}}, BoxPrior{{2.0, 2.0}, {0.5, 0.5}, {2.0, 2.0}}};
  try {
    generate_scene(c);
    FAIL() << "expected GenerationError";
  } catch (const GenerationError& e) {
    EXPECT_NE(std::string(e.what()).find("977"), std::string::npos);
  }
}

TEST(Scenegen, InvalidConfigsAreRejected) {
  SceneConfig c;
  c.min_boxes = 3;
  c.max_boxes = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SceneConfig{};
  c.grid.num_classes = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SceneConfig{};
  c.room_extent[1] = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RenderDepth, AxisAlignedWallAtTwoMeters) {
  WallFixture f;
  const DepthImage d = render_depth(f.scene, f.camera);
  // Central pixel looks straight down the optical axis.
  EXPECT_NEAR(d.at(40, 30), 2.0, 0.05);
  EXPECT_NEAR(d.at(40, 30), 2.0, 1e-5);
  EXPECT_NEAR(d.at(70, 30), 2.0, 1e-5);  // off-axis, same plane: z-depth unchanged
}

TEST(RenderDepth, EmptyGridGivesNoReturns) {
  WallFixture f;
  const LabelVolume empty(f.scene.spec());
  const DepthImage d = render_depth(empty, f.camera);
  for (float v : d.depths) ASSERT_EQ(v, 0.0f);
}

TEST(RenderDepth, RejectsInvalidCameraPlacement) {
  WallFixture f;
  Camera inside_wall = f.camera;
  inside_wall.position = Eigen::Vector3d(0.55, 0.55, 2.55);
  EXPECT_THROW(render_depth(f.scene, inside_wall), RenderError);
  Camera outside = f.camera;
  outside.position = Eigen::Vector3d(-1.0, 0.5, 0.5);
  EXPECT_THROW(render_depth(f.scene, outside), RenderError);
}

TEST(RenderDepth, IsIdempotent) {
  SceneConfig c;
  c.seed = 8;
  const Scene s = generate_scene(c);
  EXPECT_EQ(render_depth(s.labels, s.camera).depths, render_depth(s.labels, s.camera).depths);
}

TEST(RenderDepth, RayDistanceBoundedByNearestOccupiedVoxel) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneConfig c;
    c.seed = seed;
    const Scene s = generate_scene(c);
    const GridSpec& g = s.labels.spec();
    double nearest = 1e9;
    for (int i = 0; i < g.height; ++i)
      for (int j = 0; j < g.width; ++j)
        for (int k = 0; k < g.depth; ++k) {
          if (s.labels.label(i, j, k) == 0) continue;
          const Eigen::Vector3d center((i + 0.5) * g.voxel_size, (j + 0.5) * g.voxel_size, (k + 0.5) * g.voxel_size);
          nearest = std::min(nearest, (center - s.camera.position).norm());
        }
    const double diagonal = std::sqrt(3.0) * g.voxel_size;
    const DepthImage d = render_depth(s.labels, s.camera);
    for (int v = 0; v < d.height(); ++v)
      for (int u = 0; u < d.width(); ++u) {
        if (d.at(u, v) == 0.0f) continue;
        const double along_ray = d.at(u, v) * s.camera.pixel_ray(u, v).norm();
        ASSERT_GE(along_ray, nearest - diagonal - 1e-6);
      }
  }
}

TEST(Visibility, SurfaceIsObservedAndBehindIsOccluded) {
  WallFixture f;
  const DepthImage d = render_depth(f.scene, f.camera);
  const auto vis = compute_visibility(f.scene, d);
  const GridSpec& g = f.scene.spec();
  EXPECT_EQ(vis[g.index(5, 5, 25)], Visibility::kObserved);
  EXPECT_EQ(vis[g.index(5, 5, 26)], Visibility::kOccluded);
  EXPECT_EQ(vis[g.index(5, 5, 10)], Visibility::kObserved);
  EXPECT_EQ(vis[g.index(5, 5, 2)], Visibility::kOutOfView);  // behind the camera
}

TEST(Visibility, StatesPartitionTheGrid) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneConfig c;
    c.seed = seed;
    const SceneSample s = make_sample(c);
    std::size_t counts[3] = {0, 0, 0};
    for (auto v : s.labels.visibility()) {
      ASSERT_LE(static_cast<int>(v), 2);
      ++counts[static_cast<int>(v)];
    }
    EXPECT_EQ(counts[0] + counts[1] + counts[2], s.labels.spec().voxel_count());
    EXPECT_GT(counts[1], 0u);
  }
}

TEST(Visibility, ShapeMismatchIsRejected) {
  WallFixture f;
  DepthImage d = render_depth(f.scene, f.camera);
  d.depths.pop_back();
  EXPECT_THROW(compute_visibility(f.scene, d), ShapeError);
}

TEST(DepthFiles, PgmAndCameraRoundTrip) {
  test::TempDir dir;
  SceneConfig c;
  c.seed = 4;
  const SceneSample s = make_sample(c);
  write_depth_pgm(dir / "d.pgm", s.depth);
  int w = 0, h = 0;
  const auto depths = read_depth_pgm(dir / "d.pgm", &w, &h);
  EXPECT_EQ(w, s.depth.width());
  EXPECT_EQ(h, s.depth.height());
  DepthImage q = s.depth;
  quantize_depth_mm(q);
  EXPECT_EQ(depths, q.depths);
  for (std::size_t i = 0; i < depths.size(); ++i) ASSERT_NEAR(depths[i], s.depth.depths[i], 0.0005 + 1e-6);

  write_camera_json(dir / "c.json", s.depth.camera);
  const Camera cam = read_camera_json(dir / "c.json");
  EXPECT_EQ(cam.rotation, s.depth.camera.rotation);
  EXPECT_EQ(cam.position, s.depth.camera.position);
  EXPECT_EQ(cam.intrinsics.fx, s.depth.camera.intrinsics.fx);
}

}  // namespace
}  // namespace sscgan
