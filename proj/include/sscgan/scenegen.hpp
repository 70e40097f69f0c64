#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sscgan/voxcore.hpp"

namespace sscgan {

// Pinhole intrinsics. Pixel (u, v) has its center at integer coordinates.
struct Intrinsics {
  int width = 80;
  int height = 60;
  double fx = 60.0;
  double fy = 60.0;
  double cx = 39.5;
  double cy = 29.5;
};

// Camera frame: x right, y down, z forward (optical axis).
struct Camera {
  Intrinsics intrinsics;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // camera-to-world
  Eigen::Vector3d position = Eigen::Vector3d::Zero();      // camera center, world

  Eigen::Vector3d world_to_camera(const Eigen::Vector3d& p) const {
    return rotation.transpose() * (p - position);
  }
  // Unnormalized world direction of the ray through pixel (u, v); its
  // camera-frame z component is 1, so the ray parameter equals z-depth.
  Eigen::Vector3d pixel_ray(double u, double v) const;
  void validate() const;
};

// Stores projective (z) depth in meters; 0 means no return.
struct DepthImage {
  Camera camera;
  std::vector<float> depths;  // row-major, height x width

  int width() const { return camera.intrinsics.width; }
  int height() const { return camera.intrinsics.height; }
  float at(int u, int v) const { return depths[static_cast<std::size_t>(v) * width() + u]; }
};

struct BoxPrior {
  std::array<double, 2> size_x{0.3, 0.6};
  std::array<double, 2> size_y{0.3, 0.6};
  std::array<double, 2> size_z{0.3, 0.6};
};

struct SceneConfig {
  GridSpec grid;
  std::array<double, 3> room_extent{2.4, 2.4, 2.4};
  int min_boxes = 2;
  int max_boxes = 4;
  // Priors for furniture classes 4..C-1, in class order. Empty means defaults.
  std::vector<BoxPrior> class_priors;
  std::array<double, 2> camera_height{1.0, 1.5};
  double camera_clearance = 0.3;  // minimum horizontal gap between camera and any box
  Intrinsics intrinsics;
  int max_attempts = 200;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<BoxPrior> resolved_priors() const;
};

std::vector<BoxPrior> default_class_priors(int num_classes);

struct VoxelBox {
  std::array<int, 3> lo;  // inclusive
  std::array<int, 3> hi;  // exclusive
  int label;
};

struct Scene {
  LabelVolume labels;  // visibility absent until compute_visibility is applied
  Camera camera;
  std::vector<VoxelBox> boxes;
};

// Floor (class 1), two far walls (class 2), ceiling (class 3), and
// non-overlapping furniture boxes (classes 4..C-1) standing on the floor.
Scene generate_scene(const SceneConfig& config);

// Exact voxel traversal along each pixel ray.
DepthImage render_depth(const LabelVolume& scene, const Camera& camera);

std::vector<Visibility> compute_visibility(const LabelVolume& scene, const DepthImage& depth);

// Fully rendered sample: labels carry the visibility mask.
struct SceneSample {
  LabelVolume labels;
  DepthImage depth;
  std::vector<VoxelBox> boxes;
};

SceneSample make_sample(const SceneConfig& config);

// Millimeter code stored in the PGM for a depth in meters, and back.
std::uint16_t depth_to_mm(float meters);
inline float mm_to_depth(std::uint16_t mm) { return static_cast<float>(mm / 1000.0); }
// Rounds every depth to what a PGM write/read cycle returns.
void quantize_depth_mm(DepthImage& depth);

// 16-bit binary PGM (P5), depth in millimeters.
void write_depth_pgm(const std::filesystem::path& path, const DepthImage& depth);
// Reads depths into `camera`-less image; caller attaches the camera.
std::vector<float> read_depth_pgm(const std::filesystem::path& path, int* width, int* height);

void write_camera_json(const std::filesystem::path& path, const Camera& camera);
Camera read_camera_json(const std::filesystem::path& path);

}  // namespace sscgan
