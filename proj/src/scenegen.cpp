#include "sscgan/scenegen.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "json.hpp"
#include "sscgan/error.hpp"
#include "sscgan/rng.hpp"

namespace sscgan {

using Eigen::Vector3d;

Vector3d Camera::pixel_ray(double u, double v) const {
  const Vector3d dir_cam((u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy, 1.0);
  return rotation * dir_cam;
}

void Camera::validate() const {
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
    throw ConfigError("camera focal lengths must be positive");
  }
  if (intrinsics.width < 1 || intrinsics.height < 1) {
    throw ConfigError("image size must be positive");
  }
}

std::vector<BoxPrior> default_class_priors(int num_classes) {
  // Cycles through four furniture archetypes: low/wide, tall/narrow,
  // table-like, small.
  static const BoxPrior kArchetypes[] = {
      {{0.6, 1.0}, {0.3, 0.5}, {0.6, 1.0}},
      {{0.3, 0.5}, {0.7, 1.2}, {0.3, 0.5}},
      {{0.5, 0.8}, {0.5, 0.7}, {0.4, 0.6}},
      {{0.2, 0.4}, {0.2, 0.4}, {0.2, 0.4}},
  };
  std::vector<BoxPrior> priors;
  for (int c = 4; c < num_classes; ++c) priors.push_back(kArchetypes[(c - 4) % 4]);
  return priors;
}

void SceneConfig::validate() const {
  grid.validate();
  if (grid.num_classes < 4) {
    throw ConfigError("scene generation needs at least 4 classes (empty, floor, wall, ceiling)");
  }
  for (double e : room_extent) {
    if (!(e > 0.0)) throw ConfigError("room extent must be positive");
  }
  if (min_boxes < 0 || max_boxes < min_boxes) {
    throw ConfigError("box count range must be a nonempty interval of nonnegative integers");
  }
  if (max_boxes > 0 && grid.num_classes < 5) {
    throw ConfigError("furniture boxes need at least one class index >= 4");
  }
  if (!class_priors.empty() && static_cast<int>(class_priors.size()) != grid.num_classes - 4) {
    throw ConfigError("class_priors must list one prior per furniture class 4..C-1");
  }
  for (const BoxPrior& p : resolved_priors()) {
    for (const auto& r : {p.size_x, p.size_y, p.size_z}) {
      if (!(r[0] > 0.0) || r[1] < r[0]) throw ConfigError("box size prior must be a positive interval");
    }
  }
  if (!(camera_height[0] > 0.0) || camera_height[1] < camera_height[0]) {
    throw ConfigError("camera height range must be a positive interval");
  }
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  Camera cam;
  cam.intrinsics = intrinsics;
  cam.validate();
}

std::vector<BoxPrior> SceneConfig::resolved_priors() const {
  return class_priors.empty() ? default_class_priors(grid.num_classes) : class_priors;
}

namespace {

int to_voxels(double meters, double voxel_size) {
  return std::max(1, static_cast<int>(std::lround(meters / voxel_size)));
}

bool overlaps(const VoxelBox& a, const VoxelBox& b) {
  for (int ax = 0; ax < 3; ++ax) {
    if (a.hi[ax] <= b.lo[ax] || b.hi[ax] <= a.lo[ax]) return false;
  }
  return true;
}

// Horizontal (x/z) distance in meters from a world point to a box footprint.
double footprint_distance(const VoxelBox& box, const Vector3d& p, const GridSpec& g) {
  double d2 = 0.0;
  for (int ax : {0, 2}) {
    const double lo = g.origin[ax] + box.lo[ax] * g.voxel_size;
    const double hi = g.origin[ax] + box.hi[ax] * g.voxel_size;
    const double d = p[ax] < lo ? lo - p[ax] : (p[ax] > hi ? p[ax] - hi : 0.0);
    d2 += d * d;
  }
  return std::sqrt(d2);
}

Eigen::Matrix3d look_at(const Vector3d& eye, const Vector3d& target) {
  const Vector3d forward = (target - eye).normalized();
  const Vector3d down(0.0, -1.0, 0.0);
  const Vector3d right = down.cross(forward).normalized();
  const Vector3d cam_down = forward.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = cam_down;
  r.col(2) = forward;
  return r;
}

}  // namespace

Scene generate_scene(const SceneConfig& config) {
  config.validate();
  const GridSpec& g = config.grid;
  Rng rng(config.seed);

  const int nx = std::min(g.height, to_voxels(config.room_extent[0], g.voxel_size));
  const int ny = std::min(g.width, to_voxels(config.room_extent[1], g.voxel_size));
  const int nz = std::min(g.depth, to_voxels(config.room_extent[2], g.voxel_size));
  if (nx < 4 || ny < 4 || nz < 4) throw ConfigError("room must span at least 4 voxels per axis");

  Scene scene{LabelVolume(g), Camera{}, {}};
  LabelVolume& labels = scene.labels;
  for (int i = 0; i < nx; ++i) {
    for (int k = 0; k < nz; ++k) {
      labels.set_label(i, 0, k, 1);
      labels.set_label(i, ny - 1, k, 3);
    }
  }
  for (int j = 1; j < ny - 1; ++j) {
    for (int k = 0; k < nz; ++k) labels.set_label(nx - 1, j, k, 2);
    for (int i = 0; i < nx; ++i) labels.set_label(i, j, nz - 1, 2);
  }

  // Camera in the open corner opposite the two walls, looking into the room.
  const double room_x = nx * g.voxel_size;
  const double room_y = ny * g.voxel_size;
  const double room_z = nz * g.voxel_size;
  Vector3d eye(g.origin[0] + rng.uniform(0.15, 0.3) * room_x,
               g.origin[1] + std::min(rng.uniform(config.camera_height[0], config.camera_height[1]),
                                      room_y - 2.0 * g.voxel_size),
               g.origin[2] + rng.uniform(0.15, 0.3) * room_z);
  const Vector3d target(g.origin[0] + rng.uniform(0.6, 0.75) * room_x,
                        g.origin[1] + rng.uniform(0.25, 0.4) * room_y,
                        g.origin[2] + rng.uniform(0.6, 0.75) * room_z);
  scene.camera.intrinsics = config.intrinsics;
  scene.camera.position = eye;
  scene.camera.rotation = look_at(eye, target);

  const auto priors = config.resolved_priors();
  const int box_count =
      config.min_boxes + static_cast<int>(rng.uniform_index(config.max_boxes - config.min_boxes + 1));
  for (int b = 0; b < box_count; ++b) {
    const int cls = 4 + static_cast<int>(rng.uniform_index(priors.size()));
    const BoxPrior& prior = priors[cls - 4];
    bool placed = false;
    for (int attempt = 0; attempt < config.max_attempts && !placed; ++attempt) {
      const int sx = to_voxels(rng.uniform(prior.size_x[0], prior.size_x[1]), g.voxel_size);
      const int sy = to_voxels(rng.uniform(prior.size_y[0], prior.size_y[1]), g.voxel_size);
      const int sz = to_voxels(rng.uniform(prior.size_z[0], prior.size_z[1]), g.voxel_size);
      if (sx > nx - 1 || sy > ny - 2 || sz > nz - 1) continue;
      VoxelBox box;
      box.lo = {static_cast<int>(rng.uniform_index(nx - sx)), 1,
                static_cast<int>(rng.uniform_index(nz - sz))};
      box.hi = {box.lo[0] + sx, 1 + sy, box.lo[2] + sz};
      box.label = cls;
      if (footprint_distance(box, eye, g) < config.camera_clearance) continue;
      if (std::any_of(scene.boxes.begin(), scene.boxes.end(),
                      [&](const VoxelBox& o) { return overlaps(o, box); })) {
        continue;
      }
      scene.boxes.push_back(box);
      placed = true;
    }
    if (!placed) {
      throw GenerationError("could not place box " + std::to_string(b) + " after " +
                            std::to_string(config.max_attempts) + " attempts (seed " +
                            std::to_string(config.seed) + ")");
    }
  }
  for (const VoxelBox& box : scene.boxes) {
    for (int i = box.lo[0]; i < box.hi[0]; ++i)
      for (int j = box.lo[1]; j < box.hi[1]; ++j)
        for (int k = box.lo[2]; k < box.hi[2]; ++k) labels.set_label(i, j, k, static_cast<std::uint8_t>(box.label));
  }
  return scene;
}

DepthImage render_depth(const LabelVolume& scene, const Camera& camera) {
  camera.validate();
  const GridSpec& g = scene.spec();
  const std::array<int, 3> dims = g.dims();
  const auto occupied = [&](const std::array<int, 3>& v) {
    return scene.label(v[0], v[1], v[2]) != 0;
  };
  const auto inside = [&](const std::array<int, 3>& v) {
    for (int a = 0; a < 3; ++a)
      if (v[a] < 0 || v[a] >= dims[a]) return false;
    return true;
  };

  std::array<double, 3> start_grid;
  std::array<int, 3> start_voxel;
  for (int a = 0; a < 3; ++a) {
    start_grid[a] = (camera.position[a] - g.origin[a]) / g.voxel_size;
    start_voxel[a] = static_cast<int>(std::floor(start_grid[a]));
  }
  if (!inside(start_voxel)) throw RenderError("camera lies outside the voxel grid");
  if (occupied(start_voxel)) throw RenderError("camera lies inside an occupied voxel");

  DepthImage image;
  image.camera = camera;
  const Intrinsics& in = camera.intrinsics;
  image.depths.assign(static_cast<std::size_t>(in.width) * in.height, 0.0f);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  for (int v = 0; v < in.height; ++v) {
    for (int u = 0; u < in.width; ++u) {
      const Vector3d dir = camera.pixel_ray(u, v);
      std::array<int, 3> voxel = start_voxel;
      std::array<int, 3> step{};
      std::array<double, 3> t_max{}, t_delta{};
      for (int a = 0; a < 3; ++a) {
        if (dir[a] > 0.0) {
          step[a] = 1;
          t_max[a] = (voxel[a] + 1 - start_grid[a]) * g.voxel_size / dir[a];
          t_delta[a] = g.voxel_size / dir[a];
        } else if (dir[a] < 0.0) {
          step[a] = -1;
          t_max[a] = (start_grid[a] - voxel[a]) * g.voxel_size / -dir[a];
          t_delta[a] = g.voxel_size / -dir[a];
        } else {
          step[a] = 0;
          t_max[a] = kInf;
          t_delta[a] = kInf;
        }
      }
      float depth = 0.0f;
      while (true) {
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        const double t = t_max[axis];
        voxel[axis] += step[axis];
        if (!inside(voxel)) break;
        if (occupied(voxel)) {
          depth = static_cast<float>(t);
          break;
        }
        t_max[axis] += t_delta[axis];
      }
      image.depths[static_cast<std::size_t>(v) * in.width + u] = depth;
    }
  }
  return image;
}

std::vector<Visibility> compute_visibility(const LabelVolume& scene, const DepthImage& depth) {
  const GridSpec& g = scene.spec();
  const Intrinsics& in = depth.camera.intrinsics;
  if (depth.depths.size() != static_cast<std::size_t>(in.width) * in.height) {
    throw ShapeError("depth image size does not match its intrinsics");
  }
  const double slack = 0.5 * g.voxel_size + 1e-9;
  std::vector<Visibility> vis(g.voxel_count(), Visibility::kOutOfView);
  for (int i = 0; i < g.height; ++i) {
    for (int j = 0; j < g.width; ++j) {
      for (int k = 0; k < g.depth; ++k) {
        const Vector3d center(g.origin[0] + (i + 0.5) * g.voxel_size,
                              g.origin[1] + (j + 0.5) * g.voxel_size,
                              g.origin[2] + (k + 0.5) * g.voxel_size);
        const Vector3d pc = depth.camera.world_to_camera(center);
        if (pc.z() <= 0.0) continue;
        const long u = std::lround(in.fx * pc.x() / pc.z() + in.cx);
        const long v = std::lround(in.fy * pc.y() / pc.z() + in.cy);
        if (u < 0 || v < 0 || u >= in.width || v >= in.height) continue;
        const float d = depth.at(static_cast<int>(u), static_cast<int>(v));
        // A pixel with no return saw empty space all the way out of the grid.
        const bool observed = d <= 0.0f || pc.z() <= d + slack;
        vis[g.index(i, j, k)] = observed ? Visibility::kObserved : Visibility::kOccluded;
      }
    }
  }
  return vis;
}

SceneSample make_sample(const SceneConfig& config) {
  Scene scene = generate_scene(config);
  DepthImage depth = render_depth(scene.labels, scene.camera);
  scene.labels.set_visibility(compute_visibility(scene.labels, depth));
  return SceneSample{std::move(scene.labels), std::move(depth), std::move(scene.boxes)};
}

std::uint16_t depth_to_mm(float meters) {
  return static_cast<std::uint16_t>(std::clamp(std::lround(static_cast<double>(meters) * 1000.0), 0L, 65535L));
}

void quantize_depth_mm(DepthImage& depth) {
  for (float& d : depth.depths) d = mm_to_depth(depth_to_mm(d));
}

void write_depth_pgm(const std::filesystem::path& path, const DepthImage& depth) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << depth.width() << " " << depth.height() << "\n65535\n";
  for (float d : depth.depths) {
    const std::uint16_t mm = depth_to_mm(d);
    const char bytes[2] = {static_cast<char>((mm >> 8) & 0xff), static_cast<char>(mm & 0xff)};
    out.write(bytes, 2);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<float> read_depth_pgm(const std::filesystem::path& path, int* width, int* height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w < 1 || h < 1 || maxval != 65535) {
    throw IoError("unsupported depth PGM header in " + path.string());
  }
  in.get();  // single whitespace after maxval
  std::vector<float> depths(static_cast<std::size_t>(w) * h);
  for (float& d : depths) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2)) throw IoError("truncated depth PGM " + path.string());
    d = mm_to_depth(static_cast<std::uint16_t>((b[0] << 8) | b[1]));
  }
  if (width) *width = w;
  if (height) *height = h;
  return depths;
}

void write_camera_json(const std::filesystem::path& path, const Camera& camera) {
  nlohmann::json j;
  const Intrinsics& in = camera.intrinsics;
  j["intrinsics"] = {{"width", in.width}, {"height", in.height}, {"fx", in.fx},
                     {"fy", in.fy},       {"cx", in.cx},         {"cy", in.cy}};
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back({camera.rotation(r, 0), camera.rotation(r, 1), camera.rotation(r, 2),
                    camera.position[r]});
  }
  rows.push_back({0.0, 0.0, 0.0, 1.0});
  j["camera_to_world"] = rows;
  j["units"] = "meters";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

Camera read_camera_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Camera cam;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    const auto& in_j = j.at("intrinsics");
    cam.intrinsics.width = in_j.at("width").get<int>();
    cam.intrinsics.height = in_j.at("height").get<int>();
    cam.intrinsics.fx = in_j.at("fx").get<double>();
    cam.intrinsics.fy = in_j.at("fy").get<double>();
    cam.intrinsics.cx = in_j.at("cx").get<double>();
    cam.intrinsics.cy = in_j.at("cy").get<double>();
    const auto& m = j.at("camera_to_world");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) cam.rotation(r, c) = m.at(r).at(c).get<double>();
      cam.position[r] = m.at(r).at(3).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed camera file " + path.string() + ": " + e.what());
  }
  cam.validate();
  return cam;
}

}  // namespace sscgan
