#include "sscgan/tsdf.hpp"

#include <algorithm>
#include <cmath>

#include "sscgan/error.hpp"

namespace sscgan {

TsdfVolume depth_to_tsdf(const DepthImage& depth, const GridSpec& spec, double truncation,
                         bool flipped) {
  spec.validate();
  if (!(truncation > 0.0)) throw ConfigError("TSDF truncation must be positive");
  const Intrinsics& in = depth.camera.intrinsics;
  if (depth.depths.size() != static_cast<std::size_t>(in.width) * in.height) {
    throw ShapeError("depth image size does not match its intrinsics");
  }
  for (float d : depth.depths) {
    if (!std::isfinite(d)) throw ConversionError("depth image contains a non-finite value");
    if (d < 0.0f) throw ConversionError("depth image contains a negative value");
  }

  TsdfVolume out;
  out.spec = spec;
  out.truncation = truncation;
  const auto dims = out.dims();
  const double vs = out.voxel_size();
  // Unobserved voxels hold -1, which the flipped encoding maps to 0.
  const float sentinel = flipped ? 0.0f : -1.0f;
  out.values.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], sentinel);

  std::size_t idx = 0;
  for (int i = 0; i < dims[0]; ++i) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int k = 0; k < dims[2]; ++k, ++idx) {
        const Eigen::Vector3d center(spec.origin[0] + (i + 0.5) * vs, spec.origin[1] + (j + 0.5) * vs,
                                     spec.origin[2] + (k + 0.5) * vs);
        const Eigen::Vector3d pc = depth.camera.world_to_camera(center);
        if (pc.z() <= 0.0) continue;
        const long u = std::lround(in.fx * pc.x() / pc.z() + in.cx);
        const long v = std::lround(in.fy * pc.y() / pc.z() + in.cy);
        if (u < 0 || v < 0 || u >= in.width || v >= in.height) continue;
        const double d = depth.at(static_cast<int>(u), static_cast<int>(v));
        if (d <= 0.0) continue;
        double value = std::clamp(d - pc.z(), -truncation, truncation) / truncation;
        if (flipped) value = (value > 0.0 ? 1.0 : (value < 0.0 ? -1.0 : 0.0)) * (1.0 - std::abs(value));
        out.values[idx] = static_cast<float>(value);
      }
    }
  }
  return out;
}

std::vector<float> condition_channel(const TsdfVolume& tsdf, const GridSpec& spec) {
  const int s = tsdf.spec.input_scale;
  const auto dims = tsdf.dims();
  if (tsdf.values.size() != static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]) {
    throw ShapeError("TSDF value count does not match its grid");
  }
  if (dims[0] != s * spec.height || dims[1] != s * spec.width || dims[2] != s * spec.depth) {
    throw ShapeError("TSDF resolution is not an integer multiple of the label grid");
  }
  std::vector<float> out(spec.voxel_count(), 0.0f);
  if (s == 1) {
    std::copy(tsdf.values.begin(), tsdf.values.end(), out.begin());
    return out;
  }
  const double inv = 1.0 / (static_cast<double>(s) * s * s);
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      for (int k = 0; k < spec.depth; ++k) {
        double sum = 0.0;
        for (int a = 0; a < s; ++a)
          for (int b = 0; b < s; ++b)
            for (int c = 0; c < s; ++c) {
              const std::size_t src =
                  (static_cast<std::size_t>(s * i + a) * dims[1] + (s * j + b)) * dims[2] + (s * k + c);
              sum += tsdf.values[src];
            }
        out[spec.index(i, j, k)] = static_cast<float>(sum * inv);
      }
    }
  }
  return out;
}

}  // namespace sscgan
