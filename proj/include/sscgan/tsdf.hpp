#pragma once

#include <array>
#include <vector>

#include "sscgan/scenegen.hpp"
#include "sscgan/voxcore.hpp"

namespace sscgan {

struct TsdfOptions {
  double truncation_voxels = 3.0;  // in input-resolution voxel edges
  bool flipped = false;            // sign(v) * (1 - |v|)
};

// Generator input x: one channel at s-times the label resolution.
struct TsdfVolume {
  GridSpec spec;
  double truncation = 0.0;  // meters
  std::vector<float> values;

  std::array<int, 3> dims() const {
    const int s = spec.input_scale;
    return {s * spec.height, s * spec.width, s * spec.depth};
  }
  double voxel_size() const { return spec.voxel_size / spec.input_scale; }
};

// Plain projective TSDF, normalized to [-1, 1]. Voxels that project outside
// the image, behind the camera, or onto a no-return pixel get -1.
TsdfVolume depth_to_tsdf(const DepthImage& depth, const GridSpec& spec, double truncation,
                         bool flipped = false);

inline TsdfVolume depth_to_tsdf(const DepthImage& depth, const GridSpec& spec,
                                const TsdfOptions& options) {
  return depth_to_tsdf(depth, spec,
                       options.truncation_voxels * spec.voxel_size / spec.input_scale,
                       options.flipped);
}

// s^3 block mean of the TSDF at label resolution (H x W x D).
std::vector<float> condition_channel(const TsdfVolume& tsdf, const GridSpec& spec);

}  // namespace sscgan
