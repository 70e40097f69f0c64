#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sscgan/scenegen.hpp"
#include "sscgan/tsdf.hpp"
#include "sscgan/voxcore.hpp"

namespace sscgan {

// One training/evaluation example with its derived encodings cached.
struct DataItem {
  std::uint64_t seed = 0;
  LabelVolume labels;  // carries visibility
  TsdfVolume tsdf;
  OneHotVolume onehot;
  std::vector<float> cond;  // conditioning channel at label resolution
};

struct Dataset {
  GridSpec grid;
  std::vector<DataItem> items;
};

DataItem make_item(std::uint64_t seed, LabelVolume labels, const DepthImage& depth, const TsdfOptions& tsdf);

struct ManifestEntry {
  std::uint64_t seed = 0;
  std::string labels;  // paths relative to the manifest directory
  std::string depth;
  std::string camera;
  std::string tsdf;    // optional
};

struct Manifest {
  SceneConfig scene_config;  // seed field is the first scene's seed
  std::vector<ManifestEntry> scenes;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Reads every scene listed in the manifest and recomputes its TSDF from the
// depth image and camera. Throws before returning anything on a bad file.
Dataset load_dataset(const std::filesystem::path& manifest_path, const TsdfOptions& tsdf);

// In-memory synthetic dataset for seeds first_seed .. first_seed+count-1.
Dataset synthesize_dataset(const SceneConfig& config, std::uint64_t first_seed, int count,
                           const TsdfOptions& tsdf);

// Writes scene_<seed>.sscv, depth_<seed>.pgm, camera_<seed>.json (and
// tsdf_<seed>.sscv when requested) plus manifest.json into `out_dir`.
Manifest write_dataset(const SceneConfig& config, std::uint64_t first_seed, int count,
                       const std::filesystem::path& out_dir, bool write_tsdf, const TsdfOptions& tsdf);

}  // namespace sscgan
