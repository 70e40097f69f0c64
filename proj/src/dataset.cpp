#include "sscgan/dataset.hpp"

#include <string>

#include "sscgan/config.hpp"
#include "sscgan/error.hpp"

namespace sscgan {
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFormat = "sscgan-manifest";
constexpr int kManifestVersion = 1;

std::string seed_name(const char* prefix, std::uint64_t seed, const char* ext) {
  return std::string(prefix) + "_" + std::to_string(seed) + ext;
}

}  // namespace

DataItem make_item(std::uint64_t seed, LabelVolume labels, const DepthImage& depth, const TsdfOptions& options) {
  labels.validate_labels();
  DataItem item;
  item.seed = seed;
  item.tsdf = depth_to_tsdf(depth, labels.spec(), options);
  item.cond = condition_channel(item.tsdf, labels.spec());
  item.onehot = one_hot_encode(labels);
  item.labels = std::move(labels);
  return item;
}

Manifest read_manifest(const fs::path& path) {
  const Json j = read_json_file(path);
  Manifest m;
  try {
    if (j.at("format").get<std::string>() != kManifestFormat) {
      throw IoError(path.string() + " is not a dataset manifest");
    }
    if (j.at("version").get<int>() != kManifestVersion) {
      throw IoError(path.string() + ": unsupported manifest version");
    }
    m.scene_config = scene_config_from_json(j.at("scene_config"), "scene_config");
    for (const auto& e : j.at("scenes")) {
      ManifestEntry entry;
      entry.seed = e.at("seed").get<std::uint64_t>();
      entry.labels = e.at("labels").get<std::string>();
      entry.depth = e.at("depth").get<std::string>();
      entry.camera = e.at("camera").get<std::string>();
      if (e.contains("tsdf")) entry.tsdf = e.at("tsdf").get<std::string>();
      m.scenes.push_back(std::move(entry));
    }
  } catch (const Json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  Json scenes = Json::array();
  for (const auto& e : manifest.scenes) {
    Json s{{"seed", e.seed}, {"labels", e.labels}, {"depth", e.depth}, {"camera", e.camera}};
    if (!e.tsdf.empty()) s["tsdf"] = e.tsdf;
    scenes.push_back(std::move(s));
  }
  write_json_file(path, Json{{"format", kManifestFormat},
                             {"version", kManifestVersion},
                             {"scene_config", to_json(manifest.scene_config)},
                             {"scenes", scenes}});
}

Dataset load_dataset(const fs::path& manifest_path, const TsdfOptions& options) {
  const Manifest m = read_manifest(manifest_path);
  if (m.scenes.empty()) throw IoError(manifest_path.string() + " lists no scenes");
  const fs::path base = manifest_path.parent_path();
  Dataset data;
  data.grid = m.scene_config.grid;
  for (const auto& e : m.scenes) {
    const LabelVolume raw = read_sscv_labels(base / e.labels);
    if (!raw.spec().same_shape(data.grid)) {
      throw IoError(e.labels + " does not match the manifest grid");
    }
    std::vector<Visibility> vis(raw.visibility().begin(), raw.visibility().end());
    LabelVolume labels(data.grid, std::vector<std::uint8_t>(raw.labels().begin(), raw.labels().end()),
                       std::move(vis));
    DepthImage depth;
    depth.camera = read_camera_json(base / e.camera);
    int w = 0, h = 0;
    depth.depths = read_depth_pgm(base / e.depth, &w, &h);
    if (w != depth.width() || h != depth.height()) {
      throw IoError(e.depth + " size does not match the intrinsics in " + e.camera);
    }
    data.items.push_back(make_item(e.seed, std::move(labels), depth, options));
  }
  return data;
}

Dataset synthesize_dataset(const SceneConfig& config, std::uint64_t first_seed, int count,
                           const TsdfOptions& options) {
  Dataset data;
  data.grid = config.grid;
  for (int n = 0; n < count; ++n) {
    SceneConfig c = config;
    c.seed = first_seed + static_cast<std::uint64_t>(n);
    SceneSample s = make_sample(c);
    // Match the depth precision of the on-disk dataset.
    quantize_depth_mm(s.depth);
    data.items.push_back(make_item(c.seed, std::move(s.labels), s.depth, options));
  }
  return data;
}

Manifest write_dataset(const SceneConfig& config, std::uint64_t first_seed, int count, const fs::path& out_dir,
                       bool write_tsdf, const TsdfOptions& options) {
  fs::create_directories(out_dir);
  Manifest m;
  m.scene_config = config;
  m.scene_config.seed = first_seed;
  for (int n = 0; n < count; ++n) {
    SceneConfig c = config;
    c.seed = first_seed + static_cast<std::uint64_t>(n);
    SceneSample s = make_sample(c);
    ManifestEntry e;
    e.seed = c.seed;
    e.labels = seed_name("scene", c.seed, ".sscv");
    e.depth = seed_name("depth", c.seed, ".pgm");
    e.camera = seed_name("camera", c.seed, ".json");
    write_sscv(out_dir / e.labels, s.labels);
    write_depth_pgm(out_dir / e.depth, s.depth);
    write_camera_json(out_dir / e.camera, s.depth.camera);
    if (write_tsdf) {
      quantize_depth_mm(s.depth);
      const TsdfVolume t = depth_to_tsdf(s.depth, c.grid, options);
      e.tsdf = seed_name("tsdf", c.seed, ".sscv");
      write_sscv(out_dir / e.tsdf, t.values, 1, t.dims());
    }
    m.scenes.push_back(std::move(e));
  }
  write_manifest(out_dir / "manifest.json", m);
  return m;
}

}  // namespace sscgan
