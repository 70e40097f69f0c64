#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "sscgan/rng.hpp"
#include "sscgan/voxcore.hpp"

namespace sscgan::test {

inline GridSpec random_grid(Rng& rng, int max_dim, int min_classes, int max_classes) {
  GridSpec g;
  g.height = 1 + static_cast<int>(rng.uniform_index(max_dim));
  g.width = 1 + static_cast<int>(rng.uniform_index(max_dim));
  g.depth = 1 + static_cast<int>(rng.uniform_index(max_dim));
  g.num_classes = min_classes + static_cast<int>(rng.uniform_index(max_classes - min_classes + 1));
  return g;
}

inline LabelVolume random_labels(Rng& rng, const GridSpec& g, bool with_visibility = true) {
  std::vector<std::uint8_t> labels(g.voxel_count());
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.uniform_index(g.num_classes));
  std::vector<Visibility> vis;
  if (with_visibility) {
    vis.resize(g.voxel_count());
    for (auto& v : vis) v = static_cast<Visibility>(rng.uniform_index(3));
  }
  return LabelVolume(g, std::move(labels), std::move(vis));
}

// Random strictly positive distributions.
inline ProbabilityVolume random_probabilities(Rng& rng, const GridSpec& g) {
  ProbabilityVolume p;
  p.spec = g;
  p.values.resize(g.voxel_count() * g.num_classes);
  for (std::size_t v = 0; v < g.voxel_count(); ++v) {
    double sum = 0.0;
    for (int c = 0; c < g.num_classes; ++c) {
      const double x = 0.05 + rng.uniform01();
      p.values[c * g.voxel_count() + v] = static_cast<float>(x);
      sum += x;
    }
    for (int c = 0; c < g.num_classes; ++c) p.values[c * g.voxel_count() + v] /= static_cast<float>(sum);
  }
  return p;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sscgan_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace sscgan::test
