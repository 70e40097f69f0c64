#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace sscgan {

// Array axis 0 maps to world x, axis 1 to world y (up), axis 2 to world z.
// Storage is row-major over (axis0, axis1, axis2).
struct GridSpec {
  int height = 24;
  int width = 24;
  int depth = 24;
  int num_classes = 6;  // class 0 is "empty"
  double voxel_size = 0.1;
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  int input_scale = 1;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(height) * width * depth;
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * width + j) * depth + k;
  }
  std::array<int, 3> dims() const { return {height, width, depth}; }

  // Throws ConfigError on violated invariants.
  void validate() const;
  // Additionally requires every dimension to be divisible by 12.
  void validate_divisible_by_12() const;

  bool same_shape(const GridSpec& other) const {
    return height == other.height && width == other.width &&
           depth == other.depth && num_classes == other.num_classes;
  }
};

enum class Visibility : std::uint8_t {
  kObserved = 0,
  kOccluded = 1,
  kOutOfView = 2,
};

// Per-voxel class labels plus an optional visibility mask. Labels are stored
// raw; range validity is checked by the consumers that need it.
class LabelVolume {
 public:
  LabelVolume() = default;
  explicit LabelVolume(const GridSpec& spec);
  LabelVolume(const GridSpec& spec, std::vector<std::uint8_t> labels,
              std::vector<Visibility> visibility = {});

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return labels_.size(); }

  std::uint8_t label(int i, int j, int k) const { return labels_[spec_.index(i, j, k)]; }
  void set_label(int i, int j, int k, std::uint8_t c) { labels_[spec_.index(i, j, k)] = c; }

  std::span<const std::uint8_t> labels() const { return labels_; }
  std::span<std::uint8_t> labels() { return labels_; }

  bool has_visibility() const { return !visibility_.empty(); }
  std::span<const Visibility> visibility() const { return visibility_; }
  void set_visibility(std::vector<Visibility> visibility);
  void clear_visibility() { visibility_.clear(); }

  // Throws EncodingError naming the first label outside [0, C-1].
  void validate_labels() const;

  bool operator==(const LabelVolume& other) const {
    return spec_.same_shape(other.spec_) && labels_ == other.labels_ &&
           visibility_ == other.visibility_;
  }

 private:
  GridSpec spec_;
  std::vector<std::uint8_t> labels_;
  std::vector<Visibility> visibility_;
};

// C x H x W x D class-major float volume.
struct ClassVolume {
  GridSpec spec;
  std::vector<float> values;

  std::size_t offset(int c, int i, int j, int k) const {
    return static_cast<std::size_t>(c) * spec.voxel_count() + spec.index(i, j, k);
  }
  float at(int c, int i, int j, int k) const { return values[offset(c, i, j, k)]; }
};

// Entries exactly 0 or 1 when produced by one_hot_encode.
struct OneHotVolume : ClassVolume {};
// Per-voxel distributions; class-axis sums within 1e-5 of 1.
struct ProbabilityVolume : ClassVolume {};

OneHotVolume one_hot_encode(const LabelVolume& labels);

// Smallest class index wins ties. When `visibility` is absent the result is
// marked all-OCCLUDED.
LabelVolume argmax_decode(const ProbabilityVolume& prob,
                          std::optional<std::span<const Visibility>> visibility = std::nullopt);

// 1 where the label is non-empty (class != 0).
std::vector<std::uint8_t> occupancy_of(const LabelVolume& labels);

// --- SSCV container -------------------------------------------------------

enum class SscvDtype : std::uint16_t { kU8Labels = 0, kF32 = 1 };

struct SscvHeader {
  std::uint16_t version = 1;
  SscvDtype dtype = SscvDtype::kU8Labels;
  std::uint32_t channels = 0;  // C: class count for labels, channel count for f32
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t depth = 0;
  bool has_visibility = false;
};

inline constexpr std::size_t kSscvHeaderBytes = 25;

std::vector<std::uint8_t> encode_sscv(const LabelVolume& labels);
// `values` is channels x H x W x D.
std::vector<std::uint8_t> encode_sscv(std::span<const float> values, std::uint32_t channels,
                                      const std::array<int, 3>& dims);

SscvHeader decode_sscv_header(std::span<const std::uint8_t> bytes);
// Geometry fields of the returned spec other than dims/classes take defaults.
LabelVolume decode_sscv_labels(std::span<const std::uint8_t> bytes);
std::vector<float> decode_sscv_f32(std::span<const std::uint8_t> bytes, SscvHeader* header = nullptr);

void write_sscv(const std::filesystem::path& path, const LabelVolume& labels);
void write_sscv(const std::filesystem::path& path, std::span<const float> values,
                std::uint32_t channels, const std::array<int, 3>& dims);
LabelVolume read_sscv_labels(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace sscgan
