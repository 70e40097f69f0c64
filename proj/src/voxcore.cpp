#include "sscgan/voxcore.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "sscgan/error.hpp"

namespace sscgan {

void GridSpec::validate() const {
  if (height < 1 || width < 1 || depth < 1) {
    throw ConfigError("grid dimensions must be >= 1");
  }
  if (num_classes < 2 || num_classes > 256) {
    throw ConfigError("num_classes must be in [2, 256], got " + std::to_string(num_classes));
  }
  if (!(voxel_size > 0.0)) {
    throw ConfigError("voxel_size must be positive");
  }
  if (input_scale < 1) {
    throw ConfigError("input_scale must be >= 1");
  }
}

void GridSpec::validate_divisible_by_12() const {
  validate();
  if (height % 12 != 0 || width % 12 != 0 || depth % 12 != 0) {
    std::ostringstream os;
    os << "grid " << height << "x" << width << "x" << depth
       << " is not divisible by 12 on every axis; the global and local discriminators "
          "reduce by 12. Use a grid whose dimensions are multiples of 12";
    throw ConfigError(os.str());
  }
}

LabelVolume::LabelVolume(const GridSpec& spec)
    : spec_(spec), labels_(spec.voxel_count(), 0) {}

LabelVolume::LabelVolume(const GridSpec& spec, std::vector<std::uint8_t> labels,
                         std::vector<Visibility> visibility)
    : spec_(spec), labels_(std::move(labels)) {
  if (labels_.size() != spec_.voxel_count()) {
    throw ShapeError("label array size does not match grid");
  }
  set_visibility(std::move(visibility));
}

void LabelVolume::set_visibility(std::vector<Visibility> visibility) {
  if (!visibility.empty() && visibility.size() != labels_.size()) {
    throw ShapeError("visibility mask size does not match label grid");
  }
  visibility_ = std::move(visibility);
}

void LabelVolume::validate_labels() const {
  for (std::size_t v = 0; v < labels_.size(); ++v) {
    if (labels_[v] >= spec_.num_classes) {
      const int k = static_cast<int>(v % spec_.depth);
      const int j = static_cast<int>((v / spec_.depth) % spec_.width);
      const int i = static_cast<int>(v / (static_cast<std::size_t>(spec_.depth) * spec_.width));
      std::ostringstream os;
      os << "label " << int(labels_[v]) << " at voxel (" << i << ", " << j << ", " << k
         << ") is outside [0, " << spec_.num_classes - 1 << "]";
      throw EncodingError(os.str());
    }
  }
}

OneHotVolume one_hot_encode(const LabelVolume& labels) {
  labels.validate_labels();
  OneHotVolume out;
  out.spec = labels.spec();
  const std::size_t n = labels.size();
  out.values.assign(n * static_cast<std::size_t>(out.spec.num_classes), 0.0f);
  const auto raw = labels.labels();
  for (std::size_t v = 0; v < n; ++v) {
    out.values[raw[v] * n + v] = 1.0f;
  }
  return out;
}

LabelVolume argmax_decode(const ProbabilityVolume& prob,
                          std::optional<std::span<const Visibility>> visibility) {
  const std::size_t n = prob.spec.voxel_count();
  const int classes = prob.spec.num_classes;
  if (prob.values.size() != n * static_cast<std::size_t>(classes)) {
    throw ShapeError("probability volume size does not match its grid");
  }
  std::vector<std::uint8_t> labels(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    float best = prob.values[v];
    if (std::isnan(best)) throw DecodeError("NaN in probability volume");
    int arg = 0;
    for (int c = 1; c < classes; ++c) {
      const float p = prob.values[c * n + v];
      if (std::isnan(p)) throw DecodeError("NaN in probability volume");
      if (p > best) {
        best = p;
        arg = c;
      }
    }
    labels[v] = static_cast<std::uint8_t>(arg);
  }
  std::vector<Visibility> vis;
  if (visibility) {
    vis.assign(visibility->begin(), visibility->end());
  } else {
    vis.assign(n, Visibility::kOccluded);
  }
  return LabelVolume(prob.spec, std::move(labels), std::move(vis));
}

std::vector<std::uint8_t> occupancy_of(const LabelVolume& labels) {
  std::vector<std::uint8_t> mask(labels.size());
  const auto raw = labels.labels();
  for (std::size_t v = 0; v < mask.size(); ++v) mask[v] = raw[v] != 0 ? 1 : 0;
  return mask;
}

// --- SSCV ----------------------------------------------------------------

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xff));
}

std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | in[at + b];
  return v;
}

void put_header(std::vector<std::uint8_t>& out, const SscvHeader& h) {
  out.insert(out.end(), {'S', 'S', 'C', 'V'});
  put_u16(out, h.version);
  put_u16(out, static_cast<std::uint16_t>(h.dtype));
  put_u32(out, h.channels);
  put_u32(out, h.height);
  put_u32(out, h.width);
  put_u32(out, h.depth);
  out.push_back(h.has_visibility ? 1 : 0);
}

}  // namespace

std::vector<std::uint8_t> encode_sscv(const LabelVolume& labels) {
  const GridSpec& s = labels.spec();
  SscvHeader h;
  h.dtype = SscvDtype::kU8Labels;
  h.channels = static_cast<std::uint32_t>(s.num_classes);
  h.height = static_cast<std::uint32_t>(s.height);
  h.width = static_cast<std::uint32_t>(s.width);
  h.depth = static_cast<std::uint32_t>(s.depth);
  h.has_visibility = labels.has_visibility();
  std::vector<std::uint8_t> out;
  out.reserve(kSscvHeaderBytes + labels.size() * (h.has_visibility ? 2 : 1));
  put_header(out, h);
  out.insert(out.end(), labels.labels().begin(), labels.labels().end());
  if (h.has_visibility) {
    for (Visibility v : labels.visibility()) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

std::vector<std::uint8_t> encode_sscv(std::span<const float> values, std::uint32_t channels,
                                      const std::array<int, 3>& dims) {
  const std::size_t n = static_cast<std::size_t>(channels) * dims[0] * dims[1] * dims[2];
  if (values.size() != n) throw ShapeError("f32 volume size does not match header dims");
  SscvHeader h;
  h.dtype = SscvDtype::kF32;
  h.channels = channels;
  h.height = static_cast<std::uint32_t>(dims[0]);
  h.width = static_cast<std::uint32_t>(dims[1]);
  h.depth = static_cast<std::uint32_t>(dims[2]);
  std::vector<std::uint8_t> out;
  out.reserve(kSscvHeaderBytes + 4 * n);
  put_header(out, h);
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

SscvHeader decode_sscv_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kSscvHeaderBytes || std::memcmp(bytes.data(), "SSCV", 4) != 0) {
    throw IoError("not an SSCV container (bad magic or truncated header)");
  }
  SscvHeader h;
  h.version = get_u16(bytes, 4);
  if (h.version != 1) throw IoError("unsupported SSCV version " + std::to_string(h.version));
  const std::uint16_t dtype = get_u16(bytes, 6);
  if (dtype > 1) throw IoError("unknown SSCV dtype code " + std::to_string(dtype));
  h.dtype = static_cast<SscvDtype>(dtype);
  h.channels = get_u32(bytes, 8);
  h.height = get_u32(bytes, 12);
  h.width = get_u32(bytes, 16);
  h.depth = get_u32(bytes, 20);
  h.has_visibility = bytes[24] != 0;
  return h;
}

LabelVolume decode_sscv_labels(std::span<const std::uint8_t> bytes) {
  const SscvHeader h = decode_sscv_header(bytes);
  if (h.dtype != SscvDtype::kU8Labels) throw IoError("SSCV payload is not u8 labels");
  GridSpec spec;
  spec.height = static_cast<int>(h.height);
  spec.width = static_cast<int>(h.width);
  spec.depth = static_cast<int>(h.depth);
  spec.num_classes = static_cast<int>(h.channels);
  spec.validate();
  const std::size_t n = spec.voxel_count();
  const std::size_t need = kSscvHeaderBytes + n * (h.has_visibility ? 2 : 1);
  if (bytes.size() != need) throw IoError("SSCV payload size mismatch");
  std::vector<std::uint8_t> labels(bytes.begin() + kSscvHeaderBytes,
                                   bytes.begin() + kSscvHeaderBytes + n);
  std::vector<Visibility> vis;
  if (h.has_visibility) {
    vis.reserve(n);
    for (std::size_t v = 0; v < n; ++v) {
      const std::uint8_t code = bytes[kSscvHeaderBytes + n + v];
      if (code > 2) throw IoError("invalid visibility code in SSCV payload");
      vis.push_back(static_cast<Visibility>(code));
    }
  }
  return LabelVolume(spec, std::move(labels), std::move(vis));
}

std::vector<float> decode_sscv_f32(std::span<const std::uint8_t> bytes, SscvHeader* header) {
  const SscvHeader h = decode_sscv_header(bytes);
  if (h.dtype != SscvDtype::kF32) throw IoError("SSCV payload is not f32");
  const std::size_t n = static_cast<std::size_t>(h.channels) * h.height * h.width * h.depth;
  if (bytes.size() != kSscvHeaderBytes + 4 * n) throw IoError("SSCV payload size mismatch");
  std::vector<float> out(n);
  for (std::size_t v = 0; v < n; ++v) {
    const std::uint32_t bits = get_u32(bytes, kSscvHeaderBytes + 4 * v);
    std::memcpy(&out[v], &bits, 4);
  }
  if (header) *header = h;
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_sscv(const std::filesystem::path& path, const LabelVolume& labels) {
  write_file_bytes(path, encode_sscv(labels));
}

void write_sscv(const std::filesystem::path& path, std::span<const float> values,
                std::uint32_t channels, const std::array<int, 3>& dims) {
  write_file_bytes(path, encode_sscv(values, channels, dims));
}

LabelVolume read_sscv_labels(const std::filesystem::path& path) {
  return decode_sscv_labels(read_file_bytes(path));
}

}  // namespace sscgan
