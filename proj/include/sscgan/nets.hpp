#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sscgan/ops.hpp"
#include "sscgan/tsdf.hpp"
#include "sscgan/voxcore.hpp"

namespace sscgan::nn {

enum class NetKind { kGenerator, kDiscGlobal, kDiscLocal };
enum class Normalization { kBatch, kInstance, kNone };

// Generator widths: {trunk, head}. Discriminator widths: the four conv block
// widths; the blocks use kernels (3,3,3,1) and strides (2,2,3,1), so the
// spatial reduction is 12.
struct NetSpec {
  NetKind kind = NetKind::kGenerator;
  bool conditional = false;
  std::vector<int> widths;
  Normalization norm = Normalization::kNone;
  double leaky_slope = 0.2;
  GridSpec grid;
  std::vector<int> fc_widths{256, 128};  // global discriminator hidden layers
  bool local_single_channel = false;

  void validate() const;

  static NetSpec generator(const GridSpec& grid);
  static NetSpec discriminator(NetKind kind, const GridSpec& grid, bool conditional);
};

inline constexpr int kDiscBlocks = 4;
inline constexpr int kDiscKernels[kDiscBlocks] = {3, 3, 3, 1};
inline constexpr int kDiscStrides[kDiscBlocks] = {2, 2, 3, 1};
inline constexpr int kDiscReduction = 12;
inline constexpr int kGeneratorDilations[3] = {1, 2, 2};

int disc_input_channels(const NetSpec& spec);
// [channels, H/12, W/12, D/12] of the last conv block.
Shape disc_feature_shape(const NetSpec& spec);
std::size_t disc_flatten_width(const NetSpec& spec);

// Weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)); biases and norm shifts 0;
// norm scales 1.
template <class T>
ParamStore<T> init_params(const NetSpec& spec, std::uint64_t seed);

// x: [N,1,sH,sW,sD] -> class probabilities [N,C,H,W,D].
// When `trainable` is false the parameters enter the tape as constants.
template <class T>
Var generator_forward(Tape<T>& tape, const NetSpec& spec, ParamStore<T>& params, Var x,
                      bool trainable = true);

// volume: [N,C,H,W,D]; cond: [N,1,H,W,D], used only by conditional nets.
// Returns [N,1] probabilities. `feature_shape`, if set, receives the
// pre-flatten block shape [N,16,H/12,W/12,D/12].
template <class T>
Var disc_global_forward(Tape<T>& tape, const NetSpec& spec, ParamStore<T>& params, Var volume,
                        std::optional<Var> cond, bool trainable = true, Shape* feature_shape = nullptr);

// Returns per-element probabilities with the input's spatial dims and C
// channels (1 with local_single_channel).
template <class T>
Var disc_local_forward(Tape<T>& tape, const NetSpec& spec, ParamStore<T>& params, Var volume,
                       std::optional<Var> cond, bool trainable = true);

template <class T>
Var discriminator_forward(Tape<T>& tape, const NetSpec& spec, ParamStore<T>& params, Var volume,
                          std::optional<Var> cond, bool trainable = true);

// --- batch assembly ------------------------------------------------------

template <class T>
Tensor<T> stack_tsdf(const std::vector<const TsdfVolume*>& items);
template <class T>
Tensor<T> stack_class_volumes(const std::vector<const ClassVolume*>& items);
template <class T>
Tensor<T> stack_channels(const std::vector<const std::vector<float>*>& items, const GridSpec& grid);

// Single-item conveniences that evaluate without recording gradients.
ProbabilityVolume generator_predict(const NetSpec& spec, ParamStore<float>& params, const TsdfVolume& x);
std::vector<float> discriminator_predict(const NetSpec& spec, ParamStore<float>& params,
                                         const ClassVolume& volume, const std::vector<float>* cond);

}  // namespace sscgan::nn
