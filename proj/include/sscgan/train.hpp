#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sscgan/dataset.hpp"
#include "sscgan/losses.hpp"
#include "sscgan/nets.hpp"
#include "sscgan/optim.hpp"
#include "sscgan/tsdf.hpp"

namespace sscgan {

enum class AdvLoss { kGlobal, kLocal };

// How the multi-class cross-entropy enters the generator objective. kSum is
// the literal per-voxel sum; kMean divides by the voxel count of the batch.
enum class MceReduction { kMean, kSum };

struct SgdConfig {
  double lr = 0.01;
  double weight_decay = 0.0005;
  double momentum = 0.0;  // 0 gives the plain update
};

struct TrainConfig {
  int batch_size = 4;
  SgdConfig generator_optimizer;
  nn::AdamHyper discriminator_optimizer;
  LossConfig loss;
  bool conditional = true;
  AdvLoss adv_loss = AdvLoss::kGlobal;
  int steps = 500;
  int disc_updates_per_gen = 1;
  bool disc_first = true;
  std::uint64_t seed = 0;
  bool deterministic = true;
  int checkpoint_every = 100;
  MceReduction mce_reduction = MceReduction::kMean;

  std::vector<int> generator_widths{16, 32};
  nn::Normalization generator_norm = nn::Normalization::kNone;
  std::vector<int> disc_widths{32, 64, 32, 16};
  std::vector<int> disc_fc_widths{256, 128};
  nn::Normalization disc_norm = nn::Normalization::kInstance;
  double leaky_slope = 0.2;
  bool local_single_channel = false;
  TsdfOptions tsdf;

  void validate() const;
  nn::NetSpec generator_spec(const GridSpec& grid) const;
  nn::NetSpec discriminator_spec(const GridSpec& grid) const;
  // "SSC-GAN-GL", "SSC-cGAN-LL", ...
  std::string variant_name() const;
};

struct TrainState {
  TrainConfig config;
  nn::NetSpec generator_spec;
  nn::NetSpec discriminator_spec;
  nn::ParamStore<float> generator;
  nn::ParamStore<float> discriminator;
  nn::AdamState<float> disc_adam;
  std::vector<nn::Tensor<float>> gen_velocity;  // empty unless momentum > 0
  int step = 0;  // completed generator updates
};

TrainState make_train_state(const TrainConfig& config, const GridSpec& grid);

struct StepStats {
  int step = 0;
  double mce_sum = 0.0;        // per item, summed over voxels (mean over batch)
  double mce_per_voxel = 0.0;  // mce_sum / (H*W*D)
  double disc_loss = 0.0;      // last discriminator sub-step
  double gen_adv_term = 0.0;   // signed, lambda-weighted
  double d_real_mean = 0.0;
  double d_fake_mean = 0.0;
  double wall_ms = 0.0;
};

// One discriminator phase (disc_updates_per_gen Adam steps) and one
// generator SGD step. Throws NumericError on a non-finite loss.
StepStats train_step(TrainState& state, std::span<const DataItem* const> batch);

// Indices of the examples that make up batch `step` (0-based). Each epoch
// is a fresh permutation derived from the seed, so batches depend only on
// (seed, step) and resuming needs no RNG state.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t dataset_size, int batch_size, int step);

// --- checkpoints -----------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_name(int step);

// --- full loop -------------------------------------------------------------

struct TrainResult {
  std::vector<StepStats> stats;
  std::vector<std::filesystem::path> checkpoints;
};

using StepCallback = std::function<void(const StepStats&)>;

// Writes checkpoints (step 0, every `checkpoint_every`, and the final step)
// and log.csv into `out_dir`. With `resume`, continues from that checkpoint
// and appends to an existing log.
TrainResult train(const TrainConfig& config, const Dataset& data, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume = std::nullopt,
                  const StepCallback& on_step = {});

inline constexpr const char* kTrainCsvHeader =
    "step,mce_sum,mce_per_voxel,disc_loss,gen_adv_term,d_real_mean,d_fake_mean,wall_ms";

}  // namespace sscgan
