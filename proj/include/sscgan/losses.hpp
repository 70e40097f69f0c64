#pragma once

#include <span>
#include <vector>

#include "sscgan/ops.hpp"
#include "sscgan/voxcore.hpp"

namespace sscgan {

enum class AdversarialMode {
  kMinimax,        // mce - lambda * bce(d_fake, 0)
  kNonSaturating,  // mce + lambda * bce(d_fake, 1)
};

struct LossConfig {
  double lambda = 1.0;
  double smoothing = 0.1;  // one-sided: real target is 1 - smoothing
  double clamp = 1e-7;
  AdversarialMode mode = AdversarialMode::kMinimax;

  void validate() const;
  double real_target() const { return 1.0 - smoothing; }
};

struct MceValue {
  double sum = 0.0;        // summed over every voxel
  double per_voxel = 0.0;  // sum / (H*W*D)
};

MceValue mce(const ProbabilityVolume& pred, const OneHotVolume& target, double clamp = 1e-7);
// Ablation only: restricts the sum to voxels where mask != 0.
MceValue mce_masked(const ProbabilityVolume& pred, const OneHotVolume& target,
                    std::span<const std::uint8_t> mask, double clamp = 1e-7);

double bce(double pred, double target, double clamp = 1e-7);
double bce(std::span<const double> pred, double target, double clamp = 1e-7);
double bce(std::span<const double> pred, std::span<const double> target, double clamp = 1e-7);

enum class DiscVariant { kGlobal, kLocal };

// Discriminator output: one scalar per item (global) or a per-element map
// (local).
struct DiscOutput {
  DiscVariant variant = DiscVariant::kGlobal;
  std::vector<double> values;
};

// bce(d_real, 1 - eps) + bce(d_fake, 0); minimized over the discriminator.
double disc_loss(const DiscOutput& real, const DiscOutput& fake, const LossConfig& cfg);

// Signed adversarial contribution to the generator objective.
double gen_adversarial_term(const DiscOutput& fake, const LossConfig& cfg);
double gen_loss(double mce_value, const DiscOutput& fake, const LossConfig& cfg);
double gen_loss(const ProbabilityVolume& pred, const OneHotVolume& target, const DiscOutput& fake,
                const LossConfig& cfg);

namespace nn {

template <class T>
Var disc_loss(Tape<T>& tape, Var d_real, Var d_fake, const LossConfig& cfg);

// Returns the signed, lambda-weighted adversarial term for the generator.
template <class T>
Var gen_adversarial_term(Tape<T>& tape, Var d_fake, const LossConfig& cfg);

}  // namespace nn

}  // namespace sscgan
