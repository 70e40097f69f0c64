#include "sscgan/losses.hpp"

#include <algorithm>
#include <cmath>

#include "sscgan/error.hpp"

namespace sscgan {

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (!(smoothing >= 0.0 && smoothing < 0.5)) throw ConfigError("label smoothing must be in [0, 0.5)");
  if (!(clamp > 0.0 && clamp < 0.5)) throw ConfigError("log clamp must be in (0, 0.5)");
}

namespace {

void check_pair(const ClassVolume& pred, const ClassVolume& target) {
  if (!pred.spec.same_shape(target.spec) || pred.values.size() != target.values.size()) {
    throw ShapeError("prediction and target volumes differ in shape");
  }
}

}  // namespace

MceValue mce(const ProbabilityVolume& pred, const OneHotVolume& target, double clamp) {
  check_pair(pred, target);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (target.values[i] != 0.0f) {
      sum -= target.values[i] * std::log(std::clamp(static_cast<double>(pred.values[i]), clamp, 1.0));
    }
  }
  return {sum, sum / static_cast<double>(pred.spec.voxel_count())};
}

MceValue mce_masked(const ProbabilityVolume& pred, const OneHotVolume& target,
                    std::span<const std::uint8_t> mask, double clamp) {
  check_pair(pred, target);
  const std::size_t n = pred.spec.voxel_count();
  if (mask.size() != n) throw ShapeError("mask does not match the grid");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < n; ++v) {
    if (!mask[v]) continue;
    ++count;
    for (int c = 0; c < pred.spec.num_classes; ++c) {
      const std::size_t i = c * n + v;
      if (target.values[i] != 0.0f) {
        sum -= target.values[i] * std::log(std::clamp(static_cast<double>(pred.values[i]), clamp, 1.0));
      }
    }
  }
  return {sum, count ? sum / static_cast<double>(count) : 0.0};
}

double bce(double pred, double target, double clamp) {
  const double p = std::clamp(pred, clamp, 1.0 - clamp);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

double bce(std::span<const double> pred, double target, double clamp) {
  if (pred.empty()) throw ShapeError("bce of an empty array");
  double sum = 0.0;
  for (double p : pred) sum += bce(p, target, clamp);
  return sum / static_cast<double>(pred.size());
}

double bce(std::span<const double> pred, std::span<const double> target, double clamp) {
  if (pred.size() != target.size()) throw ShapeError("bce prediction and target differ in shape");
  if (pred.empty()) throw ShapeError("bce of an empty array");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += bce(pred[i], target[i], clamp);
  return sum / static_cast<double>(pred.size());
}

double disc_loss(const DiscOutput& real, const DiscOutput& fake, const LossConfig& cfg) {
  cfg.validate();
  if (real.variant != fake.variant || real.values.size() != fake.values.size()) {
    throw ConfigError("d_real and d_fake come from different discriminator variants");
  }
  return bce(real.values, cfg.real_target(), cfg.clamp) + bce(fake.values, 0.0, cfg.clamp);
}

double gen_adversarial_term(const DiscOutput& fake, const LossConfig& cfg) {
  cfg.validate();
  if (cfg.mode == AdversarialMode::kMinimax) return -cfg.lambda * bce(fake.values, 0.0, cfg.clamp);
  return cfg.lambda * bce(fake.values, 1.0, cfg.clamp);
}

double gen_loss(double mce_value, const DiscOutput& fake, const LossConfig& cfg) {
  if (cfg.lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  if (cfg.lambda == 0.0) return mce_value;
  return mce_value + gen_adversarial_term(fake, cfg);
}

double gen_loss(const ProbabilityVolume& pred, const OneHotVolume& target, const DiscOutput& fake,
                const LossConfig& cfg) {
  return gen_loss(mce(pred, target, cfg.clamp).sum, fake, cfg);
}

namespace nn {

template <class T>
Var disc_loss(Tape<T>& tape, Var d_real, Var d_fake, const LossConfig& cfg) {
  if (tape.value(d_real).shape() != tape.value(d_fake).shape()) {
    throw ConfigError("d_real and d_fake come from different discriminator variants");
  }
  const T clamp = static_cast<T>(cfg.clamp);
  Var real = bce_mean(tape, d_real, static_cast<T>(cfg.real_target()), clamp);
  Var fake = bce_mean(tape, d_fake, T(0), clamp);
  return add(tape, real, fake);
}

template <class T>
Var gen_adversarial_term(Tape<T>& tape, Var d_fake, const LossConfig& cfg) {
  const T clamp = static_cast<T>(cfg.clamp);
  if (cfg.mode == AdversarialMode::kMinimax) {
    return scale(tape, bce_mean(tape, d_fake, T(0), clamp), static_cast<T>(-cfg.lambda));
  }
  return scale(tape, bce_mean(tape, d_fake, T(1), clamp), static_cast<T>(cfg.lambda));
}

template Var disc_loss<float>(Tape<float>&, Var, Var, const LossConfig&);
template Var disc_loss<double>(Tape<double>&, Var, Var, const LossConfig&);
template Var gen_adversarial_term<float>(Tape<float>&, Var, const LossConfig&);
template Var gen_adversarial_term<double>(Tape<double>&, Var, const LossConfig&);

}  // namespace nn

}  // namespace sscgan
