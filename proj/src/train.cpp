#include "sscgan/train.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sscgan/config.hpp"
#include "sscgan/error.hpp"
#include "sscgan/rng.hpp"

namespace sscgan {
namespace fs = std::filesystem;
using nn::Tensor;
using nn::Var;

namespace {

// Seed streams derived from TrainConfig::seed.
constexpr std::uint64_t kGeneratorInitStream = 1;
constexpr std::uint64_t kDiscriminatorInitStream = 2;
constexpr std::uint64_t kShuffleStream = 3;

double mean_of(const Tensor<float>& t) {
  double s = 0.0;
  for (float v : t.values()) s += v;
  return t.empty() ? 0.0 : s / static_cast<double>(t.size());
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

// --- TrainConfig ----------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (!(generator_optimizer.lr > 0)) throw ConfigError("generator_optimizer.lr must be positive");
  if (generator_optimizer.weight_decay < 0) throw ConfigError("generator_optimizer.weight_decay must be non-negative");
  if (generator_optimizer.momentum < 0 || generator_optimizer.momentum >= 1) {
    throw ConfigError("generator_optimizer.momentum must lie in [0, 1)");
  }
  const auto& d = discriminator_optimizer;
  if (!(d.lr > 0)) throw ConfigError("discriminator_optimizer.lr must be positive");
  if (d.beta1 < 0 || d.beta1 >= 1 || d.beta2 < 0 || d.beta2 >= 1) {
    throw ConfigError("discriminator_optimizer betas must lie in [0, 1)");
  }
  if (!(d.eps > 0)) throw ConfigError("discriminator_optimizer.eps must be positive");
  if (disc_updates_per_gen < 1) throw ConfigError("disc_updates_per_gen must be at least 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (!(tsdf.truncation_voxels > 0)) throw ConfigError("tsdf.truncation_voxels must be positive");
  loss.validate();
}

nn::NetSpec TrainConfig::generator_spec(const GridSpec& grid) const {
  nn::NetSpec s = nn::NetSpec::generator(grid);
  s.widths = generator_widths;
  s.norm = generator_norm;
  s.leaky_slope = leaky_slope;
  s.validate();
  return s;
}

nn::NetSpec TrainConfig::discriminator_spec(const GridSpec& grid) const {
  const auto kind = adv_loss == AdvLoss::kGlobal ? nn::NetKind::kDiscGlobal : nn::NetKind::kDiscLocal;
  nn::NetSpec s = nn::NetSpec::discriminator(kind, grid, conditional);
  s.widths = disc_widths;
  s.fc_widths = disc_fc_widths;
  s.norm = disc_norm;
  s.leaky_slope = leaky_slope;
  s.local_single_channel = local_single_channel;
  s.validate();
  return s;
}

std::string TrainConfig::variant_name() const {
  return std::string("SSC-") + (conditional ? "cGAN" : "GAN") + (adv_loss == AdvLoss::kGlobal ? "-GL" : "-LL");
}

TrainState make_train_state(const TrainConfig& config, const GridSpec& grid) {
  config.validate();
  TrainState st;
  st.config = config;
  st.generator_spec = config.generator_spec(grid);
  st.discriminator_spec = config.discriminator_spec(grid);
  st.generator = nn::init_params<float>(st.generator_spec, mix_seed(config.seed, kGeneratorInitStream));
  st.discriminator = nn::init_params<float>(st.discriminator_spec, mix_seed(config.seed, kDiscriminatorInitStream));
  st.disc_adam = nn::AdamState<float>::zeros_like(st.discriminator);
  return st;
}

// --- one step ---------------------------------------------------------------

StepStats train_step(TrainState& st, std::span<const DataItem* const> batch) {
  const TrainConfig& cfg = st.config;
  if (static_cast<int>(batch.size()) != cfg.batch_size) {
    throw ShapeError("batch has " + std::to_string(batch.size()) + " items, config expects " +
                     std::to_string(cfg.batch_size));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const GridSpec& grid = st.generator_spec.grid;

  std::vector<const TsdfVolume*> xs;
  std::vector<const ClassVolume*> ys;
  std::vector<const std::vector<float>*> cs;
  for (const DataItem* item : batch) {
    xs.push_back(&item->tsdf);
    ys.push_back(&item->onehot);
    cs.push_back(&item->cond);
  }
  const Tensor<float> x = nn::stack_tsdf<float>(xs);
  const Tensor<float> y = nn::stack_class_volumes<float>(ys);
  std::optional<Tensor<float>> cond;
  if (cfg.conditional) cond = nn::stack_channels<float>(cs, grid);

  StepStats stats;
  stats.step = st.step + 1;

  nn::Tape<float> tape(true);
  st.generator.zero_grad();
  const Var g = nn::generator_forward(tape, st.generator_spec, st.generator, tape.constant(x), true);

  // The fake volume enters the discriminator phase as a constant, so no
  // gradient reaches the generator from it.
  const Tensor<float> fake = tape.value(g);

  auto discriminator_phase = [&] {
    for (int u = 0; u < cfg.disc_updates_per_gen; ++u) {
      nn::Tape<float> dt(true);
      st.discriminator.zero_grad();
      std::optional<Var> c;
      if (cond) c = dt.constant(*cond);
      const Var d_real = nn::discriminator_forward(dt, st.discriminator_spec, st.discriminator, dt.constant(y), c);
      const Var d_fake = nn::discriminator_forward(dt, st.discriminator_spec, st.discriminator, dt.constant(fake), c);
      const Var loss = nn::disc_loss(dt, d_real, d_fake, cfg.loss);
      stats.disc_loss = dt.value(loss)[0];
      stats.d_real_mean = mean_of(dt.value(d_real));
      stats.d_fake_mean = mean_of(dt.value(d_fake));
      if (!finite(stats.disc_loss)) {
        throw NumericError("non-finite discriminator loss at step " + std::to_string(stats.step));
      }
      dt.backward(loss);
      nn::adam_step(st.discriminator, st.disc_adam, cfg.discriminator_optimizer, st.disc_adam.step + 1);
    }
  };

  auto generator_phase = [&] {
    const double voxels = static_cast<double>(grid.voxel_count());
    const double n = static_cast<double>(batch.size());
    // Summed cross-entropy per item, averaged over the batch.
    const Var mce_item = nn::scale(tape, nn::mce_sum(tape, g, y, static_cast<float>(cfg.loss.clamp)),
                                   static_cast<float>(1.0 / n));
    stats.mce_sum = tape.value(mce_item)[0];
    stats.mce_per_voxel = stats.mce_sum / voxels;
    Var objective = cfg.mce_reduction == MceReduction::kSum
                        ? mce_item
                        : nn::scale(tape, mce_item, static_cast<float>(1.0 / voxels));
    if (cfg.loss.lambda > 0.0) {
      std::optional<Var> c;
      if (cond) c = tape.constant(*cond);
      const Var d_fake = nn::discriminator_forward(tape, st.discriminator_spec, st.discriminator, g, c, false);
      const Var adv = nn::gen_adversarial_term(tape, d_fake, cfg.loss);
      stats.gen_adv_term = tape.value(adv)[0];
      objective = nn::add(tape, objective, adv);
    }
    if (!finite(tape.value(objective)[0])) {
      throw NumericError("non-finite generator loss at step " + std::to_string(stats.step));
    }
    tape.backward(objective);
    const auto& o = cfg.generator_optimizer;
    if (o.momentum > 0.0) {
      nn::sgd_momentum_step(st.generator, st.gen_velocity, o.lr, o.weight_decay, o.momentum);
    } else {
      nn::sgd_step(st.generator, o.lr, o.weight_decay);
    }
  };

  if (cfg.disc_first) {
    discriminator_phase();
    generator_phase();
  } else {
    generator_phase();
    discriminator_phase();
  }
  st.step += 1;
  stats.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t dataset_size, int batch_size, int step) {
  if (dataset_size == 0) throw ConfigError("dataset is empty");
  std::vector<std::size_t> out;
  std::uint64_t cached_epoch = UINT64_MAX;
  std::vector<std::size_t> perm(dataset_size);
  for (int b = 0; b < batch_size; ++b) {
    const std::uint64_t pos = static_cast<std::uint64_t>(step) * batch_size + b;
    const std::uint64_t epoch = pos / dataset_size;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      Rng rng(mix_seed(seed, epoch));
      for (std::size_t i = dataset_size - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
      }
      cached_epoch = epoch;
    }
    out.push_back(perm[pos % dataset_size]);
  }
  return out;
}

// --- checkpoints --------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'S', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

struct TensorWriter {
  Json index = Json::array();
  std::string payload;

  void add(const std::string& name, const Tensor<float>& t) {
    index.push_back(Json{{"name", name}, {"shape", t.shape()}, {"offset", payload.size()}, {"count", t.size()}});
    for (float f : t.values()) put_le(payload, std::bit_cast<std::uint32_t>(f));
  }
};

}  // namespace

std::string checkpoint_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06d.ssck", step);
  return buf;
}

void save_checkpoint(const fs::path& path, const TrainState& st) {
  TensorWriter w;
  for (const auto& p : st.generator.entries()) w.add("generator/" + p.name, p.value);
  for (const auto& p : st.discriminator.entries()) w.add("discriminator/" + p.name, p.value);
  const auto& entries = st.discriminator.entries();
  for (std::size_t i = 0; i < st.disc_adam.m.size(); ++i) w.add("adam_m/" + entries[i].name, st.disc_adam.m[i]);
  for (std::size_t i = 0; i < st.disc_adam.v.size(); ++i) w.add("adam_v/" + entries[i].name, st.disc_adam.v[i]);
  const auto& gentries = st.generator.entries();
  for (std::size_t i = 0; i < st.gen_velocity.size(); ++i) w.add("velocity/" + gentries[i].name, st.gen_velocity[i]);

  const Json meta{{"train_config", to_json(st.config)},
                  {"generator_spec", to_json(st.generator_spec)},
                  {"discriminator_spec", to_json(st.discriminator_spec)},
                  {"generator_seed", st.generator.seed()},
                  {"discriminator_seed", st.discriminator.seed()},
                  {"step", st.step},
                  {"adam_step", st.disc_adam.step},
                  {"variant", st.config.variant_name()}};
  const std::string index = Json{{"meta", meta}, {"tensors", w.index}}.dump();

  std::string out(kCheckpointMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, index.size());
  out += index;
  out += w.payload;
  const fs::path tmp = path.string() + ".tmp";
  write_file_bytes(tmp, std::span(reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
  fs::rename(tmp, path);
}

TrainState load_checkpoint(const fs::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  const std::size_t head = 4 + 4 + 8;
  if (bytes.size() < head || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw IoError(path.string() + " is not a checkpoint");
  }
  if (get_le<std::uint32_t>(bytes.data() + 4) != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version");
  }
  const std::uint64_t index_len = get_le<std::uint64_t>(bytes.data() + 8);
  if (index_len > bytes.size() - head) throw IoError(path.string() + ": truncated checkpoint index");
  const std::uint8_t* payload = bytes.data() + head + index_len;
  const std::size_t payload_len = bytes.size() - head - index_len;

  TrainState st;
  std::map<std::string, Tensor<float>> tensors;
  try {
    const Json index = Json::parse(bytes.begin() + head, bytes.begin() + head + static_cast<std::ptrdiff_t>(index_len));
    const Json& meta = index.at("meta");
    st.config = train_config_from_json(meta.at("train_config"), "train_config");
    st.generator_spec = net_spec_from_json(meta.at("generator_spec"), "generator_spec");
    st.discriminator_spec = net_spec_from_json(meta.at("discriminator_spec"), "discriminator_spec");
    st.generator = nn::init_params<float>(st.generator_spec, meta.at("generator_seed").get<std::uint64_t>());
    st.discriminator = nn::init_params<float>(st.discriminator_spec, meta.at("discriminator_seed").get<std::uint64_t>());
    st.step = meta.at("step").get<int>();
    st.disc_adam.step = meta.at("adam_step").get<long>();
    for (const auto& t : index.at("tensors")) {
      const nn::Shape shape = t.at("shape").get<nn::Shape>();
      const std::size_t offset = t.at("offset").get<std::size_t>();
      const std::size_t count = t.at("count").get<std::size_t>();
      if (count != nn::shape_size(shape) || offset > payload_len || count * 4 > payload_len - offset) {
        throw IoError(path.string() + ": tensor " + t.at("name").get<std::string>() + " is out of bounds");
      }
      std::vector<float> data(count);
      for (std::size_t i = 0; i < count; ++i) {
        data[i] = std::bit_cast<float>(get_le<std::uint32_t>(payload + offset + 4 * i));
      }
      tensors.emplace(t.at("name").get<std::string>(), Tensor<float>(shape, std::move(data)));
    }
  } catch (const Json::exception& e) {
    throw IoError("malformed checkpoint index in " + path.string() + ": " + e.what());
  }

  auto take = [&](const std::string& name, const nn::Shape& shape) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IoError(path.string() + ": missing tensor " + name);
    if (it->second.shape() != shape) throw IoError(path.string() + ": tensor " + name + " has the wrong shape");
    Tensor<float> t = std::move(it->second);
    tensors.erase(it);
    return t;
  };
  for (auto& p : st.generator.entries()) p.value = take("generator/" + p.name, p.value.shape());
  for (auto& p : st.discriminator.entries()) p.value = take("discriminator/" + p.name, p.value.shape());
  for (auto& p : st.discriminator.entries()) st.disc_adam.m.push_back(take("adam_m/" + p.name, p.value.shape()));
  for (auto& p : st.discriminator.entries()) st.disc_adam.v.push_back(take("adam_v/" + p.name, p.value.shape()));
  if (tensors.count("velocity/" + st.generator.entries().front().name)) {
    for (auto& p : st.generator.entries()) st.gen_velocity.push_back(take("velocity/" + p.name, p.value.shape()));
  }
  if (!tensors.empty()) throw IoError(path.string() + ": unexpected tensor " + tensors.begin()->first);
  return st;
}

// --- full loop ----------------------------------------------------------------

namespace {

std::string csv_row(const StepStats& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f", s.step, s.mce_sum,
                s.mce_per_voxel, s.disc_loss, s.gen_adv_term, s.d_real_mean, s.d_fake_mean, s.wall_ms);
  return buf;
}

// Keeps the header and the rows for steps <= `last_step`.
void truncate_log(const fs::path& path, int last_step) {
  std::vector<std::string> keep{kTrainCsvHeader};
  if (std::ifstream in(path); in) {
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoi(line.substr(0, line.find(','))) <= last_step) keep.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : keep) out << l << "\n";
}

// Everything except the run length must agree when resuming.
Json resume_key(const TrainConfig& c) {
  Json j = to_json(c);
  j.erase("steps");
  j.erase("checkpoint_every");
  return j;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& data, const fs::path& out_dir,
                  const std::optional<fs::path>& resume, const StepCallback& on_step) {
  config.validate();
  if (data.items.empty()) throw ConfigError("dataset is empty");
  fs::create_directories(out_dir);
  const fs::path log_path = out_dir / "log.csv";

  TrainResult result;
  TrainState st;
  if (resume) {
    st = load_checkpoint(*resume);
    if (resume_key(st.config) != resume_key(config)) {
      throw ConfigError("training config differs from the one stored in " + resume->string());
    }
    if (!st.generator_spec.grid.same_shape(data.grid)) {
      throw ConfigError("dataset grid differs from the checkpoint grid");
    }
    if (st.step > config.steps) throw ConfigError("checkpoint is already past the requested step count");
    st.config = config;
    truncate_log(log_path, st.step);
  } else {
    st = make_train_state(config, data.grid);
    truncate_log(log_path, -1);
    const fs::path ck = out_dir / checkpoint_name(0);
    save_checkpoint(ck, st);
    result.checkpoints.push_back(ck);
  }

  std::ofstream log(log_path, std::ios::app);
  if (!log) throw IoError("cannot append to " + log_path.string());
  const std::uint64_t shuffle_seed = mix_seed(config.seed, kShuffleStream);
  while (st.step < config.steps) {
    const auto idx = batch_indices(shuffle_seed, data.items.size(), config.batch_size, st.step);
    std::vector<const DataItem*> batch;
    for (std::size_t i : idx) batch.push_back(&data.items[i]);
    StepStats s;
    try {
      s = train_step(st, batch);
    } catch (const NumericError&) {
      save_checkpoint(out_dir / ("diagnostic_" + checkpoint_name(st.step + 1)), st);
      throw;
    }
    log << csv_row(s) << "\n" << std::flush;
    result.stats.push_back(s);
    if (on_step) on_step(s);
    const bool cadence = config.checkpoint_every > 0 && st.step % config.checkpoint_every == 0;
    if (cadence || st.step == config.steps) {
      const fs::path ck = out_dir / checkpoint_name(st.step);
      save_checkpoint(ck, st);
      result.checkpoints.push_back(ck);
    }
  }
  return result;
}

}  // namespace sscgan
