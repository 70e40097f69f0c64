#include "sscgan/nets.hpp"

#include <cmath>
#include <string>

#include "sscgan/rng.hpp"

namespace sscgan::nn {

namespace {

std::string str(int v) { return std::to_string(v); }

NormMode norm_mode(Normalization n) {
  return n == Normalization::kBatch ? NormMode::kBatch : NormMode::kInstance;
}

template <class T>
void declare_norm(ParamStore<T>& store, const std::string& prefix, int channels, Normalization norm) {
  if (norm == Normalization::kNone) return;
  store.add(prefix + ".norm.gamma", {channels}, false).value.fill(T(1));
  store.add(prefix + ".norm.beta", {channels}, false);
}

template <class T>
void declare_conv(ParamStore<T>& store, Rng& rng, const std::string& prefix, int out, int in, int k) {
  auto& w = store.add(prefix + ".w", {out, in, k, k, k}, true);
  const double bound = std::sqrt(6.0 / (static_cast<double>(in) * k * k * k));
  for (T& v : w.value.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
  store.add(prefix + ".b", {out}, false);
}

template <class T>
void declare_linear(ParamStore<T>& store, Rng& rng, const std::string& prefix, int out, int in) {
  auto& w = store.add(prefix + ".w", {out, in}, true);
  const double bound = std::sqrt(6.0 / in);
  for (T& v : w.value.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
  store.add(prefix + ".b", {out}, false);
}

// Resolves parameter names to tape variables.
template <class T>
struct Binder {
  Tape<T>& tape;
  ParamStore<T>& store;
  bool trainable;
  Var operator()(const std::string& name) const {
    return trainable ? tape.parameter(store, name) : tape.frozen(store, name);
  }
};

template <class T>
Var conv(const Binder<T>& p, Var x, const std::string& prefix, ConvGeometry g) {
  return conv3d(p.tape, x, p(prefix + ".w"), p(prefix + ".b"), g);
}

template <class T>
Var maybe_norm(const Binder<T>& p, Var x, const std::string& prefix, Normalization norm) {
  if (norm == Normalization::kNone) return x;
  return normalize(p.tape, x, p(prefix + ".norm.gamma"), p(prefix + ".norm.beta"), norm_mode(norm));
}

template <class T>
Var disc_trunk(const Binder<T>& p, const NetSpec& spec, Var volume, std::optional<Var> cond) {
  const Tensor<T>& v = p.tape.value(volume);
  const GridSpec& g = spec.grid;
  if (v.rank() != 5 || v.dim(1) != g.num_classes || v.dim(2) != g.height || v.dim(3) != g.width ||
      v.dim(4) != g.depth) {
    throw ShapeError("discriminator input " + shape_str(v.shape()) + " does not match C x H x W x D of the spec");
  }
  Var h = volume;
  if (spec.conditional) {
    if (!cond) throw ConfigError("conditional discriminator called without a conditioning channel");
    const Tensor<T>& c = p.tape.value(*cond);
    if (c.rank() != 5 || c.dim(0) != v.dim(0) || c.dim(1) != 1 || c.dim(2) != g.height ||
        c.dim(3) != g.width || c.dim(4) != g.depth) {
      throw ShapeError("conditioning channel " + shape_str(c.shape()) + " does not match the volume");
    }
    h = concat_channels(p.tape, {volume, *cond});
  }
  const T slope = static_cast<T>(spec.leaky_slope);
  for (int b = 0; b < kDiscBlocks; ++b) {
    const std::string prefix = "block" + str(b);
    const ConvGeometry geom{kDiscStrides[b], kDiscKernels[b] / 2, 1};
    h = conv(p, h, prefix + ".conv", geom);
    h = maybe_norm(p, h, prefix + ".conv", spec.norm);
    h = leaky_relu(p.tape, h, slope);
  }
  return h;
}

}  // namespace

void NetSpec::validate() const {
  grid.validate();
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky-ReLU slope must be in (0, 1)");
  for (int w : widths) {
    if (w < 1) throw ConfigError("channel widths must be positive");
  }
  if (kind == NetKind::kGenerator) {
    if (widths.size() != 2) throw ConfigError("generator widths must be {trunk, head}");
    return;
  }
  if (widths.size() != kDiscBlocks) throw ConfigError("discriminator needs exactly 4 block widths");
  if (kind == NetKind::kDiscGlobal) {
    for (int w : fc_widths) {
      if (w < 1) throw ConfigError("fully connected widths must be positive");
    }
  }
  grid.validate_divisible_by_12();
}

NetSpec NetSpec::generator(const GridSpec& grid) {
  NetSpec s;
  s.kind = NetKind::kGenerator;
  s.widths = {16, 32};
  s.norm = Normalization::kNone;
  s.grid = grid;
  return s;
}

NetSpec NetSpec::discriminator(NetKind kind, const GridSpec& grid, bool conditional) {
  NetSpec s;
  s.kind = kind;
  s.conditional = conditional;
  s.widths = {32, 64, 32, 16};
  s.norm = Normalization::kInstance;
  s.grid = grid;
  return s;
}

int disc_input_channels(const NetSpec& spec) {
  return spec.grid.num_classes + (spec.conditional ? 1 : 0);
}

Shape disc_feature_shape(const NetSpec& spec) {
  std::array<int, 3> dims = spec.grid.dims();
  for (int b = 0; b < kDiscBlocks; ++b) {
    const ConvGeometry g{kDiscStrides[b], kDiscKernels[b] / 2, 1};
    for (int& d : dims) d = conv_output_size(d, kDiscKernels[b], g);
  }
  return {spec.widths.back(), dims[0], dims[1], dims[2]};
}

std::size_t disc_flatten_width(const NetSpec& spec) { return shape_size(disc_feature_shape(spec)); }

template <class T>
ParamStore<T> init_params(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamStore<T> store(seed);
  Rng rng(seed);
  if (spec.kind == NetKind::kGenerator) {
    const int w = spec.widths[0], head = spec.widths[1], s = spec.grid.input_scale;
    declare_conv(store, rng, "stem", w, 1, 3);
    declare_norm(store, "stem", w, spec.norm);
    if (s > 1) {
      declare_conv(store, rng, "down", w, w, s);
      declare_norm(store, "down", w, spec.norm);
    }
    for (int r = 0; r < 3; ++r) {
      for (const char* half : {"a", "b"}) {
        const std::string prefix = "res" + str(r + 1) + "." + half;
        declare_conv(store, rng, prefix, w, w, 3);
        declare_norm(store, prefix, w, spec.norm);
      }
    }
    declare_conv(store, rng, "head1", head, 3 * w, 1);
    declare_conv(store, rng, "head2", spec.grid.num_classes, head, 1);
    return store;
  }
  int in = disc_input_channels(spec);
  for (int b = 0; b < kDiscBlocks; ++b) {
    const std::string prefix = "block" + str(b) + ".conv";
    declare_conv(store, rng, prefix, spec.widths[b], in, kDiscKernels[b]);
    declare_norm(store, prefix, spec.widths[b], spec.norm);
    in = spec.widths[b];
  }
  if (spec.kind == NetKind::kDiscGlobal) {
    int features = static_cast<int>(disc_flatten_width(spec));
    for (std::size_t i = 0; i < spec.fc_widths.size(); ++i) {
      declare_linear(store, rng, "fc" + str(static_cast<int>(i)), spec.fc_widths[i], features);
      features = spec.fc_widths[i];
    }
    declare_linear(store, rng, "out", 1, features);
  } else {
    declare_conv(store, rng, "proj", spec.local_single_channel ? 1 : spec.grid.num_classes, in, 1);
  }
  return store;
}

template <class T>
Var generator_forward(Tape<T>& tape, const NetSpec& spec, ParamStore<T>& params, Var x, bool trainable) {
  const Binder<T> p{tape, params, trainable};
  const GridSpec& g = spec.grid;
  const int s = g.input_scale;
  const Tensor<T>& xv = tape.value(x);
  if (xv.rank() != 5 || xv.dim(1) != 1 || xv.dim(2) != s * g.height || xv.dim(3) != s * g.width ||
      xv.dim(4) != s * g.depth) {
    throw ShapeError("generator input " + shape_str(xv.shape()) + " does not match 1 x sH x sW x sD");
  }
  Var h = conv(p, x, "stem", ConvGeometry{1, 1, 1});
  h = relu(tape, maybe_norm(p, h, "stem", spec.norm));
  if (s > 1) {
    h = conv(p, h, "down", ConvGeometry{s, 0, 1});
    h = relu(tape, maybe_norm(p, h, "down", spec.norm));
  }
  std::vector<Var> stages;
  for (int r = 0; r < 3; ++r) {
    const int dil = kGeneratorDilations[r];
    const std::string prefix = "res" + str(r + 1);
    const ConvGeometry geom{1, dil, dil};
    Var a = conv(p, h, prefix + ".a", geom);
    a = relu(tape, maybe_norm(p, a, prefix + ".a", spec.norm));
    Var b = conv(p, a, prefix + ".b", geom);
    b = maybe_norm(p, b, prefix + ".b", spec.norm);
    h = relu(tape, add(tape, h, b));
    stages.push_back(h);
  }
  Var cat = concat_channels(tape, stages);
  Var head = relu(tape, conv(p, cat, "head1", ConvGeometry{}));
  Var logits = conv(p, head, "head2", ConvGeometry{});
  return softmax_channels(tape, logits);
}

template <class T>
Var disc_global_forward(Tape<T>& tape, const NetSpec& spec, ParamStore<T>& params, Var volume,
                        std::optional<Var> cond, bool trainable, Shape* feature_shape) {
  if (spec.kind != NetKind::kDiscGlobal) throw ConfigError("spec is not a global discriminator");
  spec.grid.validate_divisible_by_12();
  const Binder<T> p{tape, params, trainable};
  Var h = disc_trunk(p, spec, volume, cond);
  const Tensor<T>& hv = tape.value(h);
  if (feature_shape) *feature_shape = hv.shape();
  const int n = hv.dim(0);
  h = reshape(tape, h, Shape{n, static_cast<int>(hv.size() / n)});
  const T slope = static_cast<T>(spec.leaky_slope);
  for (std::size_t i = 0; i < spec.fc_widths.size(); ++i) {
    const std::string prefix = "fc" + str(static_cast<int>(i));
    h = leaky_relu(tape, linear(tape, h, p(prefix + ".w"), p(prefix + ".b")), slope);
  }
  h = linear(tape, h, p("out.w"), p("out.b"));
  return sigmoid(tape, h);
}

template <class T>
Var disc_local_forward(Tape<T>& tape, const NetSpec& spec, ParamStore<T>& params, Var volume,
                       std::optional<Var> cond, bool trainable) {
  if (spec.kind != NetKind::kDiscLocal) throw ConfigError("spec is not a local discriminator");
  spec.grid.validate_divisible_by_12();
  const Binder<T> p{tape, params, trainable};
  Var h = disc_trunk(p, spec, volume, cond);
  h = conv(p, h, "proj", ConvGeometry{});
  h = upsample_trilinear(tape, h, kDiscReduction);
  return sigmoid(tape, h);
}

template <class T>
Var discriminator_forward(Tape<T>& tape, const NetSpec& spec, ParamStore<T>& params, Var volume,
                          std::optional<Var> cond, bool trainable) {
  switch (spec.kind) {
    case NetKind::kDiscGlobal:
      return disc_global_forward(tape, spec, params, volume, cond, trainable);
    case NetKind::kDiscLocal:
      return disc_local_forward(tape, spec, params, volume, cond, trainable);
    default:
      throw ConfigError("spec is not a discriminator");
  }
}

template <class T>
Tensor<T> stack_tsdf(const std::vector<const TsdfVolume*>& items) {
  if (items.empty()) throw ShapeError("empty batch");
  const auto dims = items[0]->dims();
  const std::size_t per = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  Tensor<T> out({static_cast<int>(items.size()), 1, dims[0], dims[1], dims[2]});
  for (std::size_t b = 0; b < items.size(); ++b) {
    if (items[b]->dims() != dims || items[b]->values.size() != per) throw ShapeError("TSDF batch items differ in shape");
    std::copy(items[b]->values.begin(), items[b]->values.end(), out.data() + b * per);
  }
  return out;
}

template <class T>
Tensor<T> stack_class_volumes(const std::vector<const ClassVolume*>& items) {
  if (items.empty()) throw ShapeError("empty batch");
  const GridSpec& g = items[0]->spec;
  const std::size_t per = g.voxel_count() * g.num_classes;
  Tensor<T> out({static_cast<int>(items.size()), g.num_classes, g.height, g.width, g.depth});
  for (std::size_t b = 0; b < items.size(); ++b) {
    if (!items[b]->spec.same_shape(g) || items[b]->values.size() != per) {
      throw ShapeError("class-volume batch items differ in shape");
    }
    std::copy(items[b]->values.begin(), items[b]->values.end(), out.data() + b * per);
  }
  return out;
}

template <class T>
Tensor<T> stack_channels(const std::vector<const std::vector<float>*>& items, const GridSpec& grid) {
  if (items.empty()) throw ShapeError("empty batch");
  const std::size_t per = grid.voxel_count();
  Tensor<T> out({static_cast<int>(items.size()), 1, grid.height, grid.width, grid.depth});
  for (std::size_t b = 0; b < items.size(); ++b) {
    if (items[b]->size() != per) throw ShapeError("conditioning channel does not match the grid");
    std::copy(items[b]->begin(), items[b]->end(), out.data() + b * per);
  }
  return out;
}

ProbabilityVolume generator_predict(const NetSpec& spec, ParamStore<float>& params, const TsdfVolume& x) {
  Tape<float> tape(false);
  Var in = tape.constant(stack_tsdf<float>({&x}));
  Var prob = generator_forward(tape, spec, params, in, false);
  ProbabilityVolume out;
  out.spec = spec.grid;
  const auto& pv = tape.value(prob).storage();
  out.values.assign(pv.begin(), pv.end());
  return out;
}

std::vector<float> discriminator_predict(const NetSpec& spec, ParamStore<float>& params,
                                         const ClassVolume& volume, const std::vector<float>* cond) {
  Tape<float> tape(false);
  Var v = tape.constant(stack_class_volumes<float>({&volume}));
  std::optional<Var> c;
  if (cond) c = tape.constant(stack_channels<float>({cond}, spec.grid));
  Var d = discriminator_forward(tape, spec, params, v, c, false);
  const auto& dv = tape.value(d).storage();
  return {dv.begin(), dv.end()};
}

#define SSCGAN_INSTANTIATE_NETS(T)                                                                       \
  template ParamStore<T> init_params<T>(const NetSpec&, std::uint64_t);                                  \
  template Var generator_forward<T>(Tape<T>&, const NetSpec&, ParamStore<T>&, Var, bool);                \
  template Var disc_global_forward<T>(Tape<T>&, const NetSpec&, ParamStore<T>&, Var, std::optional<Var>, \
                                      bool, Shape*);                                                     \
  template Var disc_local_forward<T>(Tape<T>&, const NetSpec&, ParamStore<T>&, Var, std::optional<Var>,  \
                                     bool);                                                              \
  template Var discriminator_forward<T>(Tape<T>&, const NetSpec&, ParamStore<T>&, Var,                   \
                                        std::optional<Var>, bool);                                       \
  template Tensor<T> stack_tsdf<T>(const std::vector<const TsdfVolume*>&);                               \
  template Tensor<T> stack_class_volumes<T>(const std::vector<const ClassVolume*>&);                     \
  template Tensor<T> stack_channels<T>(const std::vector<const std::vector<float>*>&, const GridSpec&);

SSCGAN_INSTANTIATE_NETS(float)
SSCGAN_INSTANTIATE_NETS(double)

}  // namespace sscgan::nn
