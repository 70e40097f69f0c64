#include "sscgan/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "sscgan/error.hpp"

namespace sscgan {
namespace {

// Walks one JSON object, remembering which keys were consumed so the rest
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  void read(const char* key, int& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
      out = v->get<int>();
    }
  }
  void read(const char* key, std::uint64_t& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        fail(at(key), "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void read(const char* key, double& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, bool& out) {
    if (const Json* v = take(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const Json* v = take(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  template <std::size_t N>
  void read(const char* key, std::array<double, N>& out) {
    if (const Json* v = take(key)) {
      if (!v->is_array() || v->size() != N) fail(at(key), "expected an array of " + std::to_string(N) + " numbers");
      for (std::size_t i = 0; i < N; ++i) {
        if (!(*v)[i].is_number()) fail(at(key), "expected an array of numbers");
        out[i] = (*v)[i].get<double>();
      }
    }
  }
  void read(const char* key, std::vector<int>& out) {
    if (const Json* v = take(key)) {
      if (!v->is_array()) fail(at(key), "expected an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer()) fail(at(key), "expected an array of integers");
        out.push_back(e.get<int>());
      }
    }
  }

  // Enumerations spelled as strings.
  template <class E>
  void read_enum(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
    std::string s;
    bool present = j_.contains(key);
    read(key, s);
    if (!present) return;
    for (const auto& [name, value] : names) {
      if (s == name) {
        out = value;
        return;
      }
    }
    std::string allowed;
    for (const auto& [name, value] : names) allowed += std::string(allowed.empty() ? "" : ", ") + name;
    fail(at(key), "unknown value \"" + s + "\" (expected one of: " + allowed + ")");
  }

  const Json* take(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(at(it.key()), "unknown key");
    }
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class T>
void rethrow_with_path(const std::string& path, const T& obj) {
  try {
    obj.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

constexpr std::pair<const char*, AdversarialMode> kModeNames[] = {
    {"minimax", AdversarialMode::kMinimax}, {"nonsaturating", AdversarialMode::kNonSaturating}};

}  // namespace

std::string to_string(AdversarialMode mode) {
  return mode == AdversarialMode::kMinimax ? "minimax" : "nonsaturating";
}
std::string to_string(AdvLoss loss) { return loss == AdvLoss::kGlobal ? "global" : "local"; }
std::string to_string(MceReduction reduction) { return reduction == MceReduction::kMean ? "mean" : "sum"; }
std::string to_string(nn::Normalization norm) {
  switch (norm) {
    case nn::Normalization::kBatch: return "batch";
    case nn::Normalization::kInstance: return "instance";
    case nn::Normalization::kNone: return "none";
  }
  return "none";
}
std::string to_string(nn::NetKind kind) {
  switch (kind) {
    case nn::NetKind::kGenerator: return "generator";
    case nn::NetKind::kDiscGlobal: return "disc_global";
    case nn::NetKind::kDiscLocal: return "disc_local";
  }
  return "generator";
}

// --- GridSpec ---------------------------------------------------------------

Json to_json(const GridSpec& g) {
  return Json{{"height", g.height},         {"width", g.width},
              {"depth", g.depth},           {"num_classes", g.num_classes},
              {"voxel_size", g.voxel_size}, {"origin", g.origin},
              {"input_scale", g.input_scale}};
}

GridSpec grid_from_json(const Json& j, const std::string& path) {
  GridSpec g;
  ObjectReader r(j, path);
  r.read("height", g.height);
  r.read("width", g.width);
  r.read("depth", g.depth);
  r.read("num_classes", g.num_classes);
  r.read("voxel_size", g.voxel_size);
  r.read("origin", g.origin);
  r.read("input_scale", g.input_scale);
  r.finish();
  rethrow_with_path(path, g);
  return g;
}

// --- Intrinsics ---------------------------------------------------------------

Json to_json(const Intrinsics& k) {
  return Json{{"width", k.width}, {"height", k.height}, {"fx", k.fx},
              {"fy", k.fy},       {"cx", k.cx},         {"cy", k.cy}};
}

Intrinsics intrinsics_from_json(const Json& j, const std::string& path) {
  Intrinsics k;
  ObjectReader r(j, path);
  r.read("width", k.width);
  r.read("height", k.height);
  r.read("fx", k.fx);
  r.read("fy", k.fy);
  r.read("cx", k.cx);
  r.read("cy", k.cy);
  r.finish();
  if (k.width < 1 || k.height < 1) ObjectReader::fail(path, "image size must be positive");
  if (!(k.fx > 0) || !(k.fy > 0)) ObjectReader::fail(path, "focal lengths must be positive");
  return k;
}

// --- SceneConfig --------------------------------------------------------------

Json to_json(const SceneConfig& c) {
  Json priors = Json::array();
  for (const auto& p : c.class_priors) {
    priors.push_back(Json{{"size_x", p.size_x}, {"size_y", p.size_y}, {"size_z", p.size_z}});
  }
  return Json{{"grid", to_json(c.grid)},
              {"room_extent", c.room_extent},
              {"min_boxes", c.min_boxes},
              {"max_boxes", c.max_boxes},
              {"class_priors", priors},
              {"camera_height", c.camera_height},
              {"camera_clearance", c.camera_clearance},
              {"intrinsics", to_json(c.intrinsics)},
              {"max_attempts", c.max_attempts},
              {"seed", c.seed}};
}

SceneConfig scene_config_from_json(const Json& j, const std::string& path) {
  SceneConfig c;
  ObjectReader r(j, path);
  if (const Json* g = r.take("grid")) c.grid = grid_from_json(*g, r.at("grid"));
  r.read("room_extent", c.room_extent);
  r.read("min_boxes", c.min_boxes);
  r.read("max_boxes", c.max_boxes);
  if (const Json* pri = r.take("class_priors")) {
    if (!pri->is_array()) ObjectReader::fail(r.at("class_priors"), "expected an array");
    for (std::size_t i = 0; i < pri->size(); ++i) {
      const std::string p = r.at("class_priors") + "[" + std::to_string(i) + "]";
      BoxPrior b;
      ObjectReader br((*pri)[i], p);
      br.read("size_x", b.size_x);
      br.read("size_y", b.size_y);
      br.read("size_z", b.size_z);
      br.finish();
      c.class_priors.push_back(b);
    }
  }
  r.read("camera_height", c.camera_height);
  r.read("camera_clearance", c.camera_clearance);
  if (const Json* k = r.take("intrinsics")) c.intrinsics = intrinsics_from_json(*k, r.at("intrinsics"));
  r.read("max_attempts", c.max_attempts);
  r.read("seed", c.seed);
  r.finish();
  rethrow_with_path(path, c);
  return c;
}

// --- TsdfOptions --------------------------------------------------------------

Json to_json(const TsdfOptions& o) {
  return Json{{"truncation_voxels", o.truncation_voxels}, {"flipped", o.flipped}};
}

TsdfOptions tsdf_options_from_json(const Json& j, const std::string& path) {
  TsdfOptions o;
  ObjectReader r(j, path);
  r.read("truncation_voxels", o.truncation_voxels);
  r.read("flipped", o.flipped);
  r.finish();
  if (!(o.truncation_voxels > 0)) ObjectReader::fail(r.at("truncation_voxels"), "must be positive");
  return o;
}

// --- LossConfig ---------------------------------------------------------------

Json to_json(const LossConfig& c) {
  return Json{{"lambda", c.lambda},
              {"smoothing", c.smoothing},
              {"clamp", c.clamp},
              {"mode", to_string(c.mode)}};
}

LossConfig loss_config_from_json(const Json& j, const std::string& path) {
  LossConfig c;
  ObjectReader r(j, path);
  r.read("lambda", c.lambda);
  r.read("smoothing", c.smoothing);
  r.read("clamp", c.clamp);
  r.read_enum("mode", c.mode, {kModeNames[0], kModeNames[1]});
  r.finish();
  rethrow_with_path(path, c);
  return c;
}

// --- NetSpec ------------------------------------------------------------------

Json to_json(const nn::NetSpec& s) {
  return Json{{"kind", to_string(s.kind)},
              {"conditional", s.conditional},
              {"widths", s.widths},
              {"norm", to_string(s.norm)},
              {"leaky_slope", s.leaky_slope},
              {"grid", to_json(s.grid)},
              {"fc_widths", s.fc_widths},
              {"local_single_channel", s.local_single_channel}};
}

nn::NetSpec net_spec_from_json(const Json& j, const std::string& path) {
  nn::NetSpec s;
  ObjectReader r(j, path);
  r.read_enum("kind", s.kind,
              {{"generator", nn::NetKind::kGenerator},
               {"disc_global", nn::NetKind::kDiscGlobal},
               {"disc_local", nn::NetKind::kDiscLocal}});
  r.read("conditional", s.conditional);
  r.read("widths", s.widths);
  r.read_enum("norm", s.norm,
              {{"batch", nn::Normalization::kBatch},
               {"instance", nn::Normalization::kInstance},
               {"none", nn::Normalization::kNone}});
  r.read("leaky_slope", s.leaky_slope);
  if (const Json* g = r.take("grid")) s.grid = grid_from_json(*g, r.at("grid"));
  r.read("fc_widths", s.fc_widths);
  r.read("local_single_channel", s.local_single_channel);
  r.finish();
  rethrow_with_path(path, s);
  return s;
}

// --- TrainConfig --------------------------------------------------------------

Json to_json(const TrainConfig& c) {
  return Json{
      {"batch_size", c.batch_size},
      {"steps", c.steps},
      {"seed", c.seed},
      {"deterministic", c.deterministic},
      {"checkpoint_every", c.checkpoint_every},
      {"conditional", c.conditional},
      {"adv_loss", to_string(c.adv_loss)},
      {"disc_updates_per_gen", c.disc_updates_per_gen},
      {"disc_first", c.disc_first},
      {"mce_reduction", to_string(c.mce_reduction)},
      {"generator_optimizer",
       Json{{"lr", c.generator_optimizer.lr},
            {"weight_decay", c.generator_optimizer.weight_decay},
            {"momentum", c.generator_optimizer.momentum}}},
      {"discriminator_optimizer",
       Json{{"lr", c.discriminator_optimizer.lr},
            {"beta1", c.discriminator_optimizer.beta1},
            {"beta2", c.discriminator_optimizer.beta2},
            {"eps", c.discriminator_optimizer.eps}}},
      {"loss", to_json(c.loss)},
      {"generator", Json{{"widths", c.generator_widths}, {"norm", to_string(c.generator_norm)}}},
      {"discriminator",
       Json{{"widths", c.disc_widths},
            {"fc_widths", c.disc_fc_widths},
            {"norm", to_string(c.disc_norm)},
            {"leaky_slope", c.leaky_slope},
            {"local_single_channel", c.local_single_channel}}},
      {"tsdf", to_json(c.tsdf)},
  };
}

TrainConfig train_config_from_json(const Json& j, const std::string& path) {
  const std::initializer_list<std::pair<const char*, nn::Normalization>> norms = {
      {"batch", nn::Normalization::kBatch},
      {"instance", nn::Normalization::kInstance},
      {"none", nn::Normalization::kNone}};
  TrainConfig c;
  ObjectReader r(j, path);
  r.read("batch_size", c.batch_size);
  r.read("steps", c.steps);
  r.read("seed", c.seed);
  r.read("deterministic", c.deterministic);
  r.read("checkpoint_every", c.checkpoint_every);
  r.read("conditional", c.conditional);
  r.read_enum("adv_loss", c.adv_loss, {{"global", AdvLoss::kGlobal}, {"local", AdvLoss::kLocal}});
  r.read("disc_updates_per_gen", c.disc_updates_per_gen);
  r.read("disc_first", c.disc_first);
  r.read_enum("mce_reduction", c.mce_reduction, {{"mean", MceReduction::kMean}, {"sum", MceReduction::kSum}});
  if (const Json* o = r.take("generator_optimizer")) {
    ObjectReader g(*o, r.at("generator_optimizer"));
    g.read("lr", c.generator_optimizer.lr);
    g.read("weight_decay", c.generator_optimizer.weight_decay);
    g.read("momentum", c.generator_optimizer.momentum);
    g.finish();
  }
  if (const Json* o = r.take("discriminator_optimizer")) {
    ObjectReader d(*o, r.at("discriminator_optimizer"));
    d.read("lr", c.discriminator_optimizer.lr);
    d.read("beta1", c.discriminator_optimizer.beta1);
    d.read("beta2", c.discriminator_optimizer.beta2);
    d.read("eps", c.discriminator_optimizer.eps);
    d.finish();
  }
  if (const Json* o = r.take("loss")) c.loss = loss_config_from_json(*o, r.at("loss"));
  if (const Json* o = r.take("generator")) {
    ObjectReader g(*o, r.at("generator"));
    g.read("widths", c.generator_widths);
    g.read_enum("norm", c.generator_norm, norms);
    g.finish();
  }
  if (const Json* o = r.take("discriminator")) {
    ObjectReader d(*o, r.at("discriminator"));
    d.read("widths", c.disc_widths);
    d.read("fc_widths", c.disc_fc_widths);
    d.read_enum("norm", c.disc_norm, norms);
    d.read("leaky_slope", c.leaky_slope);
    d.read("local_single_channel", c.local_single_channel);
    d.finish();
  }
  if (const Json* o = r.take("tsdf")) c.tsdf = tsdf_options_from_json(*o, r.at("tsdf"));
  r.finish();
  rethrow_with_path(path, c);
  return c;
}

// --- GenDataConfig ------------------------------------------------------------

void GenDataConfig::validate() const {
  scene.validate();
  if (count < 1) throw ConfigError("count must be at least 1");
  if (!(tsdf.truncation_voxels > 0)) throw ConfigError("tsdf.truncation_voxels must be positive");
}

Json to_json(const GenDataConfig& c) {
  return Json{{"scene", to_json(c.scene)},
              {"count", c.count},
              {"write_tsdf", c.write_tsdf},
              {"tsdf", to_json(c.tsdf)}};
}

GenDataConfig gen_data_config_from_json(const Json& j, const std::string& path) {
  GenDataConfig c;
  ObjectReader r(j, path);
  if (const Json* s = r.take("scene")) c.scene = scene_config_from_json(*s, r.at("scene"));
  r.read("count", c.count);
  r.read("write_tsdf", c.write_tsdf);
  if (const Json* t = r.take("tsdf")) c.tsdf = tsdf_options_from_json(*t, r.at("tsdf"));
  r.finish();
  rethrow_with_path(path, c);
  return c;
}

// --- files --------------------------------------------------------------------

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace sscgan
