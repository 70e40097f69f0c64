#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "sscgan/losses.hpp"
#include "sscgan/nets.hpp"
#include "sscgan/scenegen.hpp"
#include "sscgan/train.hpp"
#include "sscgan/tsdf.hpp"
#include "sscgan/voxcore.hpp"

// JSON (de)serialization of every configuration type. Readers start from the
// defaults, reject unknown keys and wrongly typed values with a ConfigError
// naming the key path, and validate the result. Writers emit every field so
// a written config round-trips to the same resolved values.
namespace sscgan {

using Json = nlohmann::ordered_json;

Json to_json(const GridSpec& grid);
GridSpec grid_from_json(const Json& j, const std::string& path = "grid");

Json to_json(const Intrinsics& intrinsics);
Intrinsics intrinsics_from_json(const Json& j, const std::string& path = "intrinsics");

Json to_json(const SceneConfig& config);
SceneConfig scene_config_from_json(const Json& j, const std::string& path = "scene");

Json to_json(const TsdfOptions& options);
TsdfOptions tsdf_options_from_json(const Json& j, const std::string& path = "tsdf");

Json to_json(const LossConfig& config);
LossConfig loss_config_from_json(const Json& j, const std::string& path = "loss");

Json to_json(const nn::NetSpec& spec);
nn::NetSpec net_spec_from_json(const Json& j, const std::string& path = "net");

Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j, const std::string& path = "train");

// Configuration of the gen-data command.
struct GenDataConfig {
  SceneConfig scene;  // scene.seed is the first seed
  int count = 8;
  bool write_tsdf = false;
  TsdfOptions tsdf;

  void validate() const;
};

Json to_json(const GenDataConfig& config);
GenDataConfig gen_data_config_from_json(const Json& j, const std::string& path = "gen-data");

std::string to_string(AdversarialMode mode);
std::string to_string(AdvLoss loss);
std::string to_string(MceReduction reduction);
std::string to_string(nn::Normalization norm);
std::string to_string(nn::NetKind kind);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace sscgan
