#include <gtest/gtest.h>

#include <fstream>

#include "sscgan/config.hpp"
#include "sscgan/error.hpp"
#include "support.hpp"

namespace sscgan {
namespace {

template <class F>
std::string config_error(F f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, TrainRoundTrip) {
  TrainConfig c;
  c.batch_size = 2;
  c.steps = 17;
  c.seed = 99;
  c.conditional = false;
  c.adv_loss = AdvLoss::kLocal;
  c.mce_reduction = MceReduction::kSum;
  c.loss.lambda = 0.3;
  c.loss.mode = AdversarialMode::kNonSaturating;
  c.generator_optimizer.momentum = 0.9;
  c.discriminator_optimizer.beta1 = 0.5;
  c.generator_widths = {8, 12};
  c.disc_norm = nn::Normalization::kBatch;
  c.local_single_channel = true;
  c.tsdf.flipped = true;
  const Json j = to_json(c);
  const TrainConfig back = train_config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.adv_loss, AdvLoss::kLocal);
  EXPECT_EQ(back.generator_widths, (std::vector<int>{8, 12}));
  EXPECT_EQ(back.variant_name(), "SSC-GAN-LL");
}

TEST(Config, PartialTrainConfigUsesDefaults) {
  const TrainConfig c = train_config_from_json(Json::parse(R"({"steps": 3, "loss": {"lambda": 0.5}})"));
  EXPECT_EQ(c.steps, 3);
  EXPECT_EQ(c.loss.lambda, 0.5);
  EXPECT_EQ(c.loss.smoothing, 0.1);
  EXPECT_EQ(c.batch_size, 4);
  EXPECT_EQ(c.variant_name(), "SSC-cGAN-GL");
}

TEST(Config, GenDataRoundTrip) {
  GenDataConfig c;
  c.count = 3;
  c.write_tsdf = true;
  c.scene.seed = 40;
  c.scene.grid.num_classes = 8;
  c.scene.class_priors = default_class_priors(8);
  c.scene.intrinsics.fx = 55.5;
  const Json j = to_json(c);
  const GenDataConfig back = gen_data_config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.scene.class_priors.size(), 4u);
}

TEST(Config, NetSpecRoundTrip) {
  GridSpec g;
  g.num_classes = 5;
  nn::NetSpec s = nn::NetSpec::discriminator(nn::NetKind::kDiscLocal, g, true);
  s.leaky_slope = 0.1;
  const Json j = to_json(s);
  EXPECT_EQ(to_json(net_spec_from_json(j)), j);
}

TEST(Config, UnknownKeysAreRejectedWithPath) {
  EXPECT_NE(config_error([] { train_config_from_json(Json::parse(R"({"stpes": 3})")); }).find("train.stpes"),
            std::string::npos);
  EXPECT_NE(config_error([] { train_config_from_json(Json::parse(R"({"loss": {"lamda": 1}})")); })
                .find("train.loss.lamda"),
            std::string::npos);
  EXPECT_NE(config_error([] { gen_data_config_from_json(Json::parse(R"({"scene": {"grid": {"hieght": 3}}})")); })
                .find("gen-data.scene.grid.hieght"),
            std::string::npos);
}

TEST(Config, WrongTypesAndValuesAreRejected) {
  EXPECT_NE(config_error([] { train_config_from_json(Json::parse(R"({"steps": "ten"})")); }).find("train.steps"),
            std::string::npos);
  EXPECT_NE(config_error([] { train_config_from_json(Json::parse(R"({"adv_loss": "regional"})")); })
                .find("train.adv_loss"),
            std::string::npos);
  EXPECT_FALSE(config_error([] { train_config_from_json(Json::parse(R"({"loss": {"lambda": -1}})")); }).empty());
  EXPECT_FALSE(config_error([] { train_config_from_json(Json::parse(R"({"batch_size": 0})")); }).empty());
  EXPECT_FALSE(config_error([] { train_config_from_json(Json::parse("[1, 2]")); }).empty());
  EXPECT_FALSE(config_error([] { gen_data_config_from_json(Json::parse(R"({"count": 0})")); }).empty());
  EXPECT_FALSE(config_error([] { grid_from_json(Json::parse(R"({"height": -2})")); }).empty());
}

TEST(Config, FileHelpers) {
  test::TempDir dir;
  const Json j = to_json(TrainConfig{});
  write_json_file(dir / "t.json", j);
  EXPECT_EQ(read_json_file(dir / "t.json"), j);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(read_json_file(dir / "bad.json"), ConfigError);
  EXPECT_THROW(read_json_file(dir / "missing.json"), Error);
}

TEST(Config, EnumNames) {
  EXPECT_EQ(to_string(AdversarialMode::kMinimax), "minimax");
  EXPECT_EQ(to_string(AdvLoss::kLocal), "local");
  EXPECT_EQ(to_string(MceReduction::kSum), "sum");
  EXPECT_EQ(to_string(nn::Normalization::kInstance), "instance");
  EXPECT_EQ(to_string(nn::NetKind::kDiscGlobal), "disc_global");
}

}  // namespace
}  // namespace sscgan
