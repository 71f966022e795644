#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "pqi/metrics.hpp"
#include "pqi/spanet.hpp"
#include "support/oracles.hpp"

namespace pqi {
namespace {

using nn::Mat;
using nn::RowVec;

// 64 px input, 16 tokens of 3x16x16, 12 superpixels.
SpaNetConfig tiny_config() {
  SpaNetConfig cfg;
  cfg.image_side = 64;
  cfg.patch_side = 16;
  cfg.heads = 2;
  cfg.token_dim = 8;
  cfg.ffn_dim = 16;
  cfg.superpixel_k = 12;
  return cfg;
}

SuperpixelBlock random_block(std::mt19937_64& rng, int k, int valid) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SuperpixelBlock b;
  b.features = Mat::Zero(k, kSuperpixelFeatureDim);
  b.encodings = Mat::Zero(k, kSuperpixelEncodingDim);
  b.mask.assign(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < valid; ++i) {
    for (int c = 0; c < kSuperpixelFeatureDim; ++c) {
      b.features(i, c) = u(rng);
    }
    for (int c = 0; c < kSuperpixelEncodingDim; ++c) {
      b.encodings(i, c) = u(rng);
    }
    b.mask[static_cast<std::size_t>(i)] = 1;
  }
  return b;
}

SpaNetInput random_input(std::mt19937_64& rng, const SpaNetConfig& cfg, int valid) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SpaNetInput in;
  in.tokens = Mat(cfg.num_patches(), cfg.patch_dim());
  for (nn::Index i = 0; i < in.tokens.size(); ++i) {
    in.tokens.data()[i] = u(rng);
  }
  in.superpixels = random_block(rng, std::max(cfg.superpixel_k, 1), valid);
  return in;
}

void randomize_all(SpaNetModel& m, std::uint64_t seed, double sd = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  for (auto& t : m.parameters()) {
    for (nn::Index i = 0; i < t.size(); ++i) {
      t.data()[i] = n(rng);
    }
  }
}

TEST(SpaNetConfigTest, Defaults) {
  const SpaNetConfig cfg;
  EXPECT_EQ(cfg.image_side, 512);
  EXPECT_EQ(cfg.patch_side, 32);
  EXPECT_EQ(cfg.num_patches(), 256);
  EXPECT_EQ(cfg.patch_dim(), 3 * 32 * 32);
  EXPECT_EQ(cfg.heads, 8);
  EXPECT_EQ(cfg.layers, 2);
  EXPECT_EQ(cfg.token_dim, 256);
  EXPECT_EQ(cfg.branch_out, 1024);
  EXPECT_EQ(cfg.fused_dim(), 2048);
  EXPECT_EQ(cfg.superpixel_k, 500);
  EXPECT_EQ(cfg.superpixel_feat, 6);
  EXPECT_EQ(cfg.head_hidden, 18);
  EXPECT_NO_THROW(cfg.validate());
  const SpaNetConfig desk = SpaNetConfig::desk_scale();
  EXPECT_EQ(desk.num_patches(), 256);
  EXPECT_EQ(desk.superpixel_k, 500);
  EXPECT_NO_THROW(desk.validate());
}

TEST(SpaNetConfigTest, Validation) {
  SpaNetConfig cfg;
  cfg.image_side = 500;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = SpaNetConfig{};
  cfg.heads = 7;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = SpaNetConfig{};
  cfg.branch_out = 512;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = SpaNetConfig{};
  cfg.head_hidden = 32;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = SpaNetConfig{};
  cfg.superpixel_k = -1;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(SpaNetConfigTest, SerializeRoundTrip) {
  SpaNetConfig cfg = tiny_config();
  cfg.use_pos_encoding = false;
  cfg.activation = nn::Activation::Identity;
  cfg.init_std = 0.125;
  EXPECT_EQ(SpaNetConfig::deserialize(cfg.serialize()), cfg);
  EXPECT_THROW((void)SpaNetConfig::deserialize("heads=two\n"), DataError);
}

TEST(TrainConfigTest, Defaults) {
  const TrainConfig tc;
  EXPECT_EQ(tc.epochs, 50);
  EXPECT_DOUBLE_EQ(tc.lr_max, 2e-5);
  EXPECT_DOUBLE_EQ(tc.lr_min, 1e-6);
  EXPECT_DOUBLE_EQ(learning_rate(tc, 0), 2e-5);
  EXPECT_NEAR(learning_rate(tc, 49), 1e-6, 1e-18);
  EXPECT_NEAR(learning_rate(tc, 0) - learning_rate(tc, 25), 0.5 * (2e-5 - 1e-6) * (1 - std::cos(M_PI * 25 / 49)), 1e-18);
  for (int e = 1; e < tc.epochs; ++e) {
    EXPECT_LT(learning_rate(tc, e), learning_rate(tc, e - 1));
  }
}

TEST(PatchifyTest, ShapesAndLocality) {
  const SpaNetConfig cfg;
  const Mat zero = patchify(RgbImage(512, 512), cfg);
  EXPECT_EQ(zero.rows(), 256);
  EXPECT_EQ(zero.cols(), 3072);
  EXPECT_TRUE(zero.isZero());

  RgbImage img(512, 512);
  img.set(0, 0, {255, 0, 0});
  const Mat one = patchify(img, cfg);
  EXPECT_DOUBLE_EQ(one(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(one.sum(), 1.0);

  RgbImage img2(512, 512);
  // Patch (row 1, col 2), pixel (x=3, y=5) inside it, green channel.
  img2.set(2 * 32 + 3, 32 + 5, {0, 51, 0});
  const Mat t = patchify(img2, cfg);
  EXPECT_DOUBLE_EQ(t(16 + 2, 1024 + 5 * 32 + 3), 0.2);
  EXPECT_DOUBLE_EQ(t.sum(), 0.2);

  EXPECT_THROW((void)patchify(RgbImage(256, 512), cfg), InvalidArgument);
}

TEST(PrepareInputTest, ResizesAndPads) {
  const SpaNetConfig cfg = tiny_config();
  std::mt19937_64 rng(1);
  const SpaNetInput in = prepare_input(oracle::random_rgb(rng, 90, 70), cfg, {cfg.superpixel_k, 10.0, 5});
  EXPECT_EQ(in.tokens.rows(), 16);
  EXPECT_EQ(in.tokens.cols(), 768);
  EXPECT_EQ(in.superpixels.rows(), 12);
  EXPECT_GE(in.superpixels.valid_count(), 1);
}

TEST(SpaNetModelTest, BranchShapesAtFullScale) {
  SpaNetModel m(SpaNetConfig::desk_scale());
  m.initialize(3);
  std::mt19937_64 rng(2);
  const SpaNetInput in = random_input(rng, m.config(), 37);
  EXPECT_EQ(m.pixel_branch_forward(in.tokens).size(), 1024);
  EXPECT_EQ(m.superpixel_branch_forward(in.superpixels).size(), 1024);
  EXPECT_EQ(m.parameter("head.hidden.weight").rows(), 18);
  EXPECT_EQ(m.parameter("head.hidden.weight").cols(), 2048);
  EXPECT_EQ(m.parameter("head.output.weight").rows(), 1);
  EXPECT_EQ(m.parameter("superpixel.feature_proj.weight").cols(), 6);
  EXPECT_TRUE(std::isfinite(m.predict(in)));
}

TEST(SpaNetModelTest, DeadNetworkReturnsBiases) {
  SpaNetModel m(tiny_config());
  std::mt19937_64 rng(3);
  const SpaNetInput in = random_input(rng, m.config(), 5);
  m.parameter("pixel.out.bias").row(0).setLinSpaced(1024, -1.0, 1.0);
  EXPECT_TRUE(m.pixel_branch_forward(in.tokens).isApprox(m.parameter("pixel.out.bias").row(0)));
  m.parameter("superpixel.out.bias").setConstant(0.25);
  EXPECT_TRUE(m.superpixel_branch_forward(in.superpixels).isApprox(m.parameter("superpixel.out.bias").row(0)));
  m.parameter("head.output.bias").setConstant(7.5);
  EXPECT_DOUBLE_EQ(m.predict(in), 7.5);
}

TEST(SpaNetModelTest, PixelBranchPermutationInvariance) {
  SpaNetModel m(tiny_config());
  randomize_all(m, 4);
  std::mt19937_64 rng(5);
  SpaNetInput in = random_input(rng, m.config(), 5);
  const RowVec before = m.pixel_branch_forward(in.tokens);
  in.tokens.row(2).swap(in.tokens.row(9));
  m.parameter("pixel.position").row(2).swap(m.parameter("pixel.position").row(9));
  EXPECT_TRUE(m.pixel_branch_forward(in.tokens).isApprox(before, 1e-12));
}

TEST(SpaNetModelTest, MaskedSuperpixelsAreIgnored) {
  SpaNetModel m(tiny_config());
  randomize_all(m, 6);
  std::mt19937_64 rng(7);
  SpaNetInput in = random_input(rng, m.config(), 7);
  const double before = m.predict(in);
  in.superpixels.features.row(9).setConstant(42.0);
  in.superpixels.encodings.row(11).setConstant(-3.0);
  EXPECT_NEAR(m.predict(in), before, 1e-12);

  nn::Tensors g = m.layout().zeros();
  Mat d_features;
  m.squared_error_gradient(in, 1.0, g, &d_features);
  ASSERT_EQ(d_features.rows(), 12);
  for (int r = 7; r < 12; ++r) {
    EXPECT_TRUE(d_features.row(r).isZero(0.0)) << "row " << r;
  }
  EXPECT_FALSE(d_features.topRows(7).isZero());
}

TEST(SpaNetModelTest, SingleValidSuperpixelMatchesOneTokenModel) {
  SpaNetConfig big = tiny_config();
  SpaNetConfig one = big;
  one.superpixel_k = 1;
  SpaNetModel a(big);
  SpaNetModel b(one);
  randomize_all(a, 8);
  for (const auto& spec : b.layout().specs()) {
    if (spec.name.rfind("superpixel.", 0) == 0) {
      b.parameter(spec.name) = a.parameter(spec.name);
    }
  }
  std::mt19937_64 rng(9);
  const SuperpixelBlock block = random_block(rng, 12, 1);
  SuperpixelBlock single;
  single.features = block.features.topRows(1);
  single.encodings = block.encodings.topRows(1);
  single.mask = {1};
  EXPECT_TRUE(a.superpixel_branch_forward(block).isApprox(b.superpixel_branch_forward(single), 1e-12));
}

TEST(SpaNetModelTest, SwappingBranchesChangesOutput) {
  SpaNetModel m(tiny_config());
  randomize_all(m, 10);
  std::mt19937_64 rng(11);
  const SpaNetInput in = random_input(rng, m.config(), 6);
  const RowVec p = m.pixel_branch_forward(in.tokens);
  const RowVec s = m.superpixel_branch_forward(in.superpixels);
  EXPECT_DOUBLE_EQ(m.fuse_and_regress(p, s), m.predict(in));
  EXPECT_GT(std::abs(m.fuse_and_regress(p, s) - m.fuse_and_regress(s, p)), 1e-6);
}

TEST(SpaNetModelTest, PositionalEncodingMatters) {
  SpaNetConfig with = tiny_config();
  SpaNetConfig without = with;
  without.use_pos_encoding = false;
  SpaNetModel a(with);
  SpaNetModel b(without);
  randomize_all(a, 12);
  EXPECT_LT(b.layout().parameter_count(), a.layout().parameter_count());
  for (const auto& spec : b.layout().specs()) {
    b.parameter(spec.name) = a.parameter(spec.name);
  }
  std::mt19937_64 rng(13);
  const SpaNetInput in = random_input(rng, with, 8);
  EXPECT_GT(std::abs(a.predict(in) - b.predict(in)), 1e-9);
}

TEST(SpaNetModelTest, PixelOnlyVariant) {
  SpaNetConfig cfg = tiny_config();
  cfg.superpixel_k = 0;
  SpaNetModel m(cfg);
  randomize_all(m, 14);
  EXPECT_FALSE(m.layout().find("superpixel.out.weight").has_value());
  std::mt19937_64 rng(15);
  const SpaNetInput in = random_input(rng, cfg, 1);
  EXPECT_TRUE(std::isfinite(m.predict(in)));
  EXPECT_EQ(AblationVariant::parse("no_superpixel").superpixel_k, 0);
  EXPECT_EQ(AblationVariant::parse("k=100").superpixel_k, 100);
  EXPECT_FALSE(AblationVariant::parse("no_pos_encoding").use_pos_encoding);
  EXPECT_EQ(AblationVariant::parse("full").superpixel_k, -1);
  EXPECT_THROW((void)AblationVariant::parse("k=abc"), InvalidArgument);
  EXPECT_THROW((void)AblationVariant::parse("bogus"), InvalidArgument);
}

TEST(SpaNetModelTest, NonFiniteActivationsAreHardErrors) {
  SpaNetModel m(tiny_config());
  m.initialize(16);
  m.parameter("pixel.patch_proj.weight")(0, 0) = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(17);
  const SpaNetInput in = random_input(rng, m.config(), 3);
  EXPECT_THROW((void)m.predict(in), NumericalError);
}

TEST(SpaNetModelTest, RejectsWrongShapes) {
  SpaNetModel m(tiny_config());
  std::mt19937_64 rng(18);
  SpaNetInput in = random_input(rng, m.config(), 3);
  EXPECT_THROW((void)m.pixel_branch_forward(Mat::Zero(15, 768)), InvalidArgument);
  SuperpixelBlock none = random_block(rng, 12, 0);
  EXPECT_THROW((void)m.superpixel_branch_forward(none), InvalidArgument);
  EXPECT_THROW((void)m.superpixel_branch_forward(random_block(rng, 11, 3)), InvalidArgument);
}

TEST(GradientCheckTest, FullConfiguration) {
  SpaNetModel m(tiny_config());
  m.initialize(19);
  randomize_all(m, 20, 0.2);
  std::mt19937_64 rng(21);
  const SpaNetSample sample{"s", random_input(rng, m.config(), 9), 2.0};
  GradientCheckOptions opt;
  opt.samples = 400;
  const auto r = gradient_check(m, sample, opt);
  EXPECT_EQ(r.checked, 400u);
  EXPECT_EQ(r.per_tensor.size(), m.layout().size());
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(GradientCheckTest, LinearDegenerateConfiguration) {
  SpaNetConfig cfg = tiny_config();
  cfg.layers = 0;
  cfg.activation = nn::Activation::Identity;
  cfg.normalize_branches = false;
  SpaNetModel m(cfg);
  randomize_all(m, 22, 0.1);
  std::mt19937_64 rng(23);
  const SpaNetSample sample{"s", random_input(rng, cfg, 9), 1.0};
  EXPECT_LT(gradient_check(m, sample).max_rel_error, 1e-8);
}

std::vector<SpaNetSample> tiny_dataset(const SpaNetConfig& cfg, int n, double constant = NAN) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> t(0.0, 4.0);
  std::vector<SpaNetSample> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({std::to_string(i), random_input(rng, cfg, 3 + i % 9), std::isnan(constant) ? t(rng) : constant});
  }
  return out;
}

TEST(TrainTest, ConstantTargetConverges) {
  const SpaNetConfig cfg = tiny_config();
  SpaNetModel m(cfg);
  m.initialize(25);
  const auto data = tiny_dataset(cfg, 6, 3.0);
  TrainConfig tc;
  tc.epochs = 150;
  tc.lr_max = 3e-3;
  tc.lr_min = 1e-5;
  tc.batch_size = 3;
  const auto result = train(m, data, {}, tc);
  EXPECT_EQ(result.history.size(), 150u);
  EXPECT_LT(result.history.back().train_loss, 1e-4);
  EXPECT_NEAR(m.predict(data[0].input), 3.0, 1e-2);
}

TEST(TrainTest, DeterministicAndThreadCountInvariant) {
  const SpaNetConfig cfg = tiny_config();
  const auto data = tiny_dataset(cfg, 7);
  TrainConfig tc;
  tc.epochs = 4;
  tc.lr_max = 1e-3;
  tc.lr_min = 1e-4;
  tc.batch_size = 3;
  tc.seed = 9;
  auto run = [&](unsigned threads) {
    SpaNetModel m(cfg);
    m.initialize(26);
    TrainConfig c = tc;
    c.threads = threads;
    std::vector<double> losses;
    for (const auto& r : train(m, data, data, c).history) {
      losses.push_back(r.train_loss);
      losses.push_back(r.val_loss);
    }
    losses.push_back(m.predict(data[0].input));
    return losses;
  };
  const auto a = run(1);
  EXPECT_EQ(a, run(1));
  EXPECT_EQ(a, run(3));
}

TEST(TrainTest, StopWhenEndsEarly) {
  const SpaNetConfig cfg = tiny_config();
  SpaNetModel m(cfg);
  m.initialize(27);
  TrainConfig tc;
  tc.epochs = 20;
  tc.stop_when = [](const EpochRecord& r, const SpaNetModel&) { return r.epoch == 2; };
  EXPECT_EQ(train(m, tiny_dataset(cfg, 3), {}, tc).history.size(), 3u);
}

TEST(TrainTest, InvalidInputs) {
  const SpaNetConfig cfg = tiny_config();
  SpaNetModel m(cfg);
  TrainConfig tc;
  EXPECT_THROW((void)train(m, {}, {}, tc), InvalidArgument);
  auto data = tiny_dataset(cfg, 2);
  data[1].target = NAN;
  EXPECT_THROW((void)train(m, data, {}, tc), InvalidArgument);
  tc.lr_min = 1.0;
  EXPECT_THROW((void)train(m, tiny_dataset(cfg, 2), {}, tc), InvalidArgument);
}

TEST(TrainTest, DivergenceRaisesNumericalError) {
  const SpaNetConfig cfg = tiny_config();
  SpaNetModel m(cfg);
  m.initialize(28);
  auto data = tiny_dataset(cfg, 2);
  data[0].target = 1e300;
  TrainConfig tc;
  tc.epochs = 2;
  EXPECT_THROW((void)train(m, data, {}, tc), NumericalError);
}

TEST(CheckpointTest, RoundTripAndVersionMismatch) {
  SpaNetConfig cfg = tiny_config();
  cfg.use_pos_encoding = false;
  SpaNetModel m(cfg);
  m.initialize(29);
  const auto dir = std::filesystem::temp_directory_path() / "pqi_checkpoint_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.spanet";
  save_checkpoint(path, m);
  const SpaNetModel loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.config(), cfg);
  ASSERT_EQ(loaded.parameters().size(), m.parameters().size());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    // Stored as float32.
    EXPECT_TRUE(loaded.parameters()[i].isApprox(m.parameters()[i].cast<float>().cast<double>(), 0.0));
  }

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  EXPECT_EQ(bytes.substr(0, 8), "SPANET01");
  std::string bumped = bytes;
  bumped[8] = 2;
  std::ofstream(dir / "v2.spanet", std::ios::binary) << bumped;
  EXPECT_THROW((void)load_checkpoint(dir / "v2.spanet"), DataError);
  std::ofstream(dir / "junk.spanet", std::ios::binary) << "PNG....";
  EXPECT_THROW((void)load_checkpoint(dir / "junk.spanet"), DataError);
  std::ofstream(dir / "short.spanet", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_THROW((void)load_checkpoint(dir / "short.spanet"), DataError);
  EXPECT_THROW((void)load_checkpoint(dir / "missing.spanet"), DataError);
}

TEST(LossHistoryTest, WritesCsv) {
  TrainResult r;
  r.history.push_back({0, 2e-5, 1.5, NAN});
  r.history.push_back({1, 1e-6, 0.5, 0.75});
  const auto path = std::filesystem::temp_directory_path() / "pqi_loss.csv";
  write_loss_history(path, r);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(text, "epoch,lr,train_loss,val_loss\n0,2e-05,1.5,nan\n1,1e-06,0.5,0.75\n");
}

}  // namespace
}  // namespace pqi
