#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pqi/augment.hpp"
#include "pqi/pqi.hpp"
#include "support/oracles.hpp"

namespace pqi {
namespace {

double mean_luma(const RgbImage& img) {
  const GrayImage g = to_grayscale(img);
  double acc = 0;
  for (const auto v : g.pixels()) {
    acc += v;
  }
  return acc / static_cast<double>(g.size());
}

TEST(ArtifactKindTest, NamesRoundTrip) {
  for (auto k : {ArtifactKind::Brightness, ArtifactKind::Darkness, ArtifactKind::Fog, ArtifactKind::Speed}) {
    EXPECT_EQ(parse_artifact_kind(to_string(k)), k);
  }
  EXPECT_FALSE(parse_artifact_kind("rain").has_value());
}

TEST(AugmentTest, LevelZeroIsIdentity) {
  std::mt19937_64 rng(1);
  const RgbImage img = oracle::random_rgb(rng, 16, 12);
  for (auto k : {ArtifactKind::Brightness, ArtifactKind::Darkness, ArtifactKind::Fog, ArtifactKind::Speed}) {
    EXPECT_EQ(apply_artifact(img, k, 0.0), img) << to_string(k);
  }
}

TEST(AugmentTest, LevelOutOfRangeThrows) {
  const RgbImage img(2, 2);
  EXPECT_THROW((void)apply_brightness(img, 1.5), InvalidArgument);
  EXPECT_THROW((void)apply_fog(img, -0.1), InvalidArgument);
  EXPECT_THROW((void)apply_speed_blur(img, NAN), InvalidArgument);
}

TEST(BrightnessTest, ScalesValueAndSaturates) {
  const RgbImage img(1, 1, RgbImage::Pixel{100, 50, 20});
  EXPECT_EQ(apply_brightness(img, 0.5).at(0, 0), (RgbImage::Pixel{150, 75, 30}));
  // Factor capped at 255 / 100 so hue is kept.
  EXPECT_EQ(apply_brightness(img, 1.0).at(0, 0), (RgbImage::Pixel{200, 100, 40}));
  const RgbImage bright(1, 1, RgbImage::Pixel{200, 120, 40});
  EXPECT_EQ(apply_brightness(bright, 1.0).at(0, 0), (RgbImage::Pixel{255, 153, 51}));
}

TEST(BrightnessTest, MonotoneLuma) {
  std::mt19937_64 rng(2);
  const RgbImage img = oracle::random_rgb(rng, 20, 20);
  double prev = mean_luma(img);
  for (const double level : default_sweep_levels()) {
    const double cur = mean_luma(apply_brightness(img, level));
    EXPECT_GE(cur, prev - 1e-12);
    prev = cur;
  }
}

TEST(DarknessTest, ScalesDownToBlack) {
  const RgbImage img(1, 1, RgbImage::Pixel{100, 50, 20});
  EXPECT_EQ(apply_darkness(img, 0.5).at(0, 0), (RgbImage::Pixel{50, 25, 10}));
  EXPECT_EQ(apply_darkness(img, 1.0).at(0, 0), (RgbImage::Pixel{0, 0, 0}));
}

TEST(FogTest, FullFogIsLiftedHaze) {
  std::mt19937_64 rng(3);
  const RgbImage fogged = apply_fog(oracle::random_rgb(rng, 8, 8), 1.0);
  EXPECT_EQ(fogged, RgbImage(8, 8, RgbImage::Pixel{220, 220, 220}));
}

TEST(FogTest, ReducesContrast) {
  std::mt19937_64 rng(4);
  const RgbImage img = oracle::random_rgb(rng, 32, 32);
  auto spread = [](const RgbImage& im) {
    const GrayImage g = to_grayscale(im);
    const auto [lo, hi] = std::minmax_element(g.pixels().begin(), g.pixels().end());
    return int(*hi) - int(*lo);
  };
  int prev = spread(img);
  for (const double level : {0.2, 0.4, 0.6, 0.8}) {
    const int cur = spread(apply_fog(img, level));
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(SpeedTest, KernelLengths) {
  EXPECT_EQ(speed_kernel_length(0.0), 1);
  EXPECT_EQ(speed_kernel_length(0.1), 3);
  EXPECT_EQ(speed_kernel_length(0.2), 5);
  EXPECT_EQ(speed_kernel_length(0.5), 9);
  EXPECT_EQ(speed_kernel_length(0.95), 15);
  EXPECT_EQ(speed_kernel_length(1.0), 15);
  for (const double level : default_sweep_levels()) {
    EXPECT_EQ(speed_kernel_length(level) % 2, 1);
  }
}

TEST(SpeedTest, HorizontalBoxBlur) {
  RgbImage img(5, 2, RgbImage::Pixel{0, 0, 0});
  img.set(2, 0, {90, 30, 3});
  const RgbImage out = apply_speed_blur(img, 0.1);
  EXPECT_EQ(out.at(1, 0), (RgbImage::Pixel{30, 10, 1}));
  EXPECT_EQ(out.at(2, 0), (RgbImage::Pixel{30, 10, 1}));
  EXPECT_EQ(out.at(3, 0), (RgbImage::Pixel{30, 10, 1}));
  EXPECT_EQ(out.at(0, 0), (RgbImage::Pixel{0, 0, 0}));
  EXPECT_EQ(out.at(2, 1), (RgbImage::Pixel{0, 0, 0}));
}

TEST(SpeedTest, VerticalStripesUntouchedByRowConstantImage) {
  RgbImage img(9, 6);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 9; ++x) {
      img.set(x, y, {static_cast<std::uint8_t>(y * 40), 7, 9});
    }
  }
  EXPECT_EQ(apply_speed_blur(img, 1.0), img);
}

TEST(SweepTest, ShapeAndLevelZeroBaseline) {
  std::mt19937_64 rng(5);
  SweepInput in;
  for (int i = 0; i < 3; ++i) {
    in.images.push_back(oracle::random_rgb(rng, 24, 18));
    in.detections.push_back(DetectionSet{"i" + std::to_string(i), CoordMode::Absolute, {{Box{2, 2, 10, 10}, 0, 0.8}}});
  }
  const SaliencyParams params{1, {0, 1, 2}};
  const auto levels = default_sweep_levels();
  const auto r = sweep(in, ArtifactKind::Darkness, levels, params, 2);
  ASSERT_EQ(r.mean_pqi.size(), levels.size());
  EXPECT_EQ(r.excluded, 0u);
  double baseline = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    baseline += compute_pqi(fine_grained_saliency(to_grayscale(in.images[i]), params), in.detections[i]).value;
  }
  EXPECT_NEAR(r.mean_pqi[0], baseline / 3, 1e-9);
  EXPECT_DOUBLE_EQ(r.mean_pqi.back(), 0.0);
  EXPECT_EQ(r.n_images.front(), 3u);

  const auto r1 = sweep(in, ArtifactKind::Darkness, levels, params, 1);
  EXPECT_EQ(r.mean_pqi, r1.mean_pqi);
}

TEST(SweepTest, FailedEvaluationsExcluded) {
  std::mt19937_64 rng(6);
  SweepInput in;
  in.images.push_back(oracle::random_rgb(rng, 10, 10));
  in.images.push_back(RgbImage{});
  in.detections.resize(2);
  const auto r = sweep(in, ArtifactKind::Fog, {0.0, 0.5}, SaliencyParams{1, {0}});
  EXPECT_EQ(r.excluded, 2u);
  EXPECT_EQ(r.n_images, (std::vector<std::size_t>{1, 1}));
  EXPECT_TRUE(std::isfinite(r.mean_pqi[0]));
}

TEST(SweepTest, InvalidArguments) {
  SweepInput in;
  EXPECT_THROW((void)sweep(in, ArtifactKind::Fog, {0.0}), InvalidArgument);
  in.images.push_back(RgbImage(4, 4));
  EXPECT_THROW((void)sweep(in, ArtifactKind::Fog, {0.0}), InvalidArgument);
  in.detections.resize(1);
  EXPECT_THROW((void)sweep(in, ArtifactKind::Fog, {0.5, 0.1}), InvalidArgument);
  EXPECT_THROW((void)sweep(in, ArtifactKind::Fog, {}), InvalidArgument);
}

}  // namespace
}  // namespace pqi
