#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pqi/detection.hpp"
#include "pqi/image.hpp"
#include "pqi/saliency.hpp"

namespace pqi {

enum class ArtifactKind { Brightness, Darkness, Fog, Speed };

[[nodiscard]] const char* to_string(ArtifactKind kind) noexcept;
[[nodiscard]] std::optional<ArtifactKind> parse_artifact_kind(std::string_view name) noexcept;

inline constexpr RgbImage::Pixel kFogHaze{200, 200, 200};
inline constexpr double kFogBrightnessLift = 0.1;
inline constexpr int kMaxSpeedKernel = 15;

/// Scales the HSV value channel by (1 + level), saturating at 255. Hue and
/// saturation are preserved, so every channel of a pixel is scaled by the same
/// factor min(1 + level, 255 / max(R,G,B)).
[[nodiscard]] RgbImage apply_brightness(const RgbImage& img, double level);

/// Scales the HSV value channel by (1 - level).
[[nodiscard]] RgbImage apply_darkness(const RgbImage& img, double level);

/// Blends toward kFogHaze with weight `level`, then lifts brightness by
/// (1 + kFogBrightnessLift * level).
[[nodiscard]] RgbImage apply_fog(const RgbImage& img, double level);

/// Horizontal box blur with border replication; see speed_kernel_length.
[[nodiscard]] RgbImage apply_speed_blur(const RgbImage& img, double level);
/// 1 + round(14 * level), bumped to the next odd length, capped at 15.
[[nodiscard]] int speed_kernel_length(double level);

[[nodiscard]] RgbImage apply_artifact(const RgbImage& img, ArtifactKind kind, double level);

/// Levels 0.0, 0.1, ..., 1.0.
[[nodiscard]] std::vector<double> default_sweep_levels();

struct SweepResult {
  ArtifactKind kind = ArtifactKind::Brightness;
  std::vector<double> levels;
  std::vector<double> mean_pqi;
  /// Images that contributed at each level.
  std::vector<std::size_t> n_images;
  /// (image, level) evaluations that failed and were left out.
  std::size_t excluded = 0;
};

struct SweepInput {
  std::vector<RgbImage> images;
  /// One set per image, same order; boxes stay fixed across levels.
  std::vector<DetectionSet> detections;
};

/// For every level: degrade each image, recompute saliency and PQI against
/// the unchanged detection boxes, and average over the image set.
[[nodiscard]] SweepResult sweep(const SweepInput& input, ArtifactKind kind, const std::vector<double>& levels,
                                const SaliencyParams& params = {}, unsigned threads = 1);

}  // namespace pqi
