#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "pqi/image.hpp"

namespace pqi {

struct SlicParams {
  int k_target = 500;
  double compactness = 10.0;
  int iterations = 10;
};

/// Per-pixel segment ids in [0, k_actual), row-major. Every segment is a
/// single non-empty 4-connected region.
struct SuperpixelSegmentation {
  int width = 0;
  int height = 0;
  int k_actual = 0;
  double compactness = 0;
  std::vector<int> labels;

  [[nodiscard]] int label(int x, int y) const noexcept {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
};

/// SLIC: localized k-means in (L, a, b, x, y) seeded on a regular grid,
/// followed by a pass that merges disconnected fragments into their largest
/// neighbouring segment. Deterministic. Throws InvalidArgument when
/// k_target < 1, iterations < 1 or k_target exceeds the pixel count.
[[nodiscard]] SuperpixelSegmentation slic(const RgbImage& img, const SlicParams& params = {});

struct SuperpixelFeature {
  /// Channel statistics with channels scaled to [0, 1]; std is the population std.
  std::array<double, 3> rgb_mean{};
  std::array<double, 3> rgb_std{};
  std::size_t size = 0;
  /// Mean pixel coordinate.
  double cx = 0;
  double cy = 0;
};

struct SuperpixelFeatures {
  int width = 0;
  int height = 0;
  std::vector<SuperpixelFeature> rows;
};

[[nodiscard]] SuperpixelFeatures extract_features(const RgbImage& img, const SuperpixelSegmentation& seg);

inline constexpr int kSuperpixelFeatureDim = 6;
inline constexpr int kSuperpixelEncodingDim = 3;

/// Fixed-size superpixel input: appearance features (mean RGB, std RGB),
/// encodings (size / pixel_count, (cx + 0.5) / width, (cy + 0.5) / height)
/// and a validity mask. Padding rows are zero and invalid.
struct SuperpixelBlock {
  Eigen::MatrixXd features;   // k_fixed x 6
  Eigen::MatrixXd encodings;  // k_fixed x 3
  std::vector<std::uint8_t> mask;

  [[nodiscard]] int rows() const noexcept { return static_cast<int>(mask.size()); }
  [[nodiscard]] int valid_count() const noexcept;
};

/// Keeps the first k_fixed segments; zero-fills and masks missing rows.
[[nodiscard]] SuperpixelBlock pad_or_truncate(const SuperpixelFeatures& features, int k_fixed);

/// Writes labels as a 16-bit grayscale PNG (ids above 65535 saturate).
void export_label_map(const std::filesystem::path& path, const SuperpixelSegmentation& seg);

}  // namespace pqi
