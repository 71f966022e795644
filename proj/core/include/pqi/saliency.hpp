#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pqi/image.hpp"

namespace pqi {

/// Non-negative per-pixel saliency intensities, same grid as the source image.
class SaliencyMap : public Plane<double> {
public:
  using Plane<double>::Plane;
  SaliencyMap() = default;
  explicit SaliencyMap(Plane<double> plane) : Plane<double>(std::move(plane)) {}

  [[nodiscard]] double mean() const noexcept;
  [[nodiscard]] double max() const noexcept;
};

/// Window radii are zeta = sigma * 2^s for every s in scales.
struct SaliencyParams {
  int sigma = 1;
  std::vector<int> scales{0, 1, 2, 3, 4, 5};

  /// Throws InvalidArgument when sigma < 1, scales is empty, or any s < 0.
  void validate() const;
  [[nodiscard]] std::vector<int> radii() const;
};

/// Mean intensity of the window [x-zeta, x+zeta] x [y-zeta, y+zeta], clamped
/// to the image, excluding the center pixel. 0 if the window holds only the center.
[[nodiscard]] double surround(const IntegralImage& ii, const GrayImage& img, int x, int y, int zeta);
[[nodiscard]] double surround(const RealIntegralImage& ii, const RealImage& img, int x, int y, int zeta);

[[nodiscard]] inline double center(const GrayImage& img, int x, int y) noexcept { return img.at(x, y); }
[[nodiscard]] inline double center(const RealImage& img, int x, int y) noexcept { return img.at(x, y); }

/// Per-pixel max(center - surround, 0) at a single radius.
[[nodiscard]] SaliencyMap submap(const GrayImage& img, const IntegralImage& ii, int zeta, unsigned threads = 1);
[[nodiscard]] SaliencyMap submap(const RealImage& img, const RealIntegralImage& ii, int zeta, unsigned threads = 1);

/// Element-wise sum of submaps over every radius in params; not renormalized.
[[nodiscard]] SaliencyMap fine_grained_saliency(const GrayImage& img, const SaliencyParams& params = {},
                                                unsigned threads = 1);
[[nodiscard]] SaliencyMap fine_grained_saliency(const RealImage& img, const SaliencyParams& params = {},
                                                unsigned threads = 1);

/// 8-bit PNG with [0, max] mapped linearly to [0, 255]; max is written to
/// `<path>.max.txt`.
void export_saliency_png(const std::filesystem::path& path, const SaliencyMap& map);

/// Raw little-endian dump: "PQISMAP1", u32 width, u32 height, then float32 entries row-major.
void export_saliency_raw(const std::filesystem::path& path, const SaliencyMap& map);
[[nodiscard]] SaliencyMap import_saliency_raw(const std::filesystem::path& path);

}  // namespace pqi
