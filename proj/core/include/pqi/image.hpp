#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pqi/error.hpp"

namespace pqi {

/// Inclusive pixel rectangle [x0, x1] x [y0, y1].
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  [[nodiscard]] constexpr bool empty() const noexcept { return x1 < x0 || y1 < y0; }
  [[nodiscard]] constexpr long long area() const noexcept {
    return empty() ? 0 : static_cast<long long>(x1 - x0 + 1) * (y1 - y0 + 1);
  }
  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

/// Intersection of r with [0, width) x [0, height). The result may be empty.
[[nodiscard]] Rect clamp_rect(const Rect& r, int width, int height) noexcept;

/// Dense row-major single-channel grid.
template <typename T>
class Plane {
public:
  using value_type = T;

  Plane() = default;
  Plane(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw InvalidArgument("image dimensions must be at least 1x1");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Plane(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
      throw InvalidArgument("image dimensions must be at least 1x1");
    }
    if (data_.size() != static_cast<std::size_t>(width) * height) {
      throw InvalidArgument("pixel buffer length does not match width x height");
    }
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] T at(int x, int y) const noexcept { return data_[index(x, y)]; }
  [[nodiscard]] T& at(int x, int y) noexcept { return data_[index(x, y)]; }

  [[nodiscard]] std::span<const T> pixels() const noexcept { return data_; }
  [[nodiscard]] std::span<T> pixels() noexcept { return data_; }
  [[nodiscard]] std::span<const T> row(int y) const noexcept {
    return std::span<const T>(data_).subspan(static_cast<std::size_t>(y) * width_, width_);
  }
  [[nodiscard]] std::span<T> row(int y) noexcept {
    return std::span<T>(data_).subspan(static_cast<std::size_t>(y) * width_, width_);
  }

  friend bool operator==(const Plane&, const Plane&) = default;

private:
  [[nodiscard]] std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// 8-bit intensities i(x, y).
using GrayImage = Plane<std::uint8_t>;
/// Real-valued intensities; used where quantization must be bypassed.
using RealImage = Plane<double>;

/// Row-major interleaved 8-bit R,G,B.
class RgbImage {
public:
  using Pixel = std::array<std::uint8_t, 3>;

  RgbImage() = default;
  RgbImage(int width, int height, Pixel fill = {0, 0, 0});
  RgbImage(int width, int height, std::vector<std::uint8_t> data);

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t pixel_count() const noexcept { return data_.size() / 3; }

  [[nodiscard]] Pixel at(int x, int y) const noexcept {
    const std::size_t i = offset(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set(int x, int y, Pixel p) noexcept {
    const std::size_t i = offset(x, y);
    data_[i] = p[0];
    data_[i + 1] = p[1];
    data_[i + 2] = p[2];
  }

  [[nodiscard]] std::span<const std::uint8_t> bytes() const noexcept { return data_; }
  [[nodiscard]] std::span<std::uint8_t> bytes() noexcept { return data_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
  [[nodiscard]] std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Summed-area table. Entry (x, y) holds the sum over (0,0)..(x,y) inclusive.
/// Acc is a wide integer for 8-bit sources and double for real-valued ones.
template <typename Acc>
class BasicIntegralImage {
public:
  BasicIntegralImage() = default;

  template <typename T>
  explicit BasicIntegralImage(const Plane<T>& src)
      : width_(src.width()), height_(src.height()),
        table_(static_cast<std::size_t>(width_ + 1) * (height_ + 1), Acc{}) {
    const std::size_t stride = static_cast<std::size_t>(width_) + 1;
    for (int y = 0; y < height_; ++y) {
      Acc running{};
      const auto r = src.row(y);
      for (int x = 0; x < width_; ++x) {
        running += static_cast<Acc>(r[x]);
        table_[(y + 1) * stride + (x + 1)] = table_[y * stride + (x + 1)] + running;
      }
    }
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }

  /// Cumulative sum over (0,0)..(x,y).
  [[nodiscard]] Acc at(int x, int y) const noexcept { return padded(x + 1, y + 1); }

  /// Sum over r after clamping to the image; 0 for a degenerate rectangle.
  [[nodiscard]] Acc sum(const Rect& r) const noexcept {
    const Rect c = clamp_rect(r, width_, height_);
    if (c.empty()) {
      return Acc{};
    }
    return padded(c.x1 + 1, c.y1 + 1) - padded(c.x0, c.y1 + 1) - padded(c.x1 + 1, c.y0) + padded(c.x0, c.y0);
  }

private:
  [[nodiscard]] Acc padded(int px, int py) const noexcept {
    return table_[static_cast<std::size_t>(py) * (width_ + 1) + px];
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Acc> table_;
};

using IntegralImage = BasicIntegralImage<std::int64_t>;
using RealIntegralImage = BasicIntegralImage<double>;

/// ITU-R BT.601 luma, rounded and clamped to [0, 255].
[[nodiscard]] GrayImage to_grayscale(const RgbImage& img);
[[nodiscard]] std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;

[[nodiscard]] IntegralImage build_integral(const GrayImage& img);
[[nodiscard]] RealIntegralImage build_integral(const RealImage& img);

[[nodiscard]] double rect_sum(const IntegralImage& ii, const Rect& r) noexcept;
[[nodiscard]] double rect_sum(const RealIntegralImage& ii, const Rect& r) noexcept;

[[nodiscard]] RealImage to_real(const GrayImage& img);

/// Bilinear resampling with pixel-center alignment and edge clamping.
[[nodiscard]] RgbImage resize_bilinear(const RgbImage& img, int width, int height);

}  // namespace pqi
