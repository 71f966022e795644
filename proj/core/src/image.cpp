#include "pqi/image.hpp"

#include <algorithm>
#include <cmath>

namespace pqi {

Rect clamp_rect(const Rect& r, int width, int height) noexcept {
  return Rect{std::max(r.x0, 0), std::max(r.y0, 0), std::min(r.x1, width - 1), std::min(r.y1, height - 1)};
}

RgbImage::RgbImage(int width, int height, Pixel fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("image dimensions must be at least 1x1");
  }
  data_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill[0];
    data_[i + 1] = fill[1];
    data_[i + 2] = fill[2];
  }
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("image dimensions must be at least 1x1");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw InvalidArgument("RGB buffer length does not match width x height x 3");
  }
}

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  // Integer form of round(0.299 R + 0.587 G + 0.114 B), halves rounded up.
  const int weighted = 299 * r + 587 * g + 114 * b;
  return static_cast<std::uint8_t>(std::min((weighted + 500) / 1000, 255));
}

GrayImage to_grayscale(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  const auto src = img.bytes();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = luma(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  }
  return out;
}

IntegralImage build_integral(const GrayImage& img) { return IntegralImage(img); }

RealIntegralImage build_integral(const RealImage& img) { return RealIntegralImage(img); }

double rect_sum(const IntegralImage& ii, const Rect& r) noexcept { return static_cast<double>(ii.sum(r)); }

double rect_sum(const RealIntegralImage& ii, const Rect& r) noexcept { return ii.sum(r); }

RealImage to_real(const GrayImage& img) {
  RealImage out(img.width(), img.height());
  std::ranges::copy(img.pixels(), out.pixels().begin());
  return out;
}

RgbImage resize_bilinear(const RgbImage& img, int width, int height) {
  if (width == img.width() && height == img.height()) {
    return img;
  }
  RgbImage out(width, height);
  const double sx = static_cast<double>(img.width()) / width;
  const double sy = static_cast<double>(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double wx = fx - x0;
      const auto a = img.at(x0, y0);
      const auto b = img.at(x1, y0);
      const auto c = img.at(x0, y1);
      const auto d = img.at(x1, y1);
      RgbImage::Pixel px;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = a[ch] + (b[ch] - a[ch]) * wx;
        const double bottom = c[ch] + (d[ch] - c[ch]) * wx;
        px[ch] = static_cast<std::uint8_t>(std::clamp(std::round(top + (bottom - top) * wy), 0.0, 255.0));
      }
      out.set(x, y, px);
    }
  }
  return out;
}

}  // namespace pqi
