#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "pqi/detection.hpp"
#include "pqi/image.hpp"

namespace pqi::fixtures {

struct Scene {
  RgbImage image;
  DetectionSet detections;
};

inline constexpr int kSceneWidth = 640;
inline constexpr int kSceneHeight = 360;
inline constexpr int kSceneCount = 20;

inline std::string scene_id(int index) {
  std::string n = std::to_string(index);
  return "scene_" + std::string(2 - std::min<std::size_t>(2, n.size()), '0') + n;
}

namespace detail {

inline std::uint8_t byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

inline void fill_rect(RgbImage& img, int x0, int y0, int x1, int y1, RgbImage::Pixel c) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width() - 1);
  y1 = std::min(y1, img.height() - 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      img.set(x, y, c);
    }
  }
}

}  // namespace detail

/// Synthetic dashcam-like frame: sky, roadside blocks, a perspective road with
/// lane dashes, and a few vehicles and pedestrians. Vehicles and pedestrians
/// come back as detections with seeded confidences; some fall below 0.4.
inline Scene make_scene(std::uint64_t seed, int width = kSceneWidth, int height = kSceneHeight) {
  using detail::byte;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u(rng); };

  RgbImage img(width, height);
  const int horizon = static_cast<int>(height * uni(0.35, 0.48));
  const double vx = width * uni(0.4, 0.6);
  const double sky_top = uni(80, 120);
  const double ground = uni(60, 95);
  const double road = uni(70, 105);

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (y < horizon) {
        const double t = static_cast<double>(y) / horizon;
        img.set(x, y, {byte(sky_top * 0.6 + 30 * t), byte(sky_top * 0.8 + 25 * t), byte(sky_top + 30 * t)});
        continue;
      }
      const double depth = static_cast<double>(y - horizon) / (height - horizon);
      const double half = 0.04 * width + depth * 0.55 * width;
      const double dx = x - vx;
      if (std::abs(dx) <= half) {
        const bool dash = std::abs(dx) < 1 + depth * 3 && static_cast<int>(depth * 40) % 3 == 0;
        const double g = dash ? 215 : road + 12 * depth;
        img.set(x, y, {byte(g), byte(g), byte(g + 4)});
      } else {
        img.set(x, y, {byte(ground * 0.8), byte(ground + 20 * depth), byte(ground * 0.55)});
      }
    }
  }

  // roadside blocks above the horizon
  const int blocks = 3 + static_cast<int>(u(rng) * 5);
  for (int b = 0; b < blocks; ++b) {
    const int w = static_cast<int>(uni(0.05, 0.14) * width);
    const int h = static_cast<int>(uni(0.1, 0.3) * height);
    const int x0 = static_cast<int>(u(rng) * (width - w));
    const double shade = uni(40, 120);
    detail::fill_rect(img, x0, horizon - h, x0 + w, horizon - 1,
                      {byte(shade), byte(shade * uni(0.8, 1.1)), byte(shade * uni(0.7, 1.0))});
  }

  Scene scene;
  scene.detections.coords = CoordMode::Absolute;
  const int vehicles = 1 + static_cast<int>(u(rng) * 4);
  for (int v = 0; v < vehicles; ++v) {
    const double depth = uni(0.15, 0.9);
    const int yb = horizon + static_cast<int>(depth * (height - horizon));
    const int w = static_cast<int>((0.06 + 0.22 * depth) * width);
    const int h = static_cast<int>(w * uni(0.6, 0.85));
    const double half = 0.04 * width + depth * 0.55 * width;
    const int xc = static_cast<int>(vx + uni(-0.7, 0.7) * half);
    const RgbImage::Pixel body{byte(uni(20, 230)), byte(uni(20, 230)), byte(uni(20, 230))};
    const int x0 = xc - w / 2;
    const int y0 = yb - h;
    detail::fill_rect(img, x0, y0, x0 + w, yb, body);
    detail::fill_rect(img, x0 + w / 6, y0 + h / 8, x0 + w - w / 6, y0 + h / 2, {30, 35, 45});
    detail::fill_rect(img, x0 + 2, yb - h / 5, x0 + w / 6, yb - h / 8, {230, 40, 30});
    detail::fill_rect(img, x0 + w - w / 6, yb - h / 5, x0 + w - 2, yb - h / 8, {230, 40, 30});
    scene.detections.detections.push_back(
        {Box{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x0 + w), static_cast<double>(yb)}, 2,
         std::round(uni(0.25, 0.99) * 100) / 100});
  }
  if (u(rng) < 0.5) {
    const double depth = uni(0.3, 0.8);
    const int yb = horizon + static_cast<int>(depth * (height - horizon));
    const int h = static_cast<int>((0.1 + 0.25 * depth) * height);
    const int w = std::max(3, h / 3);
    const int x0 = static_cast<int>(u(rng) < 0.5 ? uni(0.02, 0.2) * width : uni(0.75, 0.95) * width);
    detail::fill_rect(img, x0, yb - h, x0 + w, yb, {byte(uni(150, 250)), byte(uni(40, 120)), byte(uni(40, 200))});
    detail::fill_rect(img, x0 + w / 4, yb - h, x0 + w - w / 4, yb - h + h / 6, {220, 180, 150});
    scene.detections.detections.push_back(
        {Box{static_cast<double>(x0), static_cast<double>(yb - h), static_cast<double>(x0 + w), static_cast<double>(yb)},
         0, std::round(uni(0.3, 0.95) * 100) / 100});
  }

  std::uniform_int_distribution<int> noise(-2, 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      auto p = img.at(x, y);
      for (int c = 0; c < 3; ++c) {
        p[c] = byte(p[c] + noise(rng));
      }
      img.set(x, y, p);
    }
  }
  scene.image = std::move(img);
  return scene;
}

}  // namespace pqi::fixtures
