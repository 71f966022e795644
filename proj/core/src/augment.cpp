#include "pqi/augment.hpp"

#include <algorithm>
#include <cmath>

#include "pqi/parallel.hpp"
#include "pqi/pqi.hpp"

namespace pqi {
namespace {

void check_level(double level) {
  if (!(level >= 0.0 && level <= 1.0)) {
    throw InvalidArgument("artifact level must lie in [0, 1]");
  }
}

std::uint8_t to_byte(double v) noexcept { return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)); }

template <typename PerPixel>
RgbImage map_pixels(const RgbImage& img, PerPixel&& fn) {
  RgbImage out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.set(x, y, fn(img.at(x, y)));
    }
  }
  return out;
}

RgbImage scale_value(const RgbImage& img, double factor) {
  return map_pixels(img, [factor](RgbImage::Pixel p) {
    const int v = std::max({p[0], p[1], p[2]});
    if (v == 0) {
      return p;
    }
    const double f = std::min(factor, 255.0 / v);
    return RgbImage::Pixel{to_byte(p[0] * f), to_byte(p[1] * f), to_byte(p[2] * f)};
  });
}

}  // namespace

const char* to_string(ArtifactKind kind) noexcept {
  switch (kind) {
    case ArtifactKind::Brightness:
      return "brightness";
    case ArtifactKind::Darkness:
      return "darkness";
    case ArtifactKind::Fog:
      return "fog";
    case ArtifactKind::Speed:
      return "speed";
  }
  return "unknown";
}

std::optional<ArtifactKind> parse_artifact_kind(std::string_view name) noexcept {
  for (auto k : {ArtifactKind::Brightness, ArtifactKind::Darkness, ArtifactKind::Fog, ArtifactKind::Speed}) {
    if (name == to_string(k)) {
      return k;
    }
  }
  return std::nullopt;
}

RgbImage apply_brightness(const RgbImage& img, double level) {
  check_level(level);
  if (level == 0.0) {
    return img;
  }
  return scale_value(img, 1.0 + level);
}

RgbImage apply_darkness(const RgbImage& img, double level) {
  check_level(level);
  if (level == 0.0) {
    return img;
  }
  return scale_value(img, 1.0 - level);
}

RgbImage apply_fog(const RgbImage& img, double level) {
  check_level(level);
  if (level == 0.0) {
    return img;
  }
  const double lift = 1.0 + kFogBrightnessLift * level;
  return map_pixels(img, [&](RgbImage::Pixel p) {
    RgbImage::Pixel q;
    for (int c = 0; c < 3; ++c) {
      q[c] = to_byte(((1.0 - level) * p[c] + level * kFogHaze[c]) * lift);
    }
    return q;
  });
}

int speed_kernel_length(double level) {
  check_level(level);
  int len = 1 + static_cast<int>(std::lround(level * 14.0));
  if (len % 2 == 0) {
    ++len;
  }
  return std::min(len, kMaxSpeedKernel);
}

RgbImage apply_speed_blur(const RgbImage& img, double level) {
  const int len = speed_kernel_length(level);
  if (len == 1) {
    return img;
  }
  const int r = len / 2;
  const int w = img.width();
  RgbImage out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      int acc[3] = {0, 0, 0};
      for (int dx = -r; dx <= r; ++dx) {
        const auto p = img.at(std::clamp(x + dx, 0, w - 1), y);
        acc[0] += p[0];
        acc[1] += p[1];
        acc[2] += p[2];
      }
      out.set(x, y, {to_byte(static_cast<double>(acc[0]) / len), to_byte(static_cast<double>(acc[1]) / len),
                     to_byte(static_cast<double>(acc[2]) / len)});
    }
  }
  return out;
}

RgbImage apply_artifact(const RgbImage& img, ArtifactKind kind, double level) {
  switch (kind) {
    case ArtifactKind::Brightness:
      return apply_brightness(img, level);
    case ArtifactKind::Darkness:
      return apply_darkness(img, level);
    case ArtifactKind::Fog:
      return apply_fog(img, level);
    case ArtifactKind::Speed:
      return apply_speed_blur(img, level);
  }
  throw InvalidArgument("unknown artifact kind");
}

std::vector<double> default_sweep_levels() {
  std::vector<double> levels;
  for (int i = 0; i <= 10; ++i) {
    levels.push_back(i / 10.0);
  }
  return levels;
}

SweepResult sweep(const SweepInput& input, ArtifactKind kind, const std::vector<double>& levels,
                  const SaliencyParams& params, unsigned threads) {
  if (input.images.empty()) {
    throw InvalidArgument("sweep: no images");
  }
  if (levels.empty()) {
    throw InvalidArgument("sweep: no levels");
  }
  if (input.detections.size() != input.images.size()) {
    throw InvalidArgument("sweep: need one detection set per image");
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    check_level(levels[i]);
    if (i > 0 && !(levels[i] > levels[i - 1])) {
      throw InvalidArgument("sweep: levels must be strictly increasing");
    }
  }
  params.validate();

  const std::size_t n_img = input.images.size();
  // NaN marks a failed evaluation; slots are filled independently.
  std::vector<double> grid(levels.size() * n_img, 0.0);
  parallel_for(grid.size(), threads, [&](std::size_t job) {
    const std::size_t li = job / n_img;
    const std::size_t ii = job % n_img;
    try {
      const RgbImage degraded = apply_artifact(input.images[ii], kind, levels[li]);
      const SaliencyMap sm = fine_grained_saliency(to_grayscale(degraded), params);
      grid[job] = compute_pqi(sm, input.detections[ii]).value;
    } catch (const Error&) {
      grid[job] = std::nan("");
    }
  });

  SweepResult result;
  result.kind = kind;
  result.levels = levels;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t ii = 0; ii < n_img; ++ii) {
      const double v = grid[li * n_img + ii];
      if (std::isnan(v)) {
        ++result.excluded;
        continue;
      }
      acc += v;
      ++n;
    }
    result.mean_pqi.push_back(n > 0 ? acc / static_cast<double>(n) : std::nan(""));
    result.n_images.push_back(n);
  }
  return result;
}

}  // namespace pqi
