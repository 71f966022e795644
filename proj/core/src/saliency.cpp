#include "pqi/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "binio.hpp"
#include "pqi/image_io.hpp"
#include "pqi/parallel.hpp"

namespace pqi {
namespace {

template <typename Img, typename Integral>
double surround_impl(const Integral& ii, const Img& img, int x, int y, int zeta) {
  if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) {
    throw InvalidArgument("surround: pixel out of bounds");
  }
  if (zeta < 1) {
    throw InvalidArgument("surround: zeta must be >= 1");
  }
  const Rect window = clamp_rect(Rect{x - zeta, y - zeta, x + zeta, y + zeta}, img.width(), img.height());
  const long long count = window.area();
  if (count <= 1) {
    return 0.0;
  }
  // Subtract in the accumulator type so the integer path stays exact.
  const auto ring = ii.sum(window) - static_cast<decltype(ii.sum(window))>(img.at(x, y));
  return static_cast<double>(ring) / static_cast<double>(count - 1);
}

template <typename Img, typename Integral>
void accumulate_submap(const Img& img, const Integral& ii, int zeta, SaliencyMap& out, unsigned threads) {
  const int w = img.width();
  parallel_for(static_cast<std::size_t>(img.height()), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    auto dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      const double diff = static_cast<double>(img.at(x, y)) - surround_impl(ii, img, x, y, zeta);
      dst[x] += std::max(diff, 0.0);
    }
  });
}

template <typename Img, typename Integral>
SaliencyMap submap_impl(const Img& img, const Integral& ii, int zeta, unsigned threads) {
  if (zeta < 1) {
    throw InvalidArgument("submap: zeta must be >= 1");
  }
  if (ii.width() != img.width() || ii.height() != img.height()) {
    throw InvalidArgument("submap: integral image does not match source dimensions");
  }
  SaliencyMap out(img.width(), img.height(), 0.0);
  accumulate_submap(img, ii, zeta, out, threads);
  return out;
}

template <typename Img>
SaliencyMap fine_grained_impl(const Img& img, const SaliencyParams& params, unsigned threads) {
  params.validate();
  const auto ii = build_integral(img);
  SaliencyMap total(img.width(), img.height(), 0.0);
  for (const int zeta : params.radii()) {
    accumulate_submap(img, ii, zeta, total, threads);
  }
  return total;
}

}  // namespace

double SaliencyMap::mean() const noexcept {
  double acc = 0.0;
  for (const double v : pixels()) {
    acc += v;
  }
  return empty() ? 0.0 : acc / static_cast<double>(size());
}

double SaliencyMap::max() const noexcept {
  double m = 0.0;
  for (const double v : pixels()) {
    m = std::max(m, v);
  }
  return m;
}

void SaliencyParams::validate() const {
  if (sigma < 1) {
    throw InvalidArgument("saliency sigma must be >= 1");
  }
  if (scales.empty()) {
    throw InvalidArgument("saliency scale set must be non-empty");
  }
  for (const int s : scales) {
    if (s < 0 || s > 24) {
      throw InvalidArgument("saliency scales must lie in [0, 24]");
    }
  }
}

std::vector<int> SaliencyParams::radii() const {
  std::vector<int> out;
  out.reserve(scales.size());
  for (const int s : scales) {
    const long long zeta = static_cast<long long>(sigma) << s;
    out.push_back(static_cast<int>(std::min<long long>(zeta, std::numeric_limits<int>::max() / 4)));
  }
  return out;
}

double surround(const IntegralImage& ii, const GrayImage& img, int x, int y, int zeta) {
  return surround_impl(ii, img, x, y, zeta);
}

double surround(const RealIntegralImage& ii, const RealImage& img, int x, int y, int zeta) {
  return surround_impl(ii, img, x, y, zeta);
}

SaliencyMap submap(const GrayImage& img, const IntegralImage& ii, int zeta, unsigned threads) {
  return submap_impl(img, ii, zeta, threads);
}

SaliencyMap submap(const RealImage& img, const RealIntegralImage& ii, int zeta, unsigned threads) {
  return submap_impl(img, ii, zeta, threads);
}

SaliencyMap fine_grained_saliency(const GrayImage& img, const SaliencyParams& params, unsigned threads) {
  return fine_grained_impl(img, params, threads);
}

SaliencyMap fine_grained_saliency(const RealImage& img, const SaliencyParams& params, unsigned threads) {
  return fine_grained_impl(img, params, threads);
}

void export_saliency_png(const std::filesystem::path& path, const SaliencyMap& map) {
  const double peak = map.max();
  GrayImage out(map.width(), map.height(), 0);
  if (peak > 0.0) {
    const auto src = map.pixels();
    auto dst = out.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i] = static_cast<std::uint8_t>(std::lround(std::clamp(src[i] / peak, 0.0, 1.0) * 255.0));
    }
  }
  write_png(path, out);
  std::ofstream side(path.string() + ".max.txt");
  if (!side) {
    throw DataError("cannot write saliency sidecar for " + path.string());
  }
  side.precision(17);
  side << peak << '\n';
}

void export_saliency_raw(const std::filesystem::path& path, const SaliencyMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open for writing: " + path.string());
  }
  out.write("PQISMAP1", 8);
  binio::put_u32(out, static_cast<std::uint32_t>(map.width()));
  binio::put_u32(out, static_cast<std::uint32_t>(map.height()));
  for (const double v : map.pixels()) {
    binio::put_f32(out, static_cast<float>(v));
  }
  if (!out) {
    throw DataError("write failed: " + path.string());
  }
}

SaliencyMap import_saliency_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open saliency map: " + path.string());
  }
  binio::expect_magic(in, "PQISMAP1", "PQI saliency map");
  const auto w = binio::get_u32(in);
  const auto h = binio::get_u32(in);
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) {
    throw DataError("implausible saliency map dimensions");
  }
  SaliencyMap map(static_cast<int>(w), static_cast<int>(h));
  for (double& v : map.pixels()) {
    v = binio::get_f32(in);
  }
  return map;
}

}  // namespace pqi
