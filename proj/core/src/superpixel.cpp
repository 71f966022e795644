#include "pqi/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "pqi/image_io.hpp"

namespace pqi {
namespace {

struct Lab {
  double l, a, b;
};

double srgb_to_linear(double c) noexcept {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) noexcept {
  constexpr double kEps = 216.0 / 24389.0;
  constexpr double kKappa = 24389.0 / 27.0;
  return t > kEps ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}

std::vector<Lab> to_lab(const RgbImage& img) {
  // 256-entry LUT for the sRGB transfer curve.
  std::array<double, 256> lin{};
  for (int i = 0; i < 256; ++i) {
    lin[i] = srgb_to_linear(i / 255.0);
  }
  std::vector<Lab> out(img.pixel_count());
  const auto bytes = img.bytes();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = lin[bytes[3 * i]];
    const double g = lin[bytes[3 * i + 1]];
    const double b = lin[bytes[3 * i + 2]];
    const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
    const double fx = lab_f(x);
    const double fy = lab_f(y);
    const double fz = lab_f(z);
    out[i] = Lab{116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
  }
  return out;
}

struct Center {
  double l, a, b, x, y;
};

double gradient_at(const std::vector<Lab>& lab, int w, int h, int x, int y) noexcept {
  auto px = [&](int xx, int yy) -> const Lab& {
    xx = std::clamp(xx, 0, w - 1);
    yy = std::clamp(yy, 0, h - 1);
    return lab[static_cast<std::size_t>(yy) * w + xx];
  };
  auto sq = [](const Lab& p, const Lab& q) {
    return (p.l - q.l) * (p.l - q.l) + (p.a - q.a) * (p.a - q.a) + (p.b - q.b) * (p.b - q.b);
  };
  return sq(px(x + 1, y), px(x - 1, y)) + sq(px(x, y + 1), px(x, y - 1));
}

struct Seeding {
  std::vector<Center> centers;
  double step_x = 1;
  double step_y = 1;
};

Seeding seed_centers(const std::vector<Lab>& lab, int w, int h, int k_target) {
  int nx = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(k_target) * w / h))));
  nx = std::min(nx, w);
  int ny = std::max(1, static_cast<int>(std::lround(static_cast<double>(k_target) / nx)));
  ny = std::min(ny, h);
  const double step_x = static_cast<double>(w) / nx;
  const double step_y = static_cast<double>(h) / ny;

  Seeding seeding{{}, step_x, step_y};
  auto& centers = seeding.centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int sx = std::min(w - 1, static_cast<int>((i + 0.5) * step_x));
      int sy = std::min(h - 1, static_cast<int>((j + 0.5) * step_y));
      // Move the seed off edges: lowest gradient in the 3x3 neighbourhood.
      double best = gradient_at(lab, w, h, sx, sy);
      int bx = sx;
      int by = sy;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = sx + dx;
          const int y = sy + dy;
          if (x < 0 || y < 0 || x >= w || y >= h) {
            continue;
          }
          const double g = gradient_at(lab, w, h, x, y);
          if (g < best) {
            best = g;
            bx = x;
            by = y;
          }
        }
      }
      const Lab& p = lab[static_cast<std::size_t>(by) * w + bx];
      centers.push_back({p.l, p.a, p.b, static_cast<double>(bx), static_cast<double>(by)});
    }
  }
  return seeding;
}

// Splits every label into 4-connected components, keeps the largest component
// of each label and merges the remaining fragments into the largest adjacent
// region. Returns labels renumbered in raster order of first appearance.
std::vector<int> enforce_connectivity(const std::vector<int>& labels, int w, int h, int& k_out) {
  const std::size_t n = labels.size();
  std::vector<int> comp(n, -1);
  std::vector<std::size_t> comp_size;
  std::vector<int> comp_label;
  std::vector<std::size_t> comp_seed;
  std::vector<std::size_t> stack;

  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] >= 0) {
      continue;
    }
    const int id = static_cast<int>(comp_size.size());
    const int lab = labels[start];
    std::size_t count = 0;
    stack.push_back(start);
    comp[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++count;
      const int x = static_cast<int>(p % w);
      const int y = static_cast<int>(p / w);
      const std::size_t nbrs[4] = {x > 0 ? p - 1 : n, x + 1 < w ? p + 1 : n, y > 0 ? p - w : n,
                                   y + 1 < h ? p + w : n};
      for (const std::size_t q : nbrs) {
        if (q < n && comp[q] < 0 && labels[q] == lab) {
          comp[q] = id;
          stack.push_back(q);
        }
      }
    }
    comp_size.push_back(count);
    comp_label.push_back(lab);
    comp_seed.push_back(start);
  }

  // Largest component per original label (first in raster order on ties).
  std::map<int, int> keeper;
  for (int c = 0; c < static_cast<int>(comp_size.size()); ++c) {
    auto [it, inserted] = keeper.try_emplace(comp_label[c], c);
    if (!inserted && comp_size[c] > comp_size[it->second]) {
      it->second = c;
    }
  }

  // owner[c] = keeper component whose region c belongs to; -1 while unresolved.
  std::vector<int> owner(comp_size.size(), -1);
  std::vector<std::size_t> region_size(comp_size.size(), 0);
  for (const auto& [lab, c] : keeper) {
    owner[c] = c;
    region_size[c] = comp_size[c];
  }

  std::vector<std::vector<std::size_t>> members(comp_size.size());
  for (std::size_t p = 0; p < n; ++p) {
    if (owner[comp[p]] < 0) {
      members[comp[p]].push_back(p);
    }
  }

  bool pending = true;
  while (pending) {
    pending = false;
    bool progressed = false;
    for (int c = 0; c < static_cast<int>(comp_size.size()); ++c) {
      if (owner[c] >= 0) {
        continue;
      }
      int best = -1;
      for (const std::size_t p : members[c]) {
        const int x = static_cast<int>(p % w);
        const int y = static_cast<int>(p / w);
        const std::size_t nbrs[4] = {x > 0 ? p - 1 : n, x + 1 < w ? p + 1 : n, y > 0 ? p - w : n,
                                     y + 1 < h ? p + w : n};
        for (const std::size_t q : nbrs) {
          if (q >= n) {
            continue;
          }
          const int r = owner[comp[q]];
          if (r < 0 || r == c) {
            continue;
          }
          if (best < 0 || region_size[r] > region_size[best] || (region_size[r] == region_size[best] && r < best)) {
            best = r;
          }
        }
      }
      if (best < 0) {
        pending = true;
        continue;
      }
      owner[c] = best;
      region_size[best] += comp_size[c];
      progressed = true;
    }
    if (pending && !progressed) {
      break;  // unreachable for a connected pixel grid
    }
  }

  std::vector<int> remap(comp_size.size(), -1);
  std::vector<int> out(n);
  int next = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const int region = owner[comp[p]];
    if (remap[region] < 0) {
      remap[region] = next++;
    }
    out[p] = remap[region];
  }
  k_out = next;
  return out;
}

}  // namespace

SuperpixelSegmentation slic(const RgbImage& img, const SlicParams& params) {
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = img.pixel_count();
  if (params.k_target < 1) {
    throw InvalidArgument("slic: k_target must be >= 1");
  }
  if (params.iterations < 1) {
    throw InvalidArgument("slic: iterations must be >= 1");
  }
  if (static_cast<std::size_t>(params.k_target) > n) {
    throw InvalidArgument("slic: k_target exceeds pixel count");
  }
  if (!(params.compactness > 0.0)) {
    throw InvalidArgument("slic: compactness must be positive");
  }

  const std::vector<Lab> lab = to_lab(img);
  Seeding seeding = seed_centers(lab, w, h, params.k_target);
  std::vector<Center>& centers = seeding.centers;
  const std::size_t k = centers.size();
  const double step = std::sqrt(static_cast<double>(n) / static_cast<double>(k));
  const double spatial_weight = (params.compactness / step) * (params.compactness / step);
  // Search window of +-S around each center (2S x 2S), S the larger grid step.
  const int radius = static_cast<int>(std::ceil(std::max(seeding.step_x, seeding.step_y)));

  std::vector<int> labels(n, -1);
  std::vector<double> dist(n);

  auto distance = [&](const Center& c, std::size_t p, int x, int y) {
    const Lab& q = lab[p];
    const double dc = (q.l - c.l) * (q.l - c.l) + (q.a - c.a) * (q.a - c.a) + (q.b - c.b) * (q.b - c.b);
    const double ds = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y);
    return dc + ds * spatial_weight;
  };

  for (int iter = 0; iter < params.iterations; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    std::fill(labels.begin(), labels.end(), -1);
    for (std::size_t ci = 0; ci < k; ++ci) {
      const Center& c = centers[ci];
      const int cx = static_cast<int>(std::lround(c.x));
      const int cy = static_cast<int>(std::lround(c.y));
      const int x0 = std::max(0, cx - radius);
      const int x1 = std::min(w - 1, cx + radius);
      const int y0 = std::max(0, cy - radius);
      const int y1 = std::min(h - 1, cy + radius);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          const double d = distance(c, p, x, y);
          if (d < dist[p]) {
            dist[p] = d;
            labels[p] = static_cast<int>(ci);
          }
        }
      }
    }
    // Pixels outside every search window fall back to the global nearest center.
    for (std::size_t p = 0; p < n; ++p) {
      if (labels[p] >= 0) {
        continue;
      }
      const int x = static_cast<int>(p % w);
      const int y = static_cast<int>(p / w);
      for (std::size_t ci = 0; ci < k; ++ci) {
        const double d = distance(centers[ci], p, x, y);
        if (d < dist[p]) {
          dist[p] = d;
          labels[p] = static_cast<int>(ci);
        }
      }
    }

    std::vector<Center> sums(k, Center{0, 0, 0, 0, 0});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t p = 0; p < n; ++p) {
      const int ci = labels[p];
      sums[ci].l += lab[p].l;
      sums[ci].a += lab[p].a;
      sums[ci].b += lab[p].b;
      sums[ci].x += static_cast<double>(p % w);
      sums[ci].y += static_cast<double>(p / w);
      ++counts[ci];
    }
    for (std::size_t ci = 0; ci < k; ++ci) {
      if (counts[ci] == 0) {
        continue;
      }
      const double inv = 1.0 / static_cast<double>(counts[ci]);
      centers[ci] = {sums[ci].l * inv, sums[ci].a * inv, sums[ci].b * inv, sums[ci].x * inv, sums[ci].y * inv};
    }
  }

  SuperpixelSegmentation seg;
  seg.width = w;
  seg.height = h;
  seg.compactness = params.compactness;
  seg.labels = enforce_connectivity(labels, w, h, seg.k_actual);
  return seg;
}

SuperpixelFeatures extract_features(const RgbImage& img, const SuperpixelSegmentation& seg) {
  if (seg.width != img.width() || seg.height != img.height() || seg.labels.size() != img.pixel_count()) {
    throw InvalidArgument("extract_features: segmentation does not match image");
  }
  const std::size_t k = static_cast<std::size_t>(seg.k_actual);
  std::vector<std::array<double, 3>> sum(k, {0, 0, 0});
  std::vector<std::array<double, 3>> sum_sq(k, {0, 0, 0});
  std::vector<double> sx(k, 0.0);
  std::vector<double> sy(k, 0.0);
  std::vector<std::size_t> count(k, 0);

  const auto bytes = img.bytes();
  const int w = img.width();
  for (std::size_t p = 0; p < seg.labels.size(); ++p) {
    const int lab = seg.labels[p];
    if (lab < 0 || static_cast<std::size_t>(lab) >= k) {
      throw InvalidArgument("extract_features: label out of range");
    }
    for (int c = 0; c < 3; ++c) {
      const double v = bytes[3 * p + c] / 255.0;
      sum[lab][c] += v;
      sum_sq[lab][c] += v * v;
    }
    sx[lab] += static_cast<double>(p % w);
    sy[lab] += static_cast<double>(p / w);
    ++count[lab];
  }

  SuperpixelFeatures out;
  out.width = img.width();
  out.height = img.height();
  out.rows.resize(k);
  for (std::size_t s = 0; s < k; ++s) {
    if (count[s] == 0) {
      throw InvalidArgument("extract_features: empty segment");
    }
    auto& row = out.rows[s];
    const double inv = 1.0 / static_cast<double>(count[s]);
    for (int c = 0; c < 3; ++c) {
      row.rgb_mean[c] = sum[s][c] * inv;
      row.rgb_std[c] = std::sqrt(std::max(0.0, sum_sq[s][c] * inv - row.rgb_mean[c] * row.rgb_mean[c]));
    }
    row.size = count[s];
    row.cx = sx[s] * inv;
    row.cy = sy[s] * inv;
  }
  return out;
}

int SuperpixelBlock::valid_count() const noexcept {
  return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

SuperpixelBlock pad_or_truncate(const SuperpixelFeatures& features, int k_fixed) {
  if (k_fixed < 1) {
    throw InvalidArgument("pad_or_truncate: k_fixed must be >= 1");
  }
  SuperpixelBlock block;
  block.features = Eigen::MatrixXd::Zero(k_fixed, kSuperpixelFeatureDim);
  block.encodings = Eigen::MatrixXd::Zero(k_fixed, kSuperpixelEncodingDim);
  block.mask.assign(static_cast<std::size_t>(k_fixed), 0);
  const double pixels = static_cast<double>(features.width) * features.height;
  const int keep = std::min<int>(k_fixed, static_cast<int>(features.rows.size()));
  for (int i = 0; i < keep; ++i) {
    const auto& r = features.rows[i];
    for (int c = 0; c < 3; ++c) {
      block.features(i, c) = r.rgb_mean[c];
      block.features(i, 3 + c) = r.rgb_std[c];
    }
    block.encodings(i, 0) = static_cast<double>(r.size) / pixels;
    block.encodings(i, 1) = (r.cx + 0.5) / features.width;
    block.encodings(i, 2) = (r.cy + 0.5) / features.height;
    block.mask[i] = 1;
  }
  return block;
}

void export_label_map(const std::filesystem::path& path, const SuperpixelSegmentation& seg) {
  Plane<std::uint16_t> out(seg.width, seg.height);
  auto px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<std::uint16_t>(std::min(seg.labels[i], 65535));
  }
  write_png16(path, out);
}

}  // namespace pqi
