#include "pqi/pqi.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace pqi {

double object_saliency_term(const SaliencyMap& sm, const Detection& d, CoordMode mode) {
  const Rect r = pixel_rect(d, mode, sm.width(), sm.height());
  if (r.empty() || d.confidence == 0.0) {
    return 0.0;
  }
  double acc = 0.0;
  for (int y = r.y0; y <= r.y1; ++y) {
    const auto row = sm.row(y);
    for (int x = r.x0; x <= r.x1; ++x) {
      acc += row[x];
    }
  }
  return d.confidence * acc;
}

PqiScore compute_pqi(const SaliencyMap& sm, const DetectionSet& ds) {
  if (sm.empty()) {
    throw InvalidArgument("compute_pqi: empty saliency map");
  }
  PqiScore score;
  score.image_id = ds.image_id;
  double base = 0.0;
  for (const double v : sm.pixels()) {
    base += v;
  }
  double objects = 0.0;
  for (const auto& d : ds.detections) {
    if (!pixel_rect(d, ds.coords, sm.width(), sm.height()).empty()) {
      ++score.k_used;
    }
    objects += object_saliency_term(sm, d, ds.coords);
  }
  score.value = (base + objects) / static_cast<double>(sm.size());
  return score;
}

PqiDistribution pqi_distribution(const std::vector<double>& values, double bucket_width, StdKind kind) {
  if (values.empty()) {
    throw InvalidArgument("pqi_distribution: no scores");
  }
  if (!(bucket_width > 0.0)) {
    throw InvalidArgument("pqi_distribution: bucket width must be positive");
  }
  if (kind == StdKind::Sample && values.size() < 2) {
    throw InvalidArgument("pqi_distribution: sample std needs at least two scores");
  }
  PqiDistribution dist;
  dist.n = values.size();
  dist.bucket_width = bucket_width;

  double sum = 0.0;
  for (const double v : values) {
    sum += v;
  }
  dist.mean = sum / static_cast<double>(dist.n);
  double ss = 0.0;
  for (const double v : values) {
    ss += (v - dist.mean) * (v - dist.mean);
  }
  const double dof = kind == StdKind::Population ? static_cast<double>(dist.n) : static_cast<double>(dist.n - 1);
  dist.std = std::sqrt(ss / dof);

  std::map<long long, std::size_t> counts;
  for (const double v : values) {
    ++counts[static_cast<long long>(std::floor(v / bucket_width))];
  }
  const long long first = counts.begin()->first;
  const long long last = counts.rbegin()->first;
  for (long long b = first; b <= last; ++b) {
    const auto it = counts.find(b);
    dist.histogram.push_back({static_cast<double>(b) * bucket_width, static_cast<double>(b + 1) * bucket_width,
                              it == counts.end() ? 0 : it->second});
  }
  return dist;
}

PqiDistribution pqi_distribution(const std::vector<PqiScore>& scores, double bucket_width, StdKind kind) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) {
    values.push_back(s.value);
  }
  return pqi_distribution(values, bucket_width, kind);
}

}  // namespace pqi
