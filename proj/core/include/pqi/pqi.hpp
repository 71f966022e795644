#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pqi/detection.hpp"
#include "pqi/saliency.hpp"

namespace pqi {

struct PqiScore {
  std::string image_id;
  double value = 0;
  /// Detections whose clamped box has positive area.
  std::size_t k_used = 0;
};

enum class StdKind { Population, Sample };

struct HistogramBucket {
  double lo = 0;
  double hi = 0;
  std::size_t count = 0;
};

struct PqiDistribution {
  double mean = 0;
  double std = 0;
  std::size_t n = 0;
  double bucket_width = 1.0;
  std::vector<HistogramBucket> histogram;
};

/// c * (sum of saliency over the detection's clamped box); 0 for an empty box.
[[nodiscard]] double object_saliency_term(const SaliencyMap& sm, const Detection& d,
                                          CoordMode mode = CoordMode::Absolute);

/// Mean over all pixels of sm(x,y) + sum_i c_i * sm(x,y) * [(x,y) in box_i].
/// Overlapping boxes add up. Throws InvalidArgument on an empty map.
[[nodiscard]] PqiScore compute_pqi(const SaliencyMap& sm, const DetectionSet& ds);

/// Sample mean, std (population by default) and a fixed-width histogram whose
/// buckets are aligned to multiples of bucket_width.
[[nodiscard]] PqiDistribution pqi_distribution(const std::vector<PqiScore>& scores, double bucket_width = 1.0,
                                               StdKind kind = StdKind::Population);
[[nodiscard]] PqiDistribution pqi_distribution(const std::vector<double>& values, double bucket_width = 1.0,
                                               StdKind kind = StdKind::Population);

}  // namespace pqi
