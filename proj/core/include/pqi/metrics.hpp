#pragma once

#include <span>
#include <vector>

#include "pqi/error.hpp"

namespace pqi {

/// Predicted and target scores, index-aligned.
struct PairedScores {
  std::vector<double> predicted;
  std::vector<double> target;

  /// Throws InvalidArgument unless lengths match, are >= 2, and all values are finite.
  void validate() const;
};

/// Pearson linear correlation of the mean-centered series.
/// Throws InvalidArgument when either series has zero variance.
[[nodiscard]] double plcc(const PairedScores& p);

/// Spearman rank correlation: Pearson correlation of tie-averaged ranks.
[[nodiscard]] double srcc(const PairedScores& p);

/// 1 - RSS / TSS. Can be negative. Throws InvalidArgument when TSS is zero.
[[nodiscard]] double r_squared(const PairedScores& p);

/// 1-based ranks; tied values share the average of the ranks they span.
[[nodiscard]] std::vector<double> fractional_ranks(std::span<const double> values);

struct MetricsReport {
  double plcc = 0;
  double srcc = 0;
  double r2 = 0;
  std::size_t n = 0;
};

[[nodiscard]] MetricsReport evaluate(const PairedScores& p);

}  // namespace pqi
