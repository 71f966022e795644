#include "pqi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pqi/error.hpp"

namespace pqi {
namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double p = a[i] - ma;
    const double q = b[i] - mb;
    sab += p * q;
    saa += p * p;
    sbb += q * q;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw InvalidArgument("correlation undefined: zero variance series");
  }
  return std::clamp(sab / (std::sqrt(saa) * std::sqrt(sbb)), -1.0, 1.0);
}

}  // namespace

void PairedScores::validate() const {
  if (predicted.size() != target.size()) {
    throw InvalidArgument("predicted and target lengths differ");
  }
  if (predicted.size() < 2) {
    throw InvalidArgument("need at least two paired scores");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::ranges::all_of(predicted, finite) || !std::ranges::all_of(target, finite)) {
    throw InvalidArgument("paired scores must be finite");
  }
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
      ++j;
    }
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) {
      ranks[order[t]] = avg;
    }
    i = j + 1;
  }
  return ranks;
}

double plcc(const PairedScores& p) {
  p.validate();
  return pearson(p.predicted, p.target);
}

double srcc(const PairedScores& p) {
  p.validate();
  const auto rp = fractional_ranks(p.predicted);
  const auto rt = fractional_ranks(p.target);
  return pearson(rp, rt);
}

double r_squared(const PairedScores& p) {
  p.validate();
  const double mt = mean_of(p.target);
  double rss = 0.0;
  double tss = 0.0;
  for (std::size_t i = 0; i < p.target.size(); ++i) {
    rss += (p.target[i] - p.predicted[i]) * (p.target[i] - p.predicted[i]);
    tss += (p.target[i] - mt) * (p.target[i] - mt);
  }
  if (tss == 0.0) {
    throw InvalidArgument("r_squared undefined: target has zero variance");
  }
  return 1.0 - rss / tss;
}

MetricsReport evaluate(const PairedScores& p) {
  return MetricsReport{plcc(p), srcc(p), r_squared(p), p.predicted.size()};
}

}  // namespace pqi
