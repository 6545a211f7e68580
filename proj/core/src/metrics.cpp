#include "outpro/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace outpro {

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("pr_curve: scores and labels must match and be nonempty");
  }
  std::size_t positives = 0;
  for (auto l : labels) positives += l ? 1 : 0;
  if (positives == 0 || positives == labels.size()) {
    throw std::invalid_argument("pr_curve: need at least one positive and one negative label");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  PrCurve curve;
  std::size_t tp = 0, fp = 0;
  double prev_recall = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == threshold) {
      if (labels[order[j]]) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    curve.thresholds.push_back(threshold);
    curve.precision.push_back(precision);
    curve.recall.push_back(recall);
    curve.auc_pr += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return curve;
}

double auc_pr(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  return pr_curve(scores, labels).auc_pr;
}

double flag_rate(const std::vector<std::uint8_t>& flags) {
  if (flags.empty()) throw std::invalid_argument("flag_rate: empty input");
  std::size_t flagged = 0;
  for (auto f : flags) flagged += f ? 1 : 0;
  return static_cast<double>(flagged) / static_cast<double>(flags.size());
}

std::vector<double> midranks_descending(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 share the mean of ranks i+1..j
    const double shared = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = shared;
    i = j;
  }
  return ranks;
}

}  // namespace outpro
