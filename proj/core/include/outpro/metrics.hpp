#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace outpro {

// Precision-recall curve with average-precision area. Scores are oriented
// larger = more OOD; ties are grouped and contribute pooled precision.
struct PrCurve {
  std::vector<double> thresholds;  // descending
  std::vector<double> precision;
  std::vector<double> recall;
  double auc_pr = 0.0;
};

PrCurve pr_curve(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

// Average precision: sum over threshold groups of (R_k - R_{k-1}) * P_k.
// Requires at least one positive and one negative label.
double auc_pr(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

double flag_rate(const std::vector<std::uint8_t>& flags);

// Midrank average ranks: values are per-method results of one run, larger
// is better; rank 1 is best, ties share the mean rank.
std::vector<double> midranks_descending(const std::vector<double>& values);

}  // namespace outpro
