#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "outpro/forest.hpp"

namespace outpro {

// Signal subset and normalized positive weights from release-region
// response shifts.
struct ImportancePlan {
  std::vector<int> signal;     // ascending feature indices, nonempty
  Eigen::VectorXd weights;     // aligned with signal, w > 0, sum = 1
  Eigen::VectorXd raw_scores;  // length d
  std::string policy;          // selection policy label for output metadata

  double weight_of(int feature) const;
};

// Removes the constraint on feature s: bounds on that axis become infinite,
// everything else (including node stats) is preserved.
RuleRegion release(const RuleRegion& region, int s);

// Average standardized shift between the mean response inside a rule's
// region and inside its release region, over sampled rules constrained on
// each feature. Each shift is divided by its sampling noise (release-region
// response sd scaled for a subset-vs-superset mean difference) so that rule
// depth does not set the noise floor, and terms are weighted by the rule's
// training membership count. Rules are sampled uniformly without
// replacement up to max_rules.
Eigen::VectorXd compute_importance(const Forest& forest, const Eigen::MatrixXd& x_std,
                                   const Eigen::VectorXd& y, int max_rules,
                                   std::uint64_t seed, unsigned jobs = 0);

enum class SelectionPolicy {
  MeanPositive,  // keep features with score >= mean of positive scores
  TopK,
  Quantile,
};

ImportancePlan select_signal(const Eigen::VectorXd& raw_scores,
                             SelectionPolicy policy = SelectionPolicy::MeanPositive,
                             int top_k = 0, double quantile = 0.0);

// CSV export: feature,raw_score,weight,selected
void write_plan_csv(const ImportancePlan& plan, const std::vector<std::string>& feature_names,
                    const std::string& path);

}  // namespace outpro
