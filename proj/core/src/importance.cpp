#include "outpro/importance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "outpro/dataset.hpp"
#include "outpro/parallel.hpp"
#include "outpro/rng.hpp"

namespace outpro {

double ImportancePlan::weight_of(int feature) const {
  for (std::size_t k = 0; k < signal.size(); ++k) {
    if (signal[k] == feature) return weights(static_cast<Eigen::Index>(k));
  }
  return 0.0;
}

RuleRegion release(const RuleRegion& region, int s) {
  if (s < 0 || s >= region.lower.size()) {
    throw std::invalid_argument("release: feature index out of range");
  }
  RuleRegion out = region;
  out.lower(s) = -std::numeric_limits<double>::infinity();
  out.upper(s) = std::numeric_limits<double>::infinity();
  return out;
}

Eigen::VectorXd compute_importance(const Forest& forest, const Eigen::MatrixXd& x_std,
                                   const Eigen::VectorXd& y, int max_rules, std::uint64_t seed,
                                   unsigned jobs) {
  const Eigen::Index n = x_std.rows();
  const Eigen::Index d = x_std.cols();
  if (max_rules < 1) throw std::invalid_argument("compute_importance: max_rules must be >= 1");

  // Gather every terminal node, then sample without replacement.
  std::vector<Forest::SparseRule> rules;
  for (int t = 0; t < static_cast<int>(forest.trees().size()); ++t) {
    for (auto& [node, rule] : forest.sparse_leaf_rules(t)) {
      rules.push_back(std::move(rule));
    }
  }
  if (static_cast<int>(rules.size()) > max_rules) {
    Rng rng(derive_seed(seed, 0x7275'6c65ULL));
    rng.partial_shuffle(rules, static_cast<std::size_t>(max_rules));
    rules.resize(static_cast<std::size_t>(max_rules));
  }

  const double y_mean = n > 0 ? y.mean() : 0.0;
  const double global_sd =
      n > 1 ? std::sqrt((y.array() - y_mean).square().sum() / static_cast<double>(n - 1)) : 0.0;

  struct AxisAccum {
    double weighted_shift = 0.0;
    double weight = 0.0;
  };
  std::vector<std::vector<AxisAccum>> per_rule(rules.size());

  parallel_for(rules.size(), jobs, [&](std::size_t r) {
    const Forest::SparseRule& rule = rules[r];
    const std::size_t nb = rule.bounds.size();
    std::vector<AxisAccum> acc(nb);
    if (nb == 0) {
      per_rule[r] = std::move(acc);
      return;
    }

    int inside = 0;
    double inside_sum = 0.0, inside_sumsq = 0.0;
    std::vector<int> extra_count(nb, 0);
    std::vector<double> extra_sum(nb, 0.0), extra_sumsq(nb, 0.0);

    for (Eigen::Index i = 0; i < n; ++i) {
      int violations = 0;
      std::size_t violated_axis = 0;
      for (std::size_t b = 0; b < nb; ++b) {
        const AxisBound& ab = rule.bounds[b];
        const double v = x_std(i, ab.axis);
        if (!(v > ab.lower && v <= ab.upper)) {
          if (++violations > 1) break;
          violated_axis = b;
        }
      }
      if (violations == 0) {
        ++inside;
        inside_sum += y(i);
        inside_sumsq += y(i) * y(i);
      } else if (violations == 1) {
        ++extra_count[violated_axis];
        extra_sum[violated_axis] += y(i);
        extra_sumsq[violated_axis] += y(i) * y(i);
      }
    }

    if (inside > 0) {
      const double inside_mean = inside_sum / inside;
      for (std::size_t b = 0; b < nb; ++b) {
        const int n_rel = inside + extra_count[b];
        if (n_rel <= inside) continue;  // release admits nothing new
        const double rel_sum = inside_sum + extra_sum[b];
        const double rel_sumsq = inside_sumsq + extra_sumsq[b];
        const double rel_mean = rel_sum / n_rel;
        // Shift standardized by its sampling noise: the release region's
        // response sd scaled for a subset-vs-superset mean difference.
        const double rel_var =
            (rel_sumsq - rel_sum * rel_sum / n_rel) / static_cast<double>(n_rel - 1);
        const double sd = rel_var > 0.0 ? std::sqrt(rel_var) : global_sd;
        if (!(sd > 0.0)) continue;
        const double se = sd * std::sqrt(1.0 / inside - 1.0 / n_rel);
        if (!(se > 0.0)) continue;
        acc[b].weighted_shift =
            static_cast<double>(inside) * std::abs(inside_mean - rel_mean) / se;
        acc[b].weight = static_cast<double>(inside);
      }
    }
    per_rule[r] = std::move(acc);
  });

  Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd den = Eigen::VectorXd::Zero(d);
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const auto& acc = per_rule[r];
    for (std::size_t b = 0; b < acc.size(); ++b) {
      const int axis = rules[r].bounds[b].axis;
      num(axis) += acc[b].weighted_shift;
      den(axis) += acc[b].weight;
    }
  }
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (den(j) > 0.0) scores(j) = num(j) / den(j);
  }
  return scores;
}

ImportancePlan select_signal(const Eigen::VectorXd& raw_scores, SelectionPolicy policy,
                             int top_k, double quantile) {
  const Eigen::Index d = raw_scores.size();
  std::vector<double> positive;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (raw_scores(j) > 0.0) positive.push_back(raw_scores(j));
  }
  if (positive.empty()) {
    throw std::runtime_error(
        "select_signal: all importance scores are <= 0; "
        "fall back to using all features with uniform weights");
  }

  ImportancePlan plan;
  plan.raw_scores = raw_scores;
  switch (policy) {
    case SelectionPolicy::MeanPositive: {
      const double mean =
          std::accumulate(positive.begin(), positive.end(), 0.0) / positive.size();
      for (Eigen::Index j = 0; j < d; ++j) {
        if (raw_scores(j) >= mean) plan.signal.push_back(static_cast<int>(j));
      }
      plan.policy = "mean_positive";
      break;
    }
    case SelectionPolicy::TopK: {
      if (top_k < 1) throw std::invalid_argument("select_signal: top_k must be >= 1");
      std::vector<int> order(static_cast<std::size_t>(d));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return raw_scores(a) > raw_scores(b); });
      const int k = std::min<int>(top_k, static_cast<int>(positive.size()));
      plan.signal.assign(order.begin(), order.begin() + k);
      std::sort(plan.signal.begin(), plan.signal.end());
      plan.policy = "top_k=" + std::to_string(top_k);
      break;
    }
    case SelectionPolicy::Quantile: {
      if (!(quantile > 0.0 && quantile < 1.0)) {
        throw std::invalid_argument("select_signal: quantile must be in (0,1)");
      }
      std::vector<double> sorted = positive;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t idx = static_cast<std::size_t>(
          std::ceil(quantile * static_cast<double>(sorted.size())));
      const double cut = sorted[std::min(sorted.size() - 1, idx == 0 ? 0 : idx - 1)];
      for (Eigen::Index j = 0; j < d; ++j) {
        if (raw_scores(j) >= cut) plan.signal.push_back(static_cast<int>(j));
      }
      plan.policy = "quantile=" + std::to_string(quantile);
      break;
    }
  }
  if (plan.signal.empty()) {
    throw std::runtime_error("select_signal: selection produced an empty signal set");
  }

  double total = 0.0;
  for (int s : plan.signal) total += raw_scores(s);
  plan.weights.resize(static_cast<Eigen::Index>(plan.signal.size()));
  for (std::size_t k = 0; k < plan.signal.size(); ++k) {
    plan.weights(static_cast<Eigen::Index>(k)) = raw_scores(plan.signal[k]) / total;
  }
  return plan;
}

void write_plan_csv(const ImportancePlan& plan, const std::vector<std::string>& feature_names,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << "feature,raw_score,weight,selected\n";
  for (Eigen::Index j = 0; j < plan.raw_scores.size(); ++j) {
    const std::string name = static_cast<std::size_t>(j) < feature_names.size()
                                 ? feature_names[static_cast<std::size_t>(j)]
                                 : ("x" + std::to_string(j + 1));
    const bool selected =
        std::find(plan.signal.begin(), plan.signal.end(), static_cast<int>(j)) != plan.signal.end();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", plan.raw_scores(j));
    out << name << ',' << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", selected ? plan.weight_of(static_cast<int>(j)) : 0.0);
    out << buf << ',' << (selected ? 1 : 0) << '\n';
  }
}

}  // namespace outpro
