#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "outpro/dataset.hpp"
#include "outpro/forest.hpp"
#include "outpro/importance.hpp"
#include "outpro/rng.hpp"

namespace outpro::testing {

inline Standardizer identity_standardizer(Eigen::Index d) {
  Standardizer s;
  s.means = Eigen::VectorXd::Zero(d);
  s.sds = Eigen::VectorXd::Ones(d);
  return s;
}

inline ImportancePlan uniform_plan(const std::vector<int>& signal, Eigen::Index d) {
  ImportancePlan plan;
  plan.signal = signal;
  plan.weights =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(signal.size()),
                                1.0 / static_cast<double>(signal.size()));
  plan.raw_scores = Eigen::VectorXd::Zero(d);
  for (int s : signal) plan.raw_scores(s) = 1.0;
  plan.policy = "test";
  return plan;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index d, Rng& rng, double lo = 0.0,
                                     double hi = 1.0) {
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

// Single tree whose leaves partition the axis into boxes via nested unit
// splits; builds the Fig-style cube geometry: the returned tree has one
// terminal node equal to (0,1]^axes with everything else spilling out.
inline Tree unit_cube_tree(int axes) {
  Tree tree;
  auto add_leaf = [&](double mean) {
    TreeNode nd;
    nd.mean = mean;
    nd.count = 5;
    tree.nodes.push_back(nd);
    return static_cast<int>(tree.nodes.size() - 1);
  };
  auto add_split = [&](int feature, double thr) {
    TreeNode nd;
    nd.feature = feature;
    nd.threshold = thr;
    tree.nodes.push_back(nd);
    return static_cast<int>(tree.nodes.size() - 1);
  };
  int current = add_split(0, 0.0);  // root
  for (int axis = 0; axis < axes; ++axis) {
    // left of current: outside (<= 0); right: continue with <= 1 test
    tree.nodes[static_cast<std::size_t>(current)].left = add_leaf(-1.0);
    const int upper = add_split(axis, 1.0);
    tree.nodes[static_cast<std::size_t>(current)].right = upper;
    tree.nodes[static_cast<std::size_t>(upper)].right = add_leaf(-1.0);
    if (axis + 1 < axes) {
      const int next = add_split(axis + 1, 0.0);
      tree.nodes[static_cast<std::size_t>(upper)].left = next;
      current = next;
    } else {
      tree.nodes[static_cast<std::size_t>(upper)].left = add_leaf(1.0);  // the cube
    }
  }
  return tree;
}

inline Forest single_tree_forest(Tree tree, Eigen::Index d) {
  ForestParams params;
  params.ntree = 1;
  params.mtry = 1;
  params.min_node_size = 1;
  std::vector<Tree> trees;
  trees.push_back(std::move(tree));
  return Forest::from_parts(std::move(trees), params, d, Eigen::VectorXd());
}

// Naive frequency-count oracle: for every rule containing x (dense public
// regions), every signal axis, every training point, count the point when
// it satisfies that rule's bounds on that axis.
inline std::vector<std::vector<std::uint32_t>> naive_frequency_counts(
    const Forest& forest, const std::vector<int>& signal, const Eigen::MatrixXd& train,
    const Eigen::VectorXd& x) {
  const auto rules = forest.rules_containing(x);
  std::vector<std::vector<std::uint32_t>> counts(
      signal.size(), std::vector<std::uint32_t>(static_cast<std::size_t>(train.rows()), 0));
  for (const RuleRegion& rule : rules) {
    for (std::size_t k = 0; k < signal.size(); ++k) {
      const int s = signal[k];
      for (Eigen::Index i = 0; i < train.rows(); ++i) {
        const double v = train(i, s);
        if (v > rule.lower(s) && v <= rule.upper(s)) ++counts[k][static_cast<std::size_t>(i)];
      }
    }
  }
  return counts;
}

// Independent OPTICS transcription: seed list driven, full sorts for core
// distances, same start and tie rules as the spec fixes them.
inline double naive_optics_reachability(const Eigen::MatrixXd& pts, int query, int min_pts) {
  const int m = static_cast<int>(pts.rows());
  auto dist = [&](int a, int b) { return (pts.row(a) - pts.row(b)).norm(); };
  std::vector<double> core(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    std::vector<double> ds;
    for (int j = 0; j < m; ++j) ds.push_back(dist(i, j));
    std::sort(ds.begin(), ds.end());
    core[static_cast<std::size_t>(i)] = ds[static_cast<std::size_t>(min_pts - 1)];
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> reach(static_cast<std::size_t>(m), inf);
  std::vector<bool> done(static_cast<std::size_t>(m), false);

  int current = -1;
  for (int i = 0; i < m; ++i) {
    if (i == query) continue;
    if (current < 0 || core[static_cast<std::size_t>(i)] < core[static_cast<std::size_t>(current)]) {
      current = i;
    }
  }
  while (current >= 0) {
    done[static_cast<std::size_t>(current)] = true;
    if (current == query) break;
    for (int o = 0; o < m; ++o) {
      if (done[static_cast<std::size_t>(o)]) continue;
      reach[static_cast<std::size_t>(o)] = std::min(
          reach[static_cast<std::size_t>(o)],
          std::max(core[static_cast<std::size_t>(current)], dist(current, o)));
    }
    int next = -1;
    for (int o = 0; o < m; ++o) {
      if (done[static_cast<std::size_t>(o)]) continue;
      if (next < 0 ||
          reach[static_cast<std::size_t>(o)] < reach[static_cast<std::size_t>(next)]) {
        next = o;
      }
    }
    current = next;
  }
  return reach[static_cast<std::size_t>(query)];
}

// Brute-force average precision: recompute precision/recall from scratch at
// every distinct threshold (O(n^2) sweep).
inline double brute_average_precision(const std::vector<double>& scores,
                                      const std::vector<std::uint8_t>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  std::size_t positives = 0;
  for (auto l : labels) positives += l ? 1 : 0;

  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        if (labels[i]) {
          ++tp;
        } else {
          ++fp;
        }
      }
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

}  // namespace outpro::testing
