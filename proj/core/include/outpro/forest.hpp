#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <vector>

namespace outpro {

// Axis-aligned hyperrectangle of one terminal node. Membership uses the
// same convention as tree traversal: lower < x[j] <= upper on every axis.
struct RuleRegion {
  Eigen::VectorXd lower;  // length d, defaults -inf
  Eigen::VectorXd upper;  // length d, defaults +inf
  double node_mean = 0.0;
  int node_count = 0;

  static RuleRegion unbounded(Eigen::Index d) {
    RuleRegion r;
    r.lower = Eigen::VectorXd::Constant(d, -std::numeric_limits<double>::infinity());
    r.upper = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity());
    return r;
  }

  bool contains(const Eigen::VectorXd& x) const {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (!(x(j) > lower(j) && x(j) <= upper(j))) return false;
    }
    return true;
  }
};

// feature < 0 marks a leaf. Internal nodes route x[feature] <= threshold
// to `left`, otherwise to `right`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double mean = 0.0;
  int count = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<int> oob;  // training indices never drawn into this bootstrap

  int leaf_index(const Eigen::VectorXd& x) const {
    int idx = 0;
    while (nodes[static_cast<std::size_t>(idx)].feature >= 0) {
      const TreeNode& nd = nodes[static_cast<std::size_t>(idx)];
      idx = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return idx;
  }

  double predict(const Eigen::VectorXd& x) const {
    return nodes[static_cast<std::size_t>(leaf_index(x))].mean;
  }
};

struct ForestParams {
  int ntree = 500;
  int mtry = 0;  // 0 resolves to ceil(d/3)
  int min_node_size = 5;
  std::uint64_t seed = 0;
};

// One axis constraint of a terminal node, on standardized scale.
struct AxisBound {
  int axis;
  double lower;
  double upper;
};

// Regression random forest grown on standardized features: bootstrap
// samples, variance-reduction splits over mtry candidate features,
// midpoint thresholds, deterministic per-tree RNG streams.
class Forest {
 public:
  static Forest fit(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y,
                    const ForestParams& params, unsigned jobs = 0);

  double predict(const Eigen::VectorXd& x_std) const;

  // One region per tree: the terminal node x falls into.
  std::vector<RuleRegion> rules_containing(const Eigen::VectorXd& x_std) const;

  // Sparse form of the same regions (constrained axes only), plus leaf stats.
  struct SparseRule {
    std::vector<AxisBound> bounds;
    double node_mean = 0.0;
    int node_count = 0;
  };
  SparseRule sparse_rule_containing(const Tree& tree, const Eigen::VectorXd& x_std) const;

  // All terminal nodes of one tree with reconstructed regions.
  std::vector<std::pair<int, RuleRegion>> leaf_regions(int tree_index) const;
  std::vector<std::pair<int, SparseRule>> sparse_leaf_rules(int tree_index) const;

  // Increase in per-tree out-of-bag mean squared error after permuting one
  // column, averaged over trees. Exactly zero for features no tree splits on.
  Eigen::VectorXd permutation_importance(const Eigen::MatrixXd& x_std,
                                         const Eigen::VectorXd& y, std::uint64_t seed,
                                         unsigned jobs = 0) const;

  const Eigen::VectorXd& oob_predictions() const { return oob_predictions_; }
  int num_never_oob() const { return num_never_oob_; }

  const std::vector<Tree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  Eigen::Index dimension() const { return d_; }

  // Assembles a forest from explicit trees (deserialization, hand-built
  // geometries in tests). oob_predictions are taken as given.
  static Forest from_parts(std::vector<Tree> trees, const ForestParams& params,
                           Eigen::Index d, Eigen::VectorXd oob_predictions);

 private:
  std::vector<Tree> trees_;
  ForestParams params_;
  Eigen::Index d_ = 0;
  Eigen::VectorXd oob_predictions_;
  int num_never_oob_ = 0;
};

}  // namespace outpro
