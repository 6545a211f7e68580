#include "outpro/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "outpro/parallel.hpp"
#include "outpro/rng.hpp"

namespace outpro {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Sample {
  double x;
  double y;
};

struct GrowContext {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;
  int mtry;
  int min_node_size;
  Rng& rng;
  std::vector<int> feature_pool;  // scratch for mtry draws
  std::vector<Sample> sorted;     // scratch for split search
};

struct BestSplit {
  int feature = -1;
  double threshold = 0.0;
  double score = -kInf;  // sumL^2/nL + sumR^2/nR, larger is better
};

// Finds the best variance-reduction split for one candidate feature.
// Candidates lie at midpoints between consecutive distinct values with both
// children at least min_node_size. Scanning thresholds in ascending order
// keeps the lowest-threshold rule for exact score ties within a feature.
void best_split_for_feature(GrowContext& ctx, const std::vector<int>& samples, int feature,
                            BestSplit& best) {
  auto& sorted = ctx.sorted;
  sorted.clear();
  sorted.reserve(samples.size());
  for (int idx : samples) sorted.push_back({ctx.x(idx, feature), ctx.y(idx)});
  std::sort(sorted.begin(), sorted.end(),
            [](const Sample& a, const Sample& b) { return a.x < b.x; });

  const int n = static_cast<int>(sorted.size());
  double total = 0.0;
  for (const Sample& s : sorted) total += s.y;

  double left_sum = 0.0;
  for (int k = 1; k < n; ++k) {
    left_sum += sorted[static_cast<std::size_t>(k - 1)].y;
    if (k < ctx.min_node_size || n - k < ctx.min_node_size) continue;
    const double xa = sorted[static_cast<std::size_t>(k - 1)].x;
    const double xb = sorted[static_cast<std::size_t>(k)].x;
    if (!(xa < xb)) continue;
    const double right_sum = total - left_sum;
    const double score = left_sum * left_sum / static_cast<double>(k) +
                         right_sum * right_sum / static_cast<double>(n - k);
    if (score > best.score) {
      best.score = score;
      best.feature = feature;
      best.threshold = 0.5 * (xa + xb);
    }
  }
}

void grow_node(GrowContext& ctx, std::vector<TreeNode>& nodes, int node_index,
               std::vector<int>& samples) {
  TreeNode& self_init = nodes[static_cast<std::size_t>(node_index)];
  const int n = static_cast<int>(samples.size());
  double sum = 0.0, sumsq = 0.0;
  for (int idx : samples) {
    sum += ctx.y(idx);
    sumsq += ctx.y(idx) * ctx.y(idx);
  }
  self_init.mean = sum / static_cast<double>(n);
  self_init.count = n;

  const double sse = sumsq - sum * sum / static_cast<double>(n);
  if (n < 2 * ctx.min_node_size || sse <= 0.0) return;  // leaf

  // mtry candidate features, evaluated in ascending index order so exact
  // score ties resolve to the lowest feature index.
  auto& pool = ctx.feature_pool;
  std::iota(pool.begin(), pool.end(), 0);
  ctx.rng.partial_shuffle(pool, static_cast<std::size_t>(ctx.mtry));
  std::sort(pool.begin(), pool.begin() + ctx.mtry);

  BestSplit best;
  for (int f = 0; f < ctx.mtry; ++f) {
    best_split_for_feature(ctx, samples, pool[static_cast<std::size_t>(f)], best);
  }
  if (best.feature < 0) return;  // no admissible split

  std::vector<int> left_samples, right_samples;
  left_samples.reserve(samples.size());
  right_samples.reserve(samples.size());
  for (int idx : samples) {
    if (ctx.x(idx, best.feature) <= best.threshold) {
      left_samples.push_back(idx);
    } else {
      right_samples.push_back(idx);
    }
  }
  samples.clear();
  samples.shrink_to_fit();

  const int left_index = static_cast<int>(nodes.size());
  nodes.emplace_back();
  const int right_index = static_cast<int>(nodes.size());
  nodes.emplace_back();
  {
    TreeNode& self = nodes[static_cast<std::size_t>(node_index)];
    self.feature = best.feature;
    self.threshold = best.threshold;
    self.left = left_index;
    self.right = right_index;
  }
  grow_node(ctx, nodes, left_index, left_samples);
  grow_node(ctx, nodes, right_index, right_samples);
}

Tree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestParams& params,
               int mtry, std::uint64_t tree_seed) {
  const int n = static_cast<int>(x.rows());
  Rng rng(tree_seed);

  std::vector<int> draws(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> inbag(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const int pick = static_cast<int>(rng.bounded(static_cast<std::size_t>(n)));
    draws[static_cast<std::size_t>(i)] = pick;
    inbag[static_cast<std::size_t>(pick)] = 1;
  }

  Tree tree;
  for (int i = 0; i < n; ++i) {
    if (!inbag[static_cast<std::size_t>(i)]) tree.oob.push_back(i);
  }

  GrowContext ctx{x, y, mtry, params.min_node_size, rng, {}, {}};
  ctx.feature_pool.resize(static_cast<std::size_t>(x.cols()));
  tree.nodes.emplace_back();
  grow_node(ctx, tree.nodes, 0, draws);
  return tree;
}

}  // namespace

Forest Forest::fit(const Eigen::MatrixXd& x_std, const Eigen::VectorXd& y,
                   const ForestParams& params, unsigned jobs) {
  const Eigen::Index n = x_std.rows();
  const Eigen::Index d = x_std.cols();
  if (n < 1 || d < 1) throw std::invalid_argument("Forest::fit: empty training data");
  if (y.size() != n) throw std::invalid_argument("Forest::fit: response length mismatch");
  if (params.ntree < 1) throw std::invalid_argument("Forest::fit: ntree must be >= 1");
  if (params.min_node_size < 1) {
    throw std::invalid_argument("Forest::fit: min_node_size must be >= 1");
  }
  int mtry = params.mtry;
  if (mtry == 0) mtry = static_cast<int>((d + 2) / 3);
  if (mtry < 1 || mtry > d) throw std::invalid_argument("Forest::fit: mtry out of range");

  Forest f;
  f.params_ = params;
  f.params_.mtry = mtry;
  f.d_ = d;
  f.trees_.resize(static_cast<std::size_t>(params.ntree));
  parallel_for(static_cast<std::size_t>(params.ntree), jobs, [&](std::size_t t) {
    f.trees_[t] = grow_tree(x_std, y, params, mtry, derive_seed(params.seed, t));
  });

  // OOB predictions: mean over trees where the point was out-of-bag.
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(n);
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(n);
  std::vector<Eigen::VectorXd> tree_sums(f.trees_.size());
  std::vector<Eigen::VectorXi> tree_counts(f.trees_.size());
  parallel_for(f.trees_.size(), jobs, [&](std::size_t t) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    Eigen::VectorXi c = Eigen::VectorXi::Zero(n);
    for (int i : f.trees_[t].oob) {
      s(i) = f.trees_[t].predict(x_std.row(i).transpose());
      c(i) = 1;
    }
    tree_sums[t] = std::move(s);
    tree_counts[t] = std::move(c);
  });
  for (std::size_t t = 0; t < f.trees_.size(); ++t) {
    sums += tree_sums[t];
    counts += tree_counts[t];
  }
  f.oob_predictions_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (counts(i) > 0) {
      f.oob_predictions_(i) = sums(i) / counts(i);
    } else {
      f.oob_predictions_(i) = std::numeric_limits<double>::quiet_NaN();
      ++f.num_never_oob_;
    }
  }
  return f;
}

double Forest::predict(const Eigen::VectorXd& x_std) const {
  if (x_std.size() != d_) throw std::invalid_argument("Forest::predict: dimension mismatch");
  double sum = 0.0;
  for (const Tree& t : trees_) sum += t.predict(x_std);
  return sum / static_cast<double>(trees_.size());
}

Forest::SparseRule Forest::sparse_rule_containing(const Tree& tree,
                                                  const Eigen::VectorXd& x_std) const {
  SparseRule rule;
  int idx = 0;
  while (tree.nodes[static_cast<std::size_t>(idx)].feature >= 0) {
    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(idx)];
    const bool go_left = x_std(nd.feature) <= nd.threshold;
    auto it = std::find_if(rule.bounds.begin(), rule.bounds.end(),
                           [&](const AxisBound& b) { return b.axis == nd.feature; });
    if (it == rule.bounds.end()) {
      rule.bounds.push_back({nd.feature, -kInf, kInf});
      it = rule.bounds.end() - 1;
    }
    if (go_left) {
      it->upper = std::min(it->upper, nd.threshold);
      idx = nd.left;
    } else {
      it->lower = std::max(it->lower, nd.threshold);
      idx = nd.right;
    }
  }
  const TreeNode& leaf = tree.nodes[static_cast<std::size_t>(idx)];
  rule.node_mean = leaf.mean;
  rule.node_count = leaf.count;
  return rule;
}

std::vector<RuleRegion> Forest::rules_containing(const Eigen::VectorXd& x_std) const {
  if (x_std.size() != d_) {
    throw std::invalid_argument("Forest::rules_containing: dimension mismatch");
  }
  std::vector<RuleRegion> out;
  out.reserve(trees_.size());
  for (const Tree& t : trees_) {
    const SparseRule sparse = sparse_rule_containing(t, x_std);
    RuleRegion r = RuleRegion::unbounded(d_);
    for (const AxisBound& b : sparse.bounds) {
      r.lower(b.axis) = b.lower;
      r.upper(b.axis) = b.upper;
    }
    r.node_mean = sparse.node_mean;
    r.node_count = sparse.node_count;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::pair<int, Forest::SparseRule>> Forest::sparse_leaf_rules(int tree_index) const {
  const Tree& tree = trees_.at(static_cast<std::size_t>(tree_index));
  std::vector<std::pair<int, SparseRule>> out;

  struct Frame {
    int node;
    std::vector<AxisBound> bounds;
  };
  std::vector<Frame> stack;
  stack.push_back({0, {}});
  while (!stack.empty()) {
    Frame fr = std::move(stack.back());
    stack.pop_back();
    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(fr.node)];
    if (nd.feature < 0) {
      SparseRule rule;
      rule.bounds = std::move(fr.bounds);
      rule.node_mean = nd.mean;
      rule.node_count = nd.count;
      out.emplace_back(fr.node, std::move(rule));
      continue;
    }
    auto tightened = [&](bool left) {
      std::vector<AxisBound> b = fr.bounds;
      auto it = std::find_if(b.begin(), b.end(),
                             [&](const AxisBound& ab) { return ab.axis == nd.feature; });
      if (it == b.end()) {
        b.push_back({nd.feature, -kInf, kInf});
        it = b.end() - 1;
      }
      if (left) {
        it->upper = std::min(it->upper, nd.threshold);
      } else {
        it->lower = std::max(it->lower, nd.threshold);
      }
      return b;
    };
    stack.push_back({nd.right, tightened(false)});
    stack.push_back({nd.left, tightened(true)});
  }
  return out;
}

std::vector<std::pair<int, RuleRegion>> Forest::leaf_regions(int tree_index) const {
  std::vector<std::pair<int, RuleRegion>> out;
  for (auto& [node, sparse] : sparse_leaf_rules(tree_index)) {
    RuleRegion r = RuleRegion::unbounded(d_);
    for (const AxisBound& b : sparse.bounds) {
      r.lower(b.axis) = b.lower;
      r.upper(b.axis) = b.upper;
    }
    r.node_mean = sparse.node_mean;
    r.node_count = sparse.node_count;
    out.emplace_back(node, std::move(r));
  }
  return out;
}

namespace {

// Prediction with one feature's value overridden, avoiding a row copy.
double predict_with_override(const Tree& tree, const Eigen::MatrixXd& x, int row, int feature,
                             double value) {
  int idx = 0;
  while (tree.nodes[static_cast<std::size_t>(idx)].feature >= 0) {
    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(idx)];
    const double v = nd.feature == feature ? value : x(row, nd.feature);
    idx = v <= nd.threshold ? nd.left : nd.right;
  }
  return tree.nodes[static_cast<std::size_t>(idx)].mean;
}

}  // namespace

Eigen::VectorXd Forest::permutation_importance(const Eigen::MatrixXd& x_std,
                                               const Eigen::VectorXd& y, std::uint64_t seed,
                                               unsigned jobs) const {
  const Eigen::Index d = d_;
  std::vector<Eigen::VectorXd> per_tree(trees_.size());
  parallel_for(trees_.size(), jobs, [&](std::size_t t) {
    const Tree& tree = trees_[t];
    Eigen::VectorXd imp = Eigen::VectorXd::Zero(d);
    const std::size_t m = tree.oob.size();
    if (m == 0) {
      per_tree[t] = imp;
      return;
    }

    std::vector<std::uint8_t> used(static_cast<std::size_t>(d), 0);
    for (const TreeNode& nd : tree.nodes) {
      if (nd.feature >= 0) used[static_cast<std::size_t>(nd.feature)] = 1;
    }

    double base_sse = 0.0;
    for (int i : tree.oob) {
      const double r = tree.predict(x_std.row(i).transpose()) - y(i);
      base_sse += r * r;
    }

    std::vector<int> perm(tree.oob);
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!used[static_cast<std::size_t>(j)]) continue;  // predictions unchanged
      Rng rng(derive_seed(derive_seed(seed, t), static_cast<std::uint64_t>(j)));
      std::copy(tree.oob.begin(), tree.oob.end(), perm.begin());
      rng.shuffle(perm);
      double sse = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const int row = tree.oob[k];
        const double v = x_std(perm[k], j);
        const double r = predict_with_override(tree, x_std, row, static_cast<int>(j), v) - y(row);
        sse += r * r;
      }
      imp(j) = (sse - base_sse) / static_cast<double>(m);
    }
    per_tree[t] = imp;
  });

  Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
  for (const auto& imp : per_tree) total += imp;
  return total / static_cast<double>(trees_.size());
}

Forest Forest::from_parts(std::vector<Tree> trees, const ForestParams& params, Eigen::Index d,
                          Eigen::VectorXd oob_predictions) {
  Forest f;
  f.trees_ = std::move(trees);
  f.params_ = params;
  f.d_ = d;
  f.oob_predictions_ = std::move(oob_predictions);
  for (Eigen::Index i = 0; i < f.oob_predictions_.size(); ++i) {
    if (std::isnan(f.oob_predictions_(i))) ++f.num_never_oob_;
  }
  return f;
}

}  // namespace outpro
