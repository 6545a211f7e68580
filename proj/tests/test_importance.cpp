#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "outpro/friedman.hpp"
#include "outpro/importance.hpp"
#include "outpro/rng.hpp"

using namespace outpro;
using Catch::Matchers::WithinAbs;

TEST_CASE("release clears exactly one axis", "[varprio]") {
  RuleRegion r = RuleRegion::unbounded(3);
  r.lower(1) = 0.2;
  r.upper(1) = 0.8;
  const RuleRegion rel = release(r, 1);
  CHECK(!std::isfinite(rel.lower(1)));
  CHECK(!std::isfinite(rel.upper(1)));

  // unconstrained axis: release is a no-op
  const RuleRegion same = release(r, 0);
  CHECK(same.lower == r.lower);
  CHECK(same.upper == r.upper);

  // idempotent
  const RuleRegion twice = release(rel, 1);
  CHECK(twice.lower == rel.lower);
  CHECK(twice.upper == rel.upper);

  CHECK_THROWS(release(r, 3));
  CHECK_THROWS(release(r, -1));
}

TEST_CASE("cube released on the first axis is unbounded along it only", "[varprio]") {
  const Forest f = testing::single_tree_forest(testing::unit_cube_tree(3), 3);
  Eigen::VectorXd x(3);
  x << 0.5, 0.5, 0.5;
  const auto rules = f.rules_containing(x);
  REQUIRE(rules.size() == 1);
  const RuleRegion released = release(rules[0], 0);
  CHECK(!std::isfinite(released.lower(0)));
  CHECK(!std::isfinite(released.upper(0)));
  for (int j : {1, 2}) {
    CHECK(released.lower(j) == 0.0);
    CHECK(released.upper(j) == 1.0);
  }
}

TEST_CASE("released region contains the original region", "[varprio]") {
  Rng rng(31);
  const Eigen::MatrixXd x = testing::random_matrix(100, 3, rng);
  const Eigen::VectorXd y = x.col(0).array() * 2.0 + x.col(1).array();
  const Forest f = Forest::fit(x, y, {5, 2, 4, 3});
  for (int t = 0; t < 5; ++t) {
    for (const auto& [node, region] : f.leaf_regions(t)) {
      for (int s = 0; s < 3; ++s) {
        const RuleRegion rel = release(region, s);
        for (int trial = 0; trial < 200; ++trial) {
          Eigen::VectorXd p(3);
          for (int j = 0; j < 3; ++j) p(j) = rng.uniform(-0.5, 1.5);
          if (region.contains(p)) REQUIRE(rel.contains(p));
        }
      }
    }
  }
}

TEST_CASE("feature never constrained by any rule scores exactly zero", "[varprio]") {
  Rng rng(32);
  Eigen::MatrixXd x = testing::random_matrix(80, 3, rng);
  x.col(2).setConstant(0.25);  // never splittable
  const Eigen::VectorXd y = 4.0 * x.col(0);
  const Forest f = Forest::fit(x, y, {30, 3, 4, 1});
  const Eigen::VectorXd scores = compute_importance(f, x, y, 1000, 5, 2);
  CHECK(scores(2) == 0.0);
  CHECK(scores(0) > 0.0);
}

TEST_CASE("strong linear signal dominates the importance scores", "[varprio]") {
  int wins = 0;
  for (int r = 0; r < 10; ++r) {
    Rng rng(700 + r);
    const Eigen::MatrixXd x = testing::random_matrix(200, 5, rng);
    Eigen::VectorXd y = 10.0 * x.col(0);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += 0.1 * rng.normal();
    const Forest f = Forest::fit(x, y, {60, 2, 5, static_cast<std::uint64_t>(r)}, 2);
    const Eigen::VectorXd scores = compute_importance(f, x, y, 1000, 3, 2);
    Eigen::Index best;
    scores.maxCoeff(&best);
    if (best == 0) ++wins;
  }
  CHECK(wins >= 9);
}

TEST_CASE("independent response keeps scores below the selection bar", "[varprio]") {
  // with shallow trees and pure noise, no feature should dominate: the
  // maximum score stays within 3x the mean positive score in most runs
  int calm_runs = 0;
  for (int r = 0; r < 20; ++r) {
    Rng rng(900 + r);
    const Eigen::MatrixXd x = testing::random_matrix(150, 6, rng);
    Eigen::VectorXd y(150);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.normal();
    const Forest f = Forest::fit(x, y, {40, 2, 20, static_cast<std::uint64_t>(r)}, 2);
    const Eigen::VectorXd scores = compute_importance(f, x, y, 500, 9, 2);
    double pos_sum = 0.0;
    int pos_n = 0;
    for (Eigen::Index j = 0; j < scores.size(); ++j) {
      if (scores(j) > 0) {
        pos_sum += scores(j);
        ++pos_n;
      }
    }
    if (pos_n == 0) {
      ++calm_runs;
      continue;
    }
    if (scores.maxCoeff() < 3.0 * (pos_sum / pos_n)) ++calm_runs;
  }
  CHECK(calm_runs >= 18);
}

TEST_CASE("select_signal applies the mean-positive policy", "[varprio]") {
  Eigen::VectorXd scores(4);
  scores << 4, 4, 0, 0;
  const ImportancePlan plan = select_signal(scores);
  CHECK(plan.signal == std::vector<int>{0, 1});
  CHECK_THAT(plan.weights(0), WithinAbs(0.5, 1e-15));
  CHECK_THAT(plan.weights(1), WithinAbs(0.5, 1e-15));
  CHECK_THAT(plan.weights.sum(), WithinAbs(1.0, 1e-12));

  Eigen::VectorXd skewed(5);
  skewed << 9, 1, 0, 0, 0;
  const ImportancePlan single = select_signal(skewed);
  CHECK(single.signal == std::vector<int>{0});
  CHECK_THAT(single.weights(0), WithinAbs(1.0, 1e-15));

  Eigen::VectorXd none(3);
  none << 0, -1, 0;
  CHECK_THROWS_WITH(select_signal(none), Catch::Matchers::ContainsSubstring("fall back"));
}

TEST_CASE("select_signal scale invariance and alternative policies", "[varprio]") {
  Eigen::VectorXd scores(6);
  scores << 5, 3, 1, 0.5, 0, 0;
  const ImportancePlan base = select_signal(scores);
  const ImportancePlan scaled = select_signal((scores.array() * 4.0).matrix());
  CHECK(base.signal == scaled.signal);
  CHECK(base.weights == scaled.weights);  // powers of two scale exactly

  const ImportancePlan topk = select_signal(scores, SelectionPolicy::TopK, 2);
  CHECK(topk.signal == std::vector<int>{0, 1});

  const ImportancePlan quant = select_signal(scores, SelectionPolicy::Quantile, 0, 0.5);
  CHECK(!quant.signal.empty());
}

TEST_CASE("importance scores are permutation-equivariant", "[varprio]") {
  // permute the feature columns and relabel the fitted forest's split axes
  // through the same permutation: identical rule geometry, so raw scores
  // must map through the permutation bit-for-bit
  Rng rng(33);
  const Eigen::Index n = 120, d = 4;
  const Eigen::MatrixXd x = testing::random_matrix(n, d, rng);
  Eigen::VectorXd y = 3.0 * x.col(1).array() + x.col(3).array().square();
  const Forest f1 = Forest::fit(x, y, {25, 2, 4, 5});
  const Eigen::VectorXd s1 = compute_importance(f1, x, y, 1000, 2, 1);

  const auto perm = [](int f) { return f == 1 ? 2 : (f == 2 ? 1 : f); };
  Eigen::MatrixXd xp = x;
  xp.col(1) = x.col(2);
  xp.col(2) = x.col(1);
  std::vector<Tree> relabeled = f1.trees();
  for (Tree& t : relabeled) {
    for (TreeNode& nd : t.nodes) {
      if (nd.feature >= 0) nd.feature = perm(nd.feature);
    }
  }
  const Forest f2 =
      Forest::from_parts(std::move(relabeled), f1.params(), d, f1.oob_predictions());
  const Eigen::VectorXd s2 = compute_importance(f2, xp, y, 1000, 2, 1);
  CHECK(s1(1) == s2(2));
  CHECK(s1(2) == s2(1));
  CHECK(s1(0) == s2(0));
  CHECK(s1(3) == s2(3));
}

TEST_CASE("friedman signal set captures the five true features", "[varprio][slow]") {
  int hits = 0;
  const int runs = 20;
  for (int r = 0; r < runs; ++r) {
    const Dataset ds = gen_friedman({2000, 10, 1.0, static_cast<std::uint64_t>(5000 + r)});
    const Standardizer st = Standardizer::fit(ds.features);
    const Eigen::MatrixXd xs = st.transform(ds.features);
    const Forest f = Forest::fit(xs, ds.response, {150, 4, 5, static_cast<std::uint64_t>(r)}, 2);
    const Eigen::VectorXd scores = compute_importance(f, xs, ds.response, 1000, 11, 2);
    const ImportancePlan plan = select_signal(scores);
    const std::set<int> sig(plan.signal.begin(), plan.signal.end());
    bool all = true;
    for (int j = 0; j < 5; ++j) all = all && sig.count(j) > 0;
    if (all) ++hits;
  }
  CHECK(hits >= 16);  // >= 80% of runs
}
