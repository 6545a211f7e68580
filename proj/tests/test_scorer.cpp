#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <memory>

#include "helpers.hpp"
#include "outpro/friedman.hpp"
#include "outpro/scorer.hpp"

using namespace outpro;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Fig-style geometry: one cube rule (0,1]^3, training points A inside and
// B outside along the first axis only.
struct CubeFixture {
  std::shared_ptr<OodCore> core;
  Eigen::VectorXd x;

  CubeFixture() {
    Eigen::MatrixXd train(2, 3);
    train << 0.4, 0.6, 0.5,   // A
             1.5, 0.55, 0.45; // B
    Forest f = testing::single_tree_forest(testing::unit_cube_tree(3), 3);
    core = std::make_shared<OodCore>(std::move(f), testing::uniform_plan({0, 1, 2}, 3),
                                     testing::identity_standardizer(3), train, 2);
    x.resize(3);
    x << 0.5, 0.5, 0.5;
  }
};

}  // namespace

TEST_CASE("cube geometry reproduces the worked frequency profiles", "[outpro]") {
  CubeFixture fx;
  const auto profiles = fx.core->frequency_profiles(fx.x);
  REQUIRE(profiles.size() == 2);

  const ProximityProfile& a = profiles[0];
  CHECK(a.counts == std::vector<std::uint32_t>{1, 1, 1});
  CHECK(a.total == 3);
  for (double p : a.freqs) CHECK_THAT(p, WithinAbs(1.0 / 3.0, 1e-15));
  CHECK_THAT(a.dispersion, WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THAT(a.weight, WithinAbs(2.0, 1e-15));

  const ProximityProfile& b = profiles[1];
  CHECK(b.counts == std::vector<std::uint32_t>{0, 1, 1});
  CHECK(b.total == 2);
  CHECK_THAT(b.dispersion, WithinAbs(0.5, 1e-15));
  CHECK_THAT(b.weight, WithinAbs(1.0, 1e-15));

  const auto nbhd = fx.core->select_neighborhood(profiles);
  CHECK(nbhd == std::vector<int>{0, 1});  // W(A)=2 > W(B)=1
}

TEST_CASE("profile arithmetic invariants hold on random instances", "[outpro]") {
  Rng rng(41);
  const Eigen::Index n = 150, d = 5;
  const Eigen::MatrixXd x = testing::random_matrix(n, d, rng);
  const Eigen::VectorXd y = x.col(0).array() * 2.0 + x.col(1).array().sin();
  Forest f = Forest::fit(x, y, {15, 2, 4, 3});
  const auto core = std::make_shared<OodCore>(
      std::move(f), testing::uniform_plan({0, 1, 2}, d), testing::identity_standardizer(d), x, 10);

  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd probe(d);
    for (Eigen::Index j = 0; j < d; ++j) probe(j) = rng.uniform01();
    const auto profiles = core->frequency_profiles(probe);
    for (const ProximityProfile& pr : profiles) {
      std::uint64_t sum = 0;
      for (auto c : pr.counts) sum += c;
      CHECK(sum == pr.total);  // integer normalization: sum p = 1 or all zero
      CHECK(pr.dispersion <= 1.0 - 1.0 / 3.0 + 1e-12);
      CHECK(pr.weight == static_cast<double>(pr.total) * pr.dispersion);
      if (pr.total == 0) {
        for (double p0 : pr.freqs) CHECK(p0 == 0.0);
      }
    }
  }
}

TEST_CASE("frequency counts match the naive triple-loop oracle exactly", "[outpro]") {
  for (int inst = 0; inst < 10; ++inst) {
    Rng rng(500 + inst);
    const Eigen::Index n = 50 + static_cast<Eigen::Index>(rng.bounded(150));
    const Eigen::Index d = 3 + static_cast<Eigen::Index>(rng.bounded(4));
    const Eigen::MatrixXd x = testing::random_matrix(n, d, rng);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = x(i, 0) * 3.0 + rng.normal();
    const int ntree = 1 + static_cast<int>(rng.bounded(20));
    Forest f = Forest::fit(x, y, {ntree, 2, 3, static_cast<std::uint64_t>(inst)});

    std::vector<int> signal;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (rng.uniform01() < 0.6 || (j == d - 1 && signal.empty())) {
        signal.push_back(static_cast<int>(j));
      }
    }
    const auto naive = testing::naive_frequency_counts(f, signal, x, x.row(1).transpose());
    const auto core = std::make_shared<OodCore>(std::move(f), testing::uniform_plan(signal, d),
                                                testing::identity_standardizer(d), x, 5);
    const auto fast = core->frequency_counts(x.row(1).transpose());
    REQUIRE(fast.size() == naive.size());
    for (std::size_t k = 0; k < naive.size(); ++k) {
      REQUIRE(fast[k] == naive[k]);
    }
  }
}

TEST_CASE("neighborhood selection breaks ties by total then index", "[outpro]") {
  CubeFixture fx;
  std::vector<ProximityProfile> profiles(3);
  profiles[0].total = 7;
  profiles[0].weight = 2.0;
  profiles[1].total = 3;
  profiles[1].weight = 2.0;
  profiles[2].total = 9;
  profiles[2].weight = 5.0;
  auto nbhd = fx.core->select_neighborhood(profiles);
  CHECK(nbhd == std::vector<int>{2, 0});  // K = 2: largest weight first, tie by total

  // weights (5,1,3), K=2 -> {0, 2}
  profiles[0].weight = 5.0;
  profiles[1].weight = 1.0;
  profiles[2].weight = 3.0;
  nbhd = fx.core->select_neighborhood(profiles);
  CHECK(nbhd == std::vector<int>{0, 2});

  // all totals zero is an error
  for (auto& p : profiles) {
    p.total = 0;
    p.weight = 0.0;
  }
  CHECK_THROWS_WITH(fx.core->select_neighborhood(profiles),
                    Catch::Matchers::ContainsSubstring("no co-occurring"));

  // self-exclusion removes the excluded candidate
  profiles[0] = {};
  profiles[0].total = 5;
  profiles[0].weight = 3.0;
  profiles[1].total = 5;
  profiles[1].weight = 1.0;
  nbhd = fx.core->select_neighborhood(profiles, 0);
  CHECK(nbhd == std::vector<int>{1});
}

TEST_CASE("metric identities and symmetry", "[outpro]") {
  Rng rng(42);
  const Eigen::Index d = 6;
  const Eigen::MatrixXd train = testing::random_matrix(80, d, rng, -2.0, 2.0);
  Eigen::VectorXd y(80);
  for (Eigen::Index i = 0; i < 80; ++i) y(i) = train(i, 0) + rng.normal();
  Forest f = Forest::fit(train, y, {10, 2, 4, 1});
  ImportancePlan plan;
  plan.signal = {0, 2, 3, 5};
  Eigen::VectorXd w(4);
  w << 0.4, 0.3, 0.2, 0.1;
  plan.weights = w;
  plan.raw_scores = Eigen::VectorXd::Ones(d);
  plan.policy = "test";
  const auto core = std::make_shared<OodCore>(std::move(f), plan,
                                              testing::identity_standardizer(d), train, 10);

  MetricSpec product = MetricSpec::parse("product");
  MetricSpec euclid = MetricSpec::parse("euclidean");
  MetricSpec manhattan = MetricSpec::parse("manhattan");
  MetricSpec mahal = MetricSpec::parse("mahalanobis");
  MetricSpec mink2 = MetricSpec::parse("minkowski");
  mink2.p = 2.0;
  MetricSpec mink1 = MetricSpec::parse("minkowski");
  mink1.p = 1.0;

  Eigen::VectorXd a(d), b(d);
  for (int trial = 0; trial < 1000; ++trial) {
    for (Eigen::Index j = 0; j < d; ++j) {
      a(j) = rng.uniform(-3.0, 3.0);
      b(j) = rng.uniform(-3.0, 3.0);
    }
    const double e = core->subspace_distance(euclid, a, b);
    const double m2 = core->subspace_distance(mink2, a, b);
    REQUIRE_THAT(m2, WithinRel(e, 1e-12));
    const double m = core->subspace_distance(manhattan, a, b);
    const double m1 = core->subspace_distance(mink1, a, b);
    REQUIRE_THAT(m1, WithinRel(m, 1e-12));
  }

  // D(x,x): product floor epsilon, others zero; symmetry for all metrics
  for (const MetricSpec& spec : {product, euclid, manhattan, mahal, mink2}) {
    for (int trial = 0; trial < 50; ++trial) {
      for (Eigen::Index j = 0; j < d; ++j) {
        a(j) = rng.uniform(-3.0, 3.0);
        b(j) = rng.uniform(-3.0, 3.0);
      }
      const double dxy = core->subspace_distance(spec, a, b);
      const double dyx = core->subspace_distance(spec, b, a);
      REQUIRE(dxy == dyx);
      const double self = core->subspace_distance(spec, a, a);
      if (spec.kind == MetricKind::Product) {
        REQUIRE_THAT(self, WithinRel(spec.epsilon, 1e-12));
      } else {
        REQUIRE(self == 0.0);
      }
      REQUIRE(dxy >= self);
    }
  }
}

TEST_CASE("one-dimensional mahalanobis reduces to |dz|/sd", "[outpro]") {
  // unit-variance training column: distance along a single signal axis
  Eigen::MatrixXd train(4, 2);
  const double a = std::sqrt(3.0) / 2.0;  // sample sd exactly 1
  train << a, 0, -a, 0, a, 1, -a, 1;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  Forest f = Forest::fit(train, y, {2, 1, 1, 0});
  const auto core = std::make_shared<OodCore>(std::move(f), testing::uniform_plan({0}, 2),
                                              testing::identity_standardizer(2), train, 2);
  Eigen::VectorXd p1(2), p2(2);
  p1 << 0.0, 0.0;
  p2 << 2.0, 0.0;
  const double dist = core->subspace_distance(MetricSpec::parse("mahalanobis"), p1, p2);
  CHECK_THAT(dist, WithinRel(2.0, 1e-4));  // ridge shifts it only slightly
}

TEST_CASE("calibration threshold is the right order statistic", "[outpro]") {
  // alpha = 0.05, n = 1000: threshold = 950th order statistic
  Eigen::VectorXd scores(1000);
  Rng rng(43);
  for (Eigen::Index i = 0; i < 1000; ++i) scores(i) = rng.uniform01();
  CubeFixture fx;
  const OodModel model(fx.core, MetricSpec::parse("product"), 0.05, scores);
  std::vector<double> sorted(scores.data(), scores.data() + 1000);
  std::sort(sorted.begin(), sorted.end());
  CHECK(model.threshold() == sorted[949]);

  // raising alpha never raises the threshold
  const OodModel wider(fx.core, MetricSpec::parse("product"), 0.20, scores);
  CHECK(wider.threshold() <= model.threshold());

  // alpha too small for n: the (1-alpha) order statistic would be the max
  Eigen::VectorXd tiny = scores.head(10);
  CHECK_THROWS(OodModel(fx.core, MetricSpec::parse("product"), 0.05, tiny));
  CHECK_THROWS(OodModel(fx.core, MetricSpec::parse("product"), 0.0, scores));
}

TEST_CASE("score_point flags far shifts and is deterministic", "[outpro]") {
  const Dataset ds = gen_friedman({400, 6, 1.0, 77});
  const Standardizer st = Standardizer::fit(ds.features);
  const Eigen::MatrixXd xs = st.transform(ds.features);
  Forest f = Forest::fit(xs, ds.response, {100, 2, 5, 7}, 2);
  const Eigen::VectorXd raw = compute_importance(f, xs, ds.response, 500, 3, 2);
  const ImportancePlan plan = select_signal(raw);
  const auto core = std::make_shared<OodCore>(std::move(f), plan, st, xs, 30);

  const std::vector<MetricSpec> metrics = {MetricSpec::parse("product"),
                                           MetricSpec::parse("manhattan")};
  const auto models = calibrate(core, metrics, 0.05, 2);
  REQUIRE(models.size() == 2);

  // a point shifted +10 sd along the top signal feature must be flagged
  const int top = plan.signal[0];
  int flagged = 0;
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd probe = ds.features.row(i).transpose();
    probe(top) += 10.0 * st.sds(top);
    for (const auto& model : models) flagged += model.score_point(probe).flagged ? 1 : 0;
  }
  CHECK(flagged >= 38);  // 95% of 40

  // deterministic: same point scores identically across jobs settings
  const OodResult r1 = models[0].score_point(ds.features.row(5).transpose());
  const OodResult r2 = models[0].score_point(ds.features.row(5).transpose());
  CHECK(r1.score == r2.score);
  CHECK(r1.percentile == r2.percentile);
  const auto batch1 = models[0].score_batch(ds.features.topRows(40), 1);
  const auto batch4 = models[0].score_batch(ds.features.topRows(40), 4);
  for (std::size_t i = 0; i < batch1.size(); ++i) {
    REQUIRE(batch1[i].score == batch4[i].score);
  }

  // flagged <=> score > threshold; percentile consistent with train scores
  for (const auto& res : batch1) {
    CHECK(res.flagged == (res.score > models[0].threshold()));
    CHECK(res.percentile >= 0.0);
    CHECK(res.percentile <= 100.0);
  }
}

TEST_CASE("scoring a training point lands below its calibration score", "[outpro][slow]") {
  // calibration scores are self-excluded; plain scoring is not, so for a
  // training point the self neighbor (distance ~0) displaces the K-th
  // neighbor and the score strictly decreases. The shift is of order
  // d_K / K, so the below-median fraction moves measurably above 1/2.
  const Dataset ds = gen_friedman({2000, 10, 1.0, 123});
  const Standardizer st = Standardizer::fit(ds.features);
  const Eigen::MatrixXd xs = st.transform(ds.features);
  Forest f = Forest::fit(xs, ds.response, {200, 4, 5, 5}, 2);
  const Eigen::VectorXd raw = compute_importance(f, xs, ds.response, 1000, 3, 2);
  const ImportancePlan plan = select_signal(raw);
  const auto core = std::make_shared<OodCore>(std::move(f), plan, st, xs, 50);
  const auto models = calibrate(core, {MetricSpec::parse("product")}, 0.05, 2);

  const auto results = models[0].score_batch(ds.features.topRows(300), 2);
  int below_half = 0;
  for (int i = 0; i < 300; ++i) {
    below_half += results[static_cast<std::size_t>(i)].percentile < 50.0 ? 1 : 0;
    REQUIRE(results[static_cast<std::size_t>(i)].score <= models[0].train_scores()(i));
  }
  CHECK(below_half > 165);  // clearly above the uniform 150
}

TEST_CASE("rank invariance: exact rescaling of raw scores changes nothing", "[outpro]") {
  const Dataset ds = gen_friedman({300, 6, 1.0, 9});
  const Standardizer st = Standardizer::fit(ds.features);
  const Eigen::MatrixXd xs = st.transform(ds.features);
  const Forest f = Forest::fit(xs, ds.response, {60, 2, 5, 2}, 2);
  const Eigen::VectorXd raw = compute_importance(f, xs, ds.response, 500, 3, 2);

  const ImportancePlan plan1 = select_signal(raw);
  const ImportancePlan plan2 = select_signal((raw.array() * 4.0).matrix());
  REQUIRE(plan1.signal == plan2.signal);
  REQUIRE(plan1.weights == plan2.weights);

  const auto core1 = std::make_shared<OodCore>(f, plan1, st, xs, 25);
  const auto core2 = std::make_shared<OodCore>(f, plan2, st, xs, 25);
  const auto m1 = calibrate(core1, {MetricSpec::parse("euclidean")}, 0.05, 2);
  const auto m2 = calibrate(core2, {MetricSpec::parse("euclidean")}, 0.05, 2);
  CHECK(m1[0].train_scores() == m2[0].train_scores());
  const OodResult r1 = m1[0].score_point(ds.features.row(0).transpose());
  const OodResult r2 = m2[0].score_point(ds.features.row(0).transpose());
  CHECK(r1.score == r2.score);
  CHECK(r1.flagged == r2.flagged);
}

TEST_CASE("single-feature pipeline works with zero dispersions", "[outpro]") {
  // |S| = 1 forces every p_s to 1, so all proximity weights are 0 and
  // neighborhood selection falls back to the co-occurrence totals
  Rng rng(3);
  const Eigen::Index n = 200;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform01();
    y(i) = 3.0 * x(i, 0) + 0.1 * rng.normal();
  }
  const Standardizer st = Standardizer::fit(x);
  const Eigen::MatrixXd xs = st.transform(x);
  Forest f = Forest::fit(xs, y, {50, 1, 5, 1}, 2);
  const ImportancePlan plan = select_signal(compute_importance(f, xs, y, 500, 2, 2));
  REQUIRE(plan.signal == std::vector<int>{0});
  const auto core = std::make_shared<OodCore>(std::move(f), plan, st, xs, 20);
  const auto models = calibrate(core, {MetricSpec::parse("product")}, 0.05, 2);

  const auto profiles = core->frequency_profiles(xs.row(0).transpose());
  for (const auto& pr : profiles) {
    CHECK(pr.dispersion == 0.0);
    CHECK(pr.weight == 0.0);
  }
  Eigen::VectorXd far(1);
  far << 5.0;
  CHECK(models[0].score_point(far).flagged);
  CHECK_FALSE(models[0].score_point(x.row(10).transpose()).flagged);
}

TEST_CASE("trimmed-mean aggregation is exposed but off by default", "[outpro]") {
  CubeFixture fx;
  CHECK(fx.core->trim_fraction() == 0.0);
  fx.core->set_trim_fraction(0.2);
  CHECK(fx.core->trim_fraction() == 0.2);
  CHECK_THROWS(fx.core->set_trim_fraction(0.5));
}
