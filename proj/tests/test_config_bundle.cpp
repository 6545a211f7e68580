#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "outpro/bundle.hpp"
#include "outpro/config.hpp"
#include "outpro/friedman.hpp"

using namespace outpro;
using Catch::Matchers::WithinAbs;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ModelBundle small_bundle() {
  RunConfig cfg;
  cfg.ntree = 40;
  cfg.K = 20;
  cfg.seed = 9;
  const Dataset train = gen_friedman({200, 6, 1.0, 33});
  const Standardizer st = Standardizer::fit(train.features);
  const Eigen::MatrixXd xs = st.transform(train.features);
  Forest forest = Forest::fit(xs, train.response, cfg.forest_params(), 2);
  const Eigen::VectorXd raw = compute_importance(forest, xs, train.response, 400, 2, 2);
  const ImportancePlan plan = select_signal(raw);
  auto core = std::make_shared<OodCore>(std::move(forest), plan, st, xs, cfg.K);
  const auto models = calibrate(core, {cfg.metric_spec("product")}, cfg.alpha, 2);

  ModelBundle b;
  b.config_snapshot = cfg.to_string();
  b.train = train;
  b.core = core;
  b.metric = models[0].metric();
  b.alpha = cfg.alpha;
  b.train_scores = models[0].train_scores();
  b.threshold = models[0].threshold();
  return b;
}

}  // namespace

TEST_CASE("config defaults match the documented values", "[bundle]") {
  const RunConfig cfg;
  CHECK(cfg.ntree == 500);
  CHECK(cfg.min_node_size == 5);
  CHECK(cfg.mtry == 0);
  CHECK(cfg.max_rules == 1000);
  CHECK(cfg.K == 50);
  CHECK(cfg.epsilon == 1e-6);
  CHECK(cfg.minkowski_p == 4.0);
  CHECK(cfg.min_pts == 5);
  CHECK(cfg.alpha == 0.05);
  CHECK(cfg.gamma == 4.0);
  CHECK(cfg.q == 0.05);
  CHECK(cfg.trim_fraction == 0.0);
  CHECK(cfg.shifts == std::vector<double>{0.05, 0.25, 0.5, 1.0, 2.0});
}

TEST_CASE("config parses sections and rejects unknown keys", "[bundle]") {
  const RunConfig cfg = RunConfig::parse(
      "[forest]\nntree = 123\n\n[outpro]\nmetrics = product, optics\nalpha = 0.1\n"
      "[run]\nseed = 42\n");
  CHECK(cfg.ntree == 123);
  CHECK(cfg.metrics == std::vector<std::string>{"product", "optics"});
  CHECK(cfg.alpha == 0.1);
  CHECK(cfg.seed == 42);
  CHECK(cfg.min_node_size == 5);  // untouched default

  CHECK_THROWS_WITH(RunConfig::parse("[forest]\nntrees = 5\n"),
                    Catch::Matchers::ContainsSubstring("unknown key"));
  CHECK_THROWS_WITH(RunConfig::parse("[zzz]\nntree = 5\n"),
                    Catch::Matchers::ContainsSubstring("unknown key"));
  CHECK_THROWS(RunConfig::parse("[forest]\nntree = abc\n"));
}

TEST_CASE("config round-trips through its own serialization", "[bundle]") {
  RunConfig cfg;
  cfg.ntree = 77;
  cfg.metrics = {"manhattan", "minkowski"};
  cfg.shifts = {0.1, 0.7};
  cfg.alpha = 0.025;
  cfg.seed = 404;
  const RunConfig back = RunConfig::parse(cfg.to_string());
  CHECK(back.to_string() == cfg.to_string());
  CHECK(back.ntree == 77);
  CHECK(back.shifts == cfg.shifts);
}

TEST_CASE("bundle save/load round-trips to identical bytes", "[bundle]") {
  const ModelBundle b = small_bundle();
  const std::string p1 = temp_path("outpro_bundle1.bin");
  const std::string p2 = temp_path("outpro_bundle2.bin");
  b.save(p1);

  const ModelBundle loaded = ModelBundle::load(p1);
  CHECK(loaded.config_snapshot == b.config_snapshot);
  CHECK(loaded.train.features == b.train.features);
  CHECK(loaded.train.response == b.train.response);
  CHECK(loaded.train.feature_names == b.train.feature_names);
  CHECK(loaded.alpha == b.alpha);
  CHECK(loaded.threshold == b.threshold);
  CHECK(loaded.train_scores == b.train_scores);
  CHECK(loaded.metric.kind == b.metric.kind);
  CHECK(loaded.core->plan().signal == b.core->plan().signal);
  CHECK(loaded.core->plan().weights == b.core->plan().weights);
  CHECK(loaded.core->K() == b.core->K());

  loaded.save(p2);
  CHECK(read_bytes(p1) == read_bytes(p2));

  // loaded model scores identically to the original fit
  const OodModel m1 = b.model();
  const OodModel m2 = loaded.model();
  const Eigen::VectorXd probe = b.train.features.row(3).transpose();
  CHECK(m1.score_point(probe).score == m2.score_point(probe).score);
}

TEST_CASE("bundle rejects wrong magic and version", "[bundle]") {
  const std::string path = temp_path("outpro_bundle_bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTABNDL";
    const std::uint32_t v = 1;
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  CHECK_THROWS_WITH(ModelBundle::load(path), Catch::Matchers::ContainsSubstring("not a model"));

  // flip the version field of a valid bundle
  const ModelBundle b = small_bundle();
  const std::string good = temp_path("outpro_bundle_ver.bin");
  b.save(good);
  std::string bytes = read_bytes(good);
  bytes[8] = 99;  // version lives right after the 8-byte magic
  {
    std::ofstream out(good, std::ios::binary);
    out << bytes;
  }
  CHECK_THROWS_WITH(ModelBundle::load(good),
                    Catch::Matchers::ContainsSubstring("version mismatch"));
}
