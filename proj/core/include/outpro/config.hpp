#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "outpro/benchmark.hpp"
#include "outpro/importance.hpp"
#include "outpro/scorer.hpp"

namespace outpro {

// Reproducible run configuration: key = value lines grouped in [sections].
// Unknown sections or keys are rejected; CLI flags override file values.
struct RunConfig {
  // [data]
  std::string response = "y";
  double train_fraction = 0.8;

  // [forest]
  int ntree = 500;
  int mtry = 0;  // 0 = ceil(d/3)
  int min_node_size = 5;

  // [varprio]
  int max_rules = 1000;
  std::string selection = "mean_positive";  // mean_positive | top_k | quantile
  int top_k = 0;
  double sel_quantile = 0.5;

  // [outpro]
  int K = 50;
  std::vector<std::string> metrics = {"product"};
  double epsilon = 1e-6;
  double minkowski_p = 4.0;
  int min_pts = 5;
  double ridge = 1e-6;
  double alpha = 0.05;
  double trim_fraction = 0.0;

  // [anomaly]
  std::string mode = "warp";
  double gamma = 4.0;
  double q = 0.05;
  double magnitude = 0.25;
  int count = 0;  // 0 = matched to input rows
  double top_frac = 0.1;

  // [bench]
  int replicates = 20;
  int n = 2000;
  int d = 10;
  double sigma = 1.0;
  std::vector<double> shifts = {0.05, 0.25, 0.5, 1.0, 2.0};
  std::vector<std::string> baselines = {"msp", "odin", "mahalanobis_input", "conformal",
                                        "knn_input"};
  std::vector<std::string> modes = {"warp", "joint", "support"};
  int knn_k = 10;

  // [run]
  std::uint64_t seed = 1;
  unsigned jobs = 0;  // 0 = OUTPRO_JOBS env or hardware

  static RunConfig load(const std::string& path);
  static RunConfig parse(const std::string& text);
  std::string to_string() const;
  void save(const std::string& path) const;

  MetricSpec metric_spec(const std::string& name) const;
  std::vector<MetricSpec> metric_specs() const;
  SelectionPolicy selection_policy() const;
  ForestParams forest_params() const;
  BenchConfig bench_config() const;
};

}  // namespace outpro
