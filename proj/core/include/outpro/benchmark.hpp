#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "outpro/baselines.hpp"
#include "outpro/dataset.hpp"
#include "outpro/forest.hpp"
#include "outpro/importance.hpp"
#include "outpro/scorer.hpp"

namespace outpro {

struct RunRecord {
  std::string dataset;
  std::string method;
  std::string mode;    // shift | warp | joint | support
  double param = 0.0;  // shift magnitude, or gamma/q for copula modes
  std::uint64_t seed = 0;
  double auc_pr = 0.0;
  double flag_rate = 0.0;  // on the unperturbed ID test points
  double runtime_s = 0.0;  // method-specific calibrate+score time
  bool failed = false;
  std::string error;
};

struct BenchmarkReport {
  std::vector<RunRecord> runs;
  std::string generator;  // friedman | copula
  std::string notes;      // evaluation conventions, recorded for the report

  void write_runs_csv(const std::string& path) const;
  // mean/sd of auc_pr and flag_rate per (dataset, method, mode, param)
  void write_aggregate_csv(const std::string& path) const;
  // midrank average rank of auc_pr per method within each (mode, param);
  // incomplete runs are listed and excluded
  void write_ranks_csv(const std::string& path) const;
  void write_summary_json(const std::string& path) const;
};

struct VarprioConfig {
  int max_rules = 1000;
  SelectionPolicy policy = SelectionPolicy::MeanPositive;
  int top_k = 0;
  double quantile = 0.0;
};

struct BenchConfig {
  int replicates = 20;
  ForestParams forest;
  VarprioConfig varprio;
  std::vector<MetricSpec> metrics;       // outPro metrics to calibrate
  std::vector<BaselineKind> baselines;
  int K = 50;
  double alpha = 0.05;
  int knn_k = 10;
  double train_fraction = 0.8;
  double top_frac = 0.1;                 // anomaly-target share of features
  std::uint64_t seed = 1;
  unsigned jobs = 0;

  // friedman generator
  int n = 2000;
  int d = 10;
  double sigma = 1.0;
  std::vector<double> shifts = {0.05, 0.25, 0.5, 1.0, 2.0};

  // copula generator
  std::vector<std::string> modes = {"warp", "joint", "support"};
  double gamma = 4.0;
  double q = 0.05;
};

// Per replicate: simulate, split 80/20, fit forest + plan + calibrations,
// perturb the permutation-importance top features of the test points at
// each shift, label by the support rule, score ID test + anomalies, AUC-PR.
BenchmarkReport run_friedman_benchmark(const BenchConfig& config);

// Per replicate and copula mode: split, fit, generate a matched-count
// anomaly batch, score the pooled ID test + anomalies.
BenchmarkReport run_copula_benchmark(const Dataset& ds, const std::string& dataset_name,
                                     const BenchConfig& config);

struct RankRow {
  std::string mode;
  double param = 0.0;
  std::string method;
  double mean_rank = 0.0;
  int runs = 0;
};

// Midrank mean ranks per (mode, param); throws if a run grid cell is
// missing rather than explicitly failed.
std::vector<RankRow> average_ranks(const BenchmarkReport& report);

// Indices of the top ceil(frac * d) features by descending score.
std::vector<int> top_fraction_features(const Eigen::VectorXd& scores, double frac);

}  // namespace outpro
