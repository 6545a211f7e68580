#include "outpro/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "outpro/copula.hpp"
#include "outpro/friedman.hpp"
#include "outpro/metrics.hpp"
#include "outpro/parallel.hpp"
#include "outpro/rng.hpp"

namespace outpro {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Everything one replicate shares across anomaly modes and magnitudes.
struct FittedReplicate {
  Dataset train;
  Dataset test;
  Standardizer standardizer;
  std::shared_ptr<const Forest> forest;
  ImportancePlan plan;
  std::shared_ptr<const OodCore> core;
  std::vector<OodModel> models;          // one per configured metric
  std::vector<BaselineModel> baselines;
  std::vector<double> outpro_calib_s;    // calibration wall time, split evenly
  std::vector<double> baseline_fit_s;
};

FittedReplicate fit_replicate(const Dataset& ds, const BenchConfig& cfg, std::uint64_t rep_seed,
                              unsigned jobs) {
  FittedReplicate rep;
  auto [train, test] = split(ds, {cfg.train_fraction, derive_seed(rep_seed, 1)});
  rep.train = std::move(train);
  rep.test = std::move(test);
  rep.standardizer = Standardizer::fit(rep.train.features);
  const Eigen::MatrixXd train_std = rep.standardizer.transform(rep.train.features);

  ForestParams fp = cfg.forest;
  fp.seed = derive_seed(rep_seed, 2);
  rep.forest = std::make_shared<const Forest>(
      Forest::fit(train_std, rep.train.response, fp, jobs));

  const Eigen::VectorXd raw = compute_importance(*rep.forest, train_std, rep.train.response,
                                                 cfg.varprio.max_rules,
                                                 derive_seed(rep_seed, 3), jobs);
  rep.plan = select_signal(raw, cfg.varprio.policy, cfg.varprio.top_k, cfg.varprio.quantile);

  const double ridge = cfg.metrics.empty() ? 1e-6 : cfg.metrics.front().ridge;
  auto core = std::make_shared<OodCore>(*rep.forest, rep.plan, rep.standardizer, train_std,
                                        cfg.K, ridge);
  rep.core = core;

  const auto t0 = Clock::now();
  rep.models = calibrate(core, cfg.metrics, cfg.alpha, jobs);
  const double calib_total = seconds_since(t0);
  rep.outpro_calib_s.assign(cfg.metrics.size(),
                            calib_total / static_cast<double>(cfg.metrics.size()));

  for (BaselineKind kind : cfg.baselines) {
    const auto b0 = Clock::now();
    BaselineModel::FitInputs in{rep.train, rep.standardizer, rep.forest, cfg.forest,
                                cfg.alpha,  cfg.knn_k,        derive_seed(rep_seed, 4), jobs};
    rep.baselines.push_back(BaselineModel::fit(kind, in));
    rep.baseline_fit_s.push_back(seconds_since(b0));
  }
  return rep;
}

// Scores the pooled set (ID test rows first, then the anomaly batch) for
// every configured method and appends one record per method.
void score_pool(const FittedReplicate& rep, const BenchConfig& cfg, const std::string& dataset,
                const std::string& mode, double param, std::uint64_t seed,
                const AnomalyBatch& batch, unsigned jobs, std::vector<RunRecord>& out) {
  const Eigen::Index n_test = rep.test.n();
  const Eigen::Index n_anom = batch.points.rows();
  const Eigen::Index n_pool = n_test + n_anom;

  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n_pool), 0);
  for (Eigen::Index i = 0; i < n_anom; ++i) {
    labels[static_cast<std::size_t>(n_test + i)] = batch.labels[static_cast<std::size_t>(i)];
  }

  Eigen::MatrixXd pool(n_pool, rep.test.d());
  pool.topRows(n_test) = rep.test.features;
  pool.bottomRows(n_anom) = batch.points;

  auto make_record = [&](const std::string& method) {
    RunRecord r;
    r.dataset = dataset;
    r.method = method;
    r.mode = mode;
    r.param = param;
    r.seed = seed;
    return r;
  };

  // outPro metrics share one profile pass per pooled point.
  const auto t0 = Clock::now();
  const std::size_t n_metrics = cfg.metrics.size();
  Eigen::MatrixXd scores(n_pool, static_cast<Eigen::Index>(n_metrics));
  std::vector<std::string> point_errors(static_cast<std::size_t>(n_pool));
  parallel_for(static_cast<std::size_t>(n_pool), jobs, [&](std::size_t i) {
    const Eigen::VectorXd x_std = rep.core->standardizer().transform_row(
        pool.row(static_cast<Eigen::Index>(i)).transpose());
    try {
      const auto profiles = rep.core->frequency_profiles(x_std);
      const auto nbhd = rep.core->select_neighborhood(profiles);
      for (std::size_t m = 0; m < n_metrics; ++m) {
        scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) =
            rep.core->aggregate_score(cfg.metrics[m], x_std, nbhd);
      }
    } catch (const std::exception& e) {
      point_errors[i] = e.what();
    }
  });
  const double outpro_score_s = seconds_since(t0) / static_cast<double>(n_metrics);

  std::string pool_error;
  for (const auto& e : point_errors) {
    if (!e.empty()) {
      pool_error = e;
      break;
    }
  }

  for (std::size_t m = 0; m < n_metrics; ++m) {
    RunRecord r = make_record("outpro_" + cfg.metrics[m].name());
    r.runtime_s = rep.outpro_calib_s[m] + outpro_score_s;
    if (!pool_error.empty()) {
      r.failed = true;
      r.error = pool_error;
      r.auc_pr = std::numeric_limits<double>::quiet_NaN();
      r.flag_rate = std::numeric_limits<double>::quiet_NaN();
      out.push_back(std::move(r));
      continue;
    }
    std::vector<double> s(static_cast<std::size_t>(n_pool));
    for (Eigen::Index i = 0; i < n_pool; ++i) {
      s[static_cast<std::size_t>(i)] = scores(i, static_cast<Eigen::Index>(m));
    }
    std::vector<std::uint8_t> id_flags(static_cast<std::size_t>(n_test));
    for (Eigen::Index i = 0; i < n_test; ++i) {
      id_flags[static_cast<std::size_t>(i)] =
          s[static_cast<std::size_t>(i)] > rep.models[m].threshold() ? 1 : 0;
    }
    try {
      r.auc_pr = auc_pr(s, labels);
      r.flag_rate = flag_rate(id_flags);
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
      r.auc_pr = std::numeric_limits<double>::quiet_NaN();
      r.flag_rate = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(r));
  }

  for (std::size_t b = 0; b < rep.baselines.size(); ++b) {
    const BaselineModel& model = rep.baselines[b];
    RunRecord r = make_record(baseline_name(model.kind()));
    const auto b0 = Clock::now();
    std::vector<double> s(static_cast<std::size_t>(n_pool));
    std::vector<std::uint8_t> id_flags(static_cast<std::size_t>(n_test));
    try {
      parallel_for(static_cast<std::size_t>(n_pool), jobs, [&](std::size_t i) {
        s[i] = model.oriented_score(pool.row(static_cast<Eigen::Index>(i)).transpose());
      });
      for (Eigen::Index i = 0; i < n_test; ++i) {
        id_flags[static_cast<std::size_t>(i)] =
            s[static_cast<std::size_t>(i)] > model.threshold() ? 1 : 0;
      }
      r.runtime_s = rep.baseline_fit_s[b] + seconds_since(b0);
      r.auc_pr = auc_pr(s, labels);
      r.flag_rate = flag_rate(id_flags);
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
      r.auc_pr = std::numeric_limits<double>::quiet_NaN();
      r.flag_rate = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(r));
  }
}

std::vector<std::string> all_method_names(const BenchConfig& cfg) {
  std::vector<std::string> names;
  for (const MetricSpec& m : cfg.metrics) names.push_back("outpro_" + m.name());
  for (BaselineKind k : cfg.baselines) names.push_back(baseline_name(k));
  return names;
}

void mark_replicate_failed(const BenchConfig& cfg, const std::string& dataset,
                           const std::vector<std::pair<std::string, double>>& cells,
                           std::uint64_t seed, const std::string& error,
                           std::vector<RunRecord>& out) {
  for (const auto& [mode, param] : cells) {
    for (const std::string& method : all_method_names(cfg)) {
      RunRecord r;
      r.dataset = dataset;
      r.method = method;
      r.mode = mode;
      r.param = param;
      r.seed = seed;
      r.failed = true;
      r.error = error;
      r.auc_pr = std::numeric_limits<double>::quiet_NaN();
      r.flag_rate = std::numeric_limits<double>::quiet_NaN();
      out.push_back(std::move(r));
    }
  }
}

}  // namespace

std::vector<int> top_fraction_features(const Eigen::VectorXd& scores, double frac) {
  const Eigen::Index d = scores.size();
  int k = static_cast<int>(std::ceil(frac * static_cast<double>(d)));
  if (k < 1) k = 1;
  if (k > d) k = static_cast<int>(d);
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores(a) > scores(b); });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

BenchmarkReport run_friedman_benchmark(const BenchConfig& config) {
  BenchmarkReport report;
  report.generator = "friedman";
  report.notes =
      "pool = unperturbed test points (label 0) + shifted copies (support-rule labels); "
      "flag_rate over ID test points; runtime_s = method calibrate+score seconds";

  const unsigned outer_jobs = resolve_jobs(config.jobs);
  const unsigned inner_jobs = config.replicates > 1 ? 1 : outer_jobs;
  std::vector<std::vector<RunRecord>> per_rep(static_cast<std::size_t>(config.replicates));

  parallel_for(static_cast<std::size_t>(config.replicates), outer_jobs, [&](std::size_t rep_i) {
    const std::uint64_t rep_seed = derive_seed(config.seed, rep_i);
    std::vector<RunRecord>& records = per_rep[rep_i];
    std::vector<std::pair<std::string, double>> cells;
    for (double shift : config.shifts) cells.emplace_back("shift", shift);
    try {
      FriedmanSpec fs{config.n, config.d, config.sigma, derive_seed(rep_seed, 0)};
      const Dataset ds = gen_friedman(fs);
      FittedReplicate rep = fit_replicate(ds, config, rep_seed, inner_jobs);

      const Eigen::MatrixXd train_std = rep.standardizer.transform(rep.train.features);
      const Eigen::VectorXd importance = rep.forest->permutation_importance(
          train_std, rep.train.response, derive_seed(rep_seed, 5), inner_jobs);
      const std::vector<int> targets = top_fraction_features(importance, config.top_frac);

      for (double shift : config.shifts) {
        const AnomalyBatch batch = gen_shift_anomalies(
            rep.test, targets, shift, derive_seed(rep_seed, 6 + static_cast<std::uint64_t>(
                                                                  shift * 1e6)));
        score_pool(rep, config, "friedman", "shift", shift, rep_seed, batch, inner_jobs, records);
      }
    } catch (const std::exception& e) {
      records.clear();
      mark_replicate_failed(config, "friedman", cells, rep_seed, e.what(), records);
    }
  });

  for (auto& records : per_rep) {
    report.runs.insert(report.runs.end(), records.begin(), records.end());
  }
  return report;
}

BenchmarkReport run_copula_benchmark(const Dataset& ds, const std::string& dataset_name,
                                     const BenchConfig& config) {
  BenchmarkReport report;
  report.generator = "copula";
  report.notes =
      "pool = unperturbed test points (label 0) + copula anomalies (mode labels); "
      "flag_rate over ID test points; runtime_s = method calibrate+score seconds";

  const unsigned outer_jobs = resolve_jobs(config.jobs);
  const unsigned inner_jobs = config.replicates > 1 ? 1 : outer_jobs;
  std::vector<std::vector<RunRecord>> per_rep(static_cast<std::size_t>(config.replicates));

  parallel_for(static_cast<std::size_t>(config.replicates), outer_jobs, [&](std::size_t rep_i) {
    const std::uint64_t rep_seed = derive_seed(config.seed ^ 0xc0f1aULL, rep_i);
    std::vector<RunRecord>& records = per_rep[rep_i];
    std::vector<std::pair<std::string, double>> cells;
    for (const std::string& mode : config.modes) {
      cells.emplace_back(mode, mode == "warp" ? config.gamma : config.q);
    }
    try {
      FittedReplicate rep = fit_replicate(ds, config, rep_seed, inner_jobs);
      const CopulaModel copula = fit_copula(rep.train.features, config.q);
      const int m = static_cast<int>(rep.test.n());  // matched anomaly count

      for (const std::string& mode : config.modes) {
        AnomalyBatch batch;
        double param = 0.0;
        const std::uint64_t gen_seed = derive_seed(rep_seed, 7 + std::hash<std::string>{}(mode));
        if (mode == "warp") {
          batch = gen_warp(copula, m, config.gamma, gen_seed);
          param = config.gamma;
        } else if (mode == "joint") {
          batch = gen_joint(copula, m, config.q, gen_seed);
          param = config.q;
        } else if (mode == "support") {
          batch = gen_support(copula, m, config.q, gen_seed);
          param = config.q;
        } else {
          throw std::invalid_argument("unknown copula mode: " + mode);
        }
        score_pool(rep, config, dataset_name, mode, param, rep_seed, batch, inner_jobs, records);
      }
    } catch (const std::exception& e) {
      records.clear();
      mark_replicate_failed(config, dataset_name, cells, rep_seed, e.what(), records);
    }
  });

  for (auto& records : per_rep) {
    report.runs.insert(report.runs.end(), records.begin(), records.end());
  }
  return report;
}

void BenchmarkReport::write_runs_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << "dataset,method,mode,param,seed,auc_pr,flag_rate,runtime_s\n";
  for (const RunRecord& r : runs) {
    out << r.dataset << ',' << r.method << ',' << r.mode << ',' << format_g(r.param) << ','
        << r.seed << ',' << format_g(r.auc_pr) << ',' << format_g(r.flag_rate) << ','
        << format_g(r.runtime_s) << '\n';
  }
}

namespace {

struct Moments {
  int n = 0;
  double sum = 0.0;
  double sumsq = 0.0;
  void add(double v) {
    ++n;
    sum += v;
    sumsq += v * v;
  }
  double mean() const { return n > 0 ? sum / n : 0.0; }
  double sd() const {
    if (n < 2) return 0.0;
    const double var = (sumsq - sum * sum / n) / (n - 1);
    return var > 0.0 ? std::sqrt(var) : 0.0;
  }
};

}  // namespace

void BenchmarkReport::write_aggregate_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << "dataset,method,mode,param,n_runs,auc_pr_mean,auc_pr_sd,flag_rate_mean,flag_rate_sd\n";
  std::map<std::tuple<std::string, std::string, std::string, double>,
           std::pair<Moments, Moments>>
      groups;
  for (const RunRecord& r : runs) {
    if (r.failed) continue;
    auto& [auc, fr] = groups[{r.dataset, r.method, r.mode, r.param}];
    auc.add(r.auc_pr);
    fr.add(r.flag_rate);
  }
  for (const auto& [key, val] : groups) {
    const auto& [dataset, method, mode, param] = key;
    const auto& [auc, fr] = val;
    out << dataset << ',' << method << ',' << mode << ',' << format_g(param) << ',' << auc.n
        << ',' << format_g(auc.mean()) << ',' << format_g(auc.sd()) << ','
        << format_g(fr.mean()) << ',' << format_g(fr.sd()) << '\n';
  }
}

std::vector<RankRow> average_ranks(const BenchmarkReport& report) {
  // run cell: (mode, param) -> run id (dataset, seed) -> method -> auc
  std::map<std::pair<std::string, double>,
           std::map<std::pair<std::string, std::uint64_t>, std::map<std::string, RunRecord>>>
      table;
  std::set<std::string> methods;
  for (const RunRecord& r : report.runs) {
    table[{r.mode, r.param}][{r.dataset, r.seed}][r.method] = r;
    methods.insert(r.method);
  }

  std::vector<RankRow> rows;
  for (const auto& [cell, by_run] : table) {
    std::map<std::string, Moments> rank_acc;
    for (const auto& [run_id, by_method] : by_run) {
      for (const std::string& m : methods) {
        if (!by_method.count(m)) {
          throw std::runtime_error("average_ranks: missing cell for method " + m);
        }
      }
      bool any_failed = false;
      for (const auto& [m, rec] : by_method) any_failed |= rec.failed;
      if (any_failed) continue;  // excluded runs are listed by the caller
      std::vector<std::string> names;
      std::vector<double> values;
      for (const auto& [m, rec] : by_method) {
        names.push_back(m);
        values.push_back(rec.auc_pr);
      }
      const std::vector<double> ranks = midranks_descending(values);
      for (std::size_t i = 0; i < names.size(); ++i) rank_acc[names[i]].add(ranks[i]);
    }
    for (const auto& [method, acc] : rank_acc) {
      rows.push_back({cell.first, cell.second, method, acc.mean(), acc.n});
    }
  }
  return rows;
}

void BenchmarkReport::write_ranks_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << "mode,param,method,mean_rank,n_runs\n";
  for (const RankRow& row : average_ranks(*this)) {
    out << row.mode << ',' << format_g(row.param) << ',' << row.method << ','
        << format_g(row.mean_rank) << ',' << row.runs << '\n';
  }
}

void BenchmarkReport::write_summary_json(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  int failed = 0;
  for (const RunRecord& r : runs) failed += r.failed ? 1 : 0;
  out << "{\n  \"generator\": \"" << generator << "\",\n  \"notes\": \"" << notes
      << "\",\n  \"aggregation\": \"average precision (step-wise), midrank averages\",\n"
      << "  \"total_records\": " << runs.size() << ",\n  \"failed_records\": " << failed
      << ",\n  \"failed\": [";
  bool first = true;
  for (const RunRecord& r : runs) {
    if (!r.failed) continue;
    if (!first) out << ',';
    first = false;
    out << "\n    {\"dataset\": \"" << r.dataset << "\", \"method\": \"" << r.method
        << "\", \"mode\": \"" << r.mode << "\", \"param\": " << format_g(r.param)
        << ", \"seed\": " << r.seed << ", \"error\": \"" << r.error << "\"}";
  }
  out << (first ? "]" : "\n  ]") << "\n}\n";
}

}  // namespace outpro
