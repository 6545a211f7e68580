// Command line front end: fit / score / gen-anomalies / bench-friedman /
// bench-dataset / report. A key=value config file with sections drives all
// commands; explicit flags override config values. Exit codes: 0 success,
// 1 computational failure, 2 usage or IO error.

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "outpro/baselines.hpp"
#include "outpro/benchmark.hpp"
#include "outpro/bundle.hpp"
#include "outpro/config.hpp"
#include "outpro/copula.hpp"
#include "outpro/dataset.hpp"
#include "outpro/friedman.hpp"
#include "outpro/metrics.hpp"
#include "outpro/parallel.hpp"
#include "outpro/rng.hpp"

namespace fs = std::filesystem;
using namespace outpro;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> metric;
  std::optional<int> ntree;
  std::optional<int> K;
  std::optional<double> alpha;
  std::optional<std::string> response;
};

RunConfig resolve_config(const CommonFlags& flags) {
  RunConfig cfg = flags.config_path.empty() ? RunConfig{} : RunConfig::load(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.jobs) cfg.jobs = *flags.jobs;
  if (flags.metric) cfg.metrics = {*flags.metric};
  if (flags.ntree) cfg.ntree = *flags.ntree;
  if (flags.K) cfg.K = *flags.K;
  if (flags.alpha) cfg.alpha = *flags.alpha;
  if (flags.response) cfg.response = *flags.response;
  return cfg;
}

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Run configuration file (key = value sections)");
  cmd->add_option("--seed", flags.seed, "Override run.seed");
  cmd->add_option("--jobs", flags.jobs, "Override run.jobs (worker cap; 0 = auto)");
  cmd->add_option("--metric", flags.metric, "Override outpro.metrics with a single metric");
  cmd->add_option("--ntree", flags.ntree, "Override forest.ntree");
  cmd->add_option("-K,--neighbors", flags.K, "Override outpro.k");
  cmd->add_option("--alpha", flags.alpha, "Override outpro.alpha");
  cmd->add_option("--response", flags.response, "Override data.response");
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Loads scoring input: the configured response column and anomaly-batch
// bookkeeping columns are dropped when present, so training exports and
// gen-anomalies outputs can be scored directly.
Eigen::MatrixXd load_scoring_matrix(const std::string& path, const std::string& response) {
  return load_feature_matrix(path, {response, "mode", "label", "seed"});
}

ModelBundle fit_bundle(const RunConfig& cfg, const Dataset& train, unsigned jobs) {
  const Standardizer standardizer = Standardizer::fit(train.features);
  const Eigen::MatrixXd train_std = standardizer.transform(train.features);

  Forest forest = Forest::fit(train_std, train.response, cfg.forest_params(), jobs);
  if (forest.num_never_oob() > 0) {
    std::cerr << "warning: " << forest.num_never_oob()
              << " training points were never out-of-bag; consider more trees\n";
  }
  const Eigen::VectorXd raw = compute_importance(forest, train_std, train.response,
                                                 cfg.max_rules, derive_seed(cfg.seed, 11), jobs);
  ImportancePlan plan =
      select_signal(raw, cfg.selection_policy(), cfg.top_k, cfg.sel_quantile);

  auto core = std::make_shared<OodCore>(std::move(forest), plan, standardizer, train_std, cfg.K,
                                        cfg.ridge);
  core->set_trim_fraction(cfg.trim_fraction);

  const std::vector<MetricSpec> specs = {cfg.metric_spec(cfg.metrics.at(0))};
  std::vector<OodModel> models = calibrate(core, specs, cfg.alpha, jobs);

  ModelBundle bundle;
  bundle.config_snapshot = cfg.to_string();
  bundle.train = train;
  bundle.core = core;
  bundle.metric = specs[0];
  bundle.alpha = cfg.alpha;
  bundle.train_scores = models[0].train_scores();
  bundle.threshold = models[0].threshold();
  return bundle;
}

int cmd_fit(const CommonFlags& flags, const std::string& data_path,
            const std::string& out_path, const std::string& plan_csv) {
  const RunConfig cfg = resolve_config(flags);
  const unsigned jobs = resolve_jobs(cfg.jobs);
  const Dataset train = load_csv(data_path, cfg.response);

  ModelBundle bundle = fit_bundle(cfg, train, jobs);
  bundle.save(out_path);
  if (!plan_csv.empty()) {
    write_plan_csv(bundle.core->plan(), train.feature_names, plan_csv);
  }

  const ImportancePlan& plan = bundle.core->plan();
  std::cout << "signal set (" << plan.policy << "):";
  for (std::size_t k = 0; k < plan.signal.size(); ++k) {
    const int f = plan.signal[k];
    std::cout << ' ' << train.feature_names[static_cast<std::size_t>(f)] << ":"
              << format_g(plan.weights(static_cast<Eigen::Index>(k)));
  }
  std::cout << "\nmetric: " << bundle.metric.name() << "  alpha: " << format_g(bundle.alpha)
            << "  threshold: " << format_g(bundle.threshold) << "\nbundle: " << out_path
            << "\n";
  constexpr double kBundleWarnBytes = 100.0 * 1024 * 1024;
  if (fs::exists(out_path) &&
      static_cast<double>(fs::file_size(out_path)) > kBundleWarnBytes) {
    std::cerr << "warning: bundle exceeds 100 MB (embedded training matrix)\n";
  }
  return 0;
}

int cmd_score(const CommonFlags& flags, const std::string& bundle_path,
              const std::string& data_path, const std::string& out_path,
              const std::string& format) {
  const ModelBundle bundle = ModelBundle::load(bundle_path);
  const RunConfig cfg = RunConfig::parse(bundle.config_snapshot);
  const unsigned jobs = resolve_jobs(flags.jobs ? *flags.jobs : cfg.jobs);

  const Eigen::MatrixXd inputs = load_scoring_matrix(data_path, cfg.response);
  if (inputs.rows() > 0 && inputs.cols() != bundle.train.d()) {
    throw IoError("score: input has " + std::to_string(inputs.cols()) + " features, bundle has " +
                  std::to_string(bundle.train.d()));
  }

  // Exact raw-row overlap with the embedded training matrix.
  std::set<std::string> train_rows;
  for (Eigen::Index i = 0; i < bundle.train.n(); ++i) {
    const auto row = bundle.train.features.row(i);
    train_rows.insert(std::string(reinterpret_cast<const char*>(row.data()),
                                  sizeof(double) * static_cast<std::size_t>(row.size())));
  }
  int overlap = 0;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const Eigen::RowVectorXd row = inputs.row(i);
    if (train_rows.count(std::string(reinterpret_cast<const char*>(row.data()),
                                     sizeof(double) * static_cast<std::size_t>(row.size())))) {
      ++overlap;
    }
  }
  if (overlap > 0) {
    std::cerr << "warning: " << overlap
              << " input rows exactly match training rows; scores assume fresh data "
                 "(no self-exclusion)\n";
  }

  const OodModel model = bundle.model();
  const std::vector<OodResult> results = model.score_batch(inputs, jobs);

  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write file: " + out_path);
  const std::string metric = model.metric().name();
  if (format == "csv") {
    out << "id,score,percentile,flagged,metric,K\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      out << i << ',' << format_g(results[i].score) << ',' << format_g(results[i].percentile)
          << ',' << (results[i].flagged ? 1 : 0) << ',' << metric << ',' << model.core().K()
          << '\n';
    }
  } else if (format == "jsonl") {
    for (std::size_t i = 0; i < results.size(); ++i) {
      out << "{\"id\": " << i << ", \"score\": " << format_g(results[i].score)
          << ", \"percentile\": " << format_g(results[i].percentile)
          << ", \"flagged\": " << (results[i].flagged ? "true" : "false") << ", \"metric\": \""
          << metric << "\", \"K\": " << model.core().K() << "}\n";
    }
  } else {
    throw CLI::ValidationError("--format must be csv or jsonl");
  }
  std::cout << "scored " << results.size() << " rows -> " << out_path << "\n";
  return 0;
}

int cmd_gen_anomalies(const CommonFlags& flags, const std::string& bundle_path,
                      const std::string& data_path, const std::string& mode_flag, int count,
                      const std::string& targets_csv, const std::string& out_path) {
  RunConfig cfg = resolve_config(flags);
  if (!mode_flag.empty()) cfg.mode = mode_flag;

  Dataset data;
  if (!bundle_path.empty()) {
    const ModelBundle bundle = ModelBundle::load(bundle_path);
    data = bundle.train;
    cfg = RunConfig::parse(bundle.config_snapshot);
    if (!mode_flag.empty()) cfg.mode = mode_flag;
    if (flags.seed) cfg.seed = *flags.seed;
  } else if (!data_path.empty()) {
    data = load_csv(data_path, cfg.response);
  } else {
    throw CLI::ValidationError("gen-anomalies needs --bundle or --data");
  }

  const int m = count > 0 ? count : (cfg.count > 0 ? cfg.count : static_cast<int>(data.n()));
  AnomalyBatch batch;
  if (cfg.mode == "warp" || cfg.mode == "joint" || cfg.mode == "support") {
    const CopulaModel copula = fit_copula(data.features, cfg.q);
    if (copula.small_sample_warning) {
      std::cerr << "warning: fewer than d+2 rows; copula correlation is poorly determined\n";
    }
    if (cfg.mode == "warp") {
      batch = gen_warp(copula, m, cfg.gamma, cfg.seed);
    } else if (cfg.mode == "joint") {
      batch = gen_joint(copula, m, cfg.q, cfg.seed);
    } else {
      batch = gen_support(copula, m, cfg.q, cfg.seed);
    }
  } else if (cfg.mode == "shift") {
    std::vector<int> targets;
    if (!targets_csv.empty()) {
      for (const char* p = targets_csv.c_str(); *p;) {
        int v = 0;
        auto [next, ec] = std::from_chars(p, targets_csv.c_str() + targets_csv.size(), v);
        if (ec != std::errc{}) throw CLI::ValidationError("bad --target-features list");
        targets.push_back(v - 1);  // 1-based on the command line
        p = *next == ',' ? next + 1 : next;
      }
    } else if (!bundle_path.empty()) {
      const ModelBundle bundle = ModelBundle::load(bundle_path);
      const Eigen::MatrixXd train_std =
          bundle.core->standardizer().transform(bundle.train.features);
      const Eigen::VectorXd imp = bundle.core->forest().permutation_importance(
          train_std, bundle.train.response, derive_seed(cfg.seed, 13),
          resolve_jobs(cfg.jobs));
      targets = top_fraction_features(imp, cfg.top_frac);
    } else {
      throw CLI::ValidationError("shift mode needs --target-features or a --bundle");
    }
    batch = gen_shift_anomalies(data, targets, cfg.magnitude, cfg.seed);
  } else {
    throw CLI::ValidationError("unknown anomaly mode: " + cfg.mode);
  }

  write_anomaly_csv(batch, data.feature_names, out_path);
  write_anomaly_sidecar(batch, out_path + ".meta.json");
  int positives = 0;
  for (auto l : batch.labels) positives += l;
  std::cout << "wrote " << batch.points.rows() << " " << batch.mode << " points (" << positives
            << " labeled anomalous) -> " << out_path << "\n";
  return 0;
}

void write_report_files(const BenchmarkReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);
  report.write_runs_csv(out_dir + "/runs.csv");
  report.write_aggregate_csv(out_dir + "/aggregate.csv");
  report.write_ranks_csv(out_dir + "/ranks.csv");
  report.write_summary_json(out_dir + "/summary.json");
}

int cmd_bench_friedman(const CommonFlags& flags, const std::string& out_dir) {
  const RunConfig cfg = resolve_config(flags);
  const BenchmarkReport report = run_friedman_benchmark(cfg.bench_config());
  write_report_files(report, out_dir);
  cfg.save(out_dir + "/config_snapshot.ini");
  std::cout << "friedman benchmark: " << report.runs.size() << " records -> " << out_dir << "\n";
  return 0;
}

int cmd_bench_dataset(const CommonFlags& flags, const std::string& data_path,
                      const std::string& name, const std::string& out_dir) {
  const RunConfig cfg = resolve_config(flags);
  const Dataset ds = load_csv(data_path, cfg.response);
  const std::string dataset_name = name.empty() ? fs::path(data_path).stem().string() : name;
  const BenchmarkReport report = run_copula_benchmark(ds, dataset_name, cfg.bench_config());
  write_report_files(report, out_dir);
  cfg.save(out_dir + "/config_snapshot.ini");
  std::cout << "copula benchmark on " << dataset_name << ": " << report.runs.size()
            << " records -> " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& runs_path, const std::string& out_dir) {
  std::ifstream in(runs_path);
  if (!in) throw IoError("cannot open runs file: " + runs_path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty runs file: " + runs_path);
  if (line != "dataset,method,mode,param,seed,auc_pr,flag_rate,runtime_s") {
    throw IoError("unexpected runs header: " + line);
  }
  BenchmarkReport report;
  report.generator = "report";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    cells.push_back(cur);
    if (cells.size() != 8) throw IoError("malformed runs row: " + line);
    RunRecord r;
    r.dataset = cells[0];
    r.method = cells[1];
    r.mode = cells[2];
    r.param = std::strtod(cells[3].c_str(), nullptr);
    r.seed = std::strtoull(cells[4].c_str(), nullptr, 10);
    r.auc_pr = std::strtod(cells[5].c_str(), nullptr);
    r.flag_rate = std::strtod(cells[6].c_str(), nullptr);
    r.runtime_s = std::strtod(cells[7].c_str(), nullptr);
    r.failed = std::isnan(r.auc_pr);
    report.runs.push_back(std::move(r));
  }
  write_report_files(report, out_dir);
  std::cout << "report rebuilt from " << report.runs.size() << " records -> " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"outPro: subspace-aware OOD detection for tabular regression"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string data_path, out_path, bundle_path, plan_csv, format = "csv";
  std::string mode_flag, targets_csv, out_dir = "bench_out", runs_path, dataset_name;
  int count = 0;

  CLI::App* fit = app.add_subcommand("fit", "Fit forest + signal plan, calibrate, save bundle");
  add_common_flags(fit, flags);
  fit->add_option("--data", data_path, "Training CSV")->required();
  fit->add_option("--out", out_path, "Bundle output path")->required();
  fit->add_option("--plan-csv", plan_csv, "Also export the importance plan as CSV");

  CLI::App* score = app.add_subcommand("score", "Score a CSV of points against a bundle");
  add_common_flags(score, flags);
  score->add_option("--bundle", bundle_path, "Model bundle")->required();
  score->add_option("--data", data_path, "Input CSV")->required();
  score->add_option("--out", out_path, "Output records path")->required();
  score->add_option("--format", format, "csv | jsonl");

  CLI::App* gen = app.add_subcommand("gen-anomalies", "Generate a labeled anomaly batch");
  add_common_flags(gen, flags);
  gen->add_option("--bundle", bundle_path, "Bundle providing training data");
  gen->add_option("--data", data_path, "Training CSV (alternative to --bundle)");
  gen->add_option("--mode", mode_flag, "warp | joint | support | shift");
  gen->add_option("--count", count, "Number of points (default: matched to data rows)");
  gen->add_option("--target-features", targets_csv, "1-based feature list for shift mode");
  gen->add_option("--out", out_path, "Output CSV path")->required();

  CLI::App* bf = app.add_subcommand("bench-friedman", "Replicated Friedman shift benchmark");
  add_common_flags(bf, flags);
  bf->add_option("--out-dir", out_dir, "Report directory");

  CLI::App* bd = app.add_subcommand("bench-dataset", "Replicated copula benchmark on a CSV");
  add_common_flags(bd, flags);
  bd->add_option("--data", data_path, "Dataset CSV")->required();
  bd->add_option("--name", dataset_name, "Dataset name in the report");
  bd->add_option("--out-dir", out_dir, "Report directory");

  CLI::App* rep = app.add_subcommand("report", "Rebuild aggregate/rank tables from runs.csv");
  rep->add_option("--runs", runs_path, "runs.csv produced by a bench command")->required();
  rep->add_option("--out-dir", out_dir, "Report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) return cmd_fit(flags, data_path, out_path, plan_csv);
    if (score->parsed()) return cmd_score(flags, bundle_path, data_path, out_path, format);
    if (gen->parsed()) {
      return cmd_gen_anomalies(flags, bundle_path, data_path, mode_flag, count, targets_csv,
                               out_path);
    }
    if (bf->parsed()) return cmd_bench_friedman(flags, out_dir);
    if (bd->parsed()) return cmd_bench_dataset(flags, data_path, dataset_name, out_dir);
    if (rep->parsed()) return cmd_report(runs_path, out_dir);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
