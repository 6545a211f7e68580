#include "outpro/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "outpro/baselines.hpp"
#include "outpro/dataset.hpp"

namespace outpro {

namespace {

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      const std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string t = trim(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw IoError("config: invalid number for " + key + ": '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& key, const std::string& s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw IoError("config: invalid integer for " + key + ": '" + s + "'");
  }
  return v;
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += v[i];
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_g(v[i]);
  }
  return out;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"data.response", [](RunConfig& c, const std::string&, const std::string& v) { c.response = v; }},
      {"data.train_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.train_fraction = parse_double(k, v); }},
      {"forest.ntree", [](RunConfig& c, const std::string& k, const std::string& v) { c.ntree = static_cast<int>(parse_int(k, v)); }},
      {"forest.mtry", [](RunConfig& c, const std::string& k, const std::string& v) { c.mtry = static_cast<int>(parse_int(k, v)); }},
      {"forest.min_node_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.min_node_size = static_cast<int>(parse_int(k, v)); }},
      {"varprio.max_rules", [](RunConfig& c, const std::string& k, const std::string& v) { c.max_rules = static_cast<int>(parse_int(k, v)); }},
      {"varprio.selection", [](RunConfig& c, const std::string&, const std::string& v) { c.selection = v; }},
      {"varprio.top_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.top_k = static_cast<int>(parse_int(k, v)); }},
      {"varprio.quantile", [](RunConfig& c, const std::string& k, const std::string& v) { c.sel_quantile = parse_double(k, v); }},
      {"outpro.k", [](RunConfig& c, const std::string& k, const std::string& v) { c.K = static_cast<int>(parse_int(k, v)); }},
      {"outpro.metrics", [](RunConfig& c, const std::string&, const std::string& v) { c.metrics = split_list(v); }},
      {"outpro.epsilon", [](RunConfig& c, const std::string& k, const std::string& v) { c.epsilon = parse_double(k, v); }},
      {"outpro.minkowski_p", [](RunConfig& c, const std::string& k, const std::string& v) { c.minkowski_p = parse_double(k, v); }},
      {"outpro.min_pts", [](RunConfig& c, const std::string& k, const std::string& v) { c.min_pts = static_cast<int>(parse_int(k, v)); }},
      {"outpro.ridge", [](RunConfig& c, const std::string& k, const std::string& v) { c.ridge = parse_double(k, v); }},
      {"outpro.alpha", [](RunConfig& c, const std::string& k, const std::string& v) { c.alpha = parse_double(k, v); }},
      {"outpro.trim_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.trim_fraction = parse_double(k, v); }},
      {"anomaly.mode", [](RunConfig& c, const std::string&, const std::string& v) { c.mode = v; }},
      {"anomaly.gamma", [](RunConfig& c, const std::string& k, const std::string& v) { c.gamma = parse_double(k, v); }},
      {"anomaly.q", [](RunConfig& c, const std::string& k, const std::string& v) { c.q = parse_double(k, v); }},
      {"anomaly.magnitude", [](RunConfig& c, const std::string& k, const std::string& v) { c.magnitude = parse_double(k, v); }},
      {"anomaly.count", [](RunConfig& c, const std::string& k, const std::string& v) { c.count = static_cast<int>(parse_int(k, v)); }},
      {"anomaly.top_frac", [](RunConfig& c, const std::string& k, const std::string& v) { c.top_frac = parse_double(k, v); }},
      {"bench.replicates", [](RunConfig& c, const std::string& k, const std::string& v) { c.replicates = static_cast<int>(parse_int(k, v)); }},
      {"bench.n", [](RunConfig& c, const std::string& k, const std::string& v) { c.n = static_cast<int>(parse_int(k, v)); }},
      {"bench.d", [](RunConfig& c, const std::string& k, const std::string& v) { c.d = static_cast<int>(parse_int(k, v)); }},
      {"bench.sigma", [](RunConfig& c, const std::string& k, const std::string& v) { c.sigma = parse_double(k, v); }},
      {"bench.shifts", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.shifts.clear();
         for (const std::string& s : split_list(v)) c.shifts.push_back(parse_double(k, s));
       }},
      {"bench.baselines", [](RunConfig& c, const std::string&, const std::string& v) { c.baselines = split_list(v); }},
      {"bench.modes", [](RunConfig& c, const std::string&, const std::string& v) { c.modes = split_list(v); }},
      {"bench.knn_k", [](RunConfig& c, const std::string& k, const std::string& v) { c.knn_k = static_cast<int>(parse_int(k, v)); }},
      {"run.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
      {"run.jobs", [](RunConfig& c, const std::string& k, const std::string& v) { c.jobs = static_cast<unsigned>(parse_int(k, v)); }},
  };

  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw IoError("config: malformed section at line " + std::to_string(line_no));
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw IoError("config: expected key = value at line " + std::to_string(line_no));
    }
    const std::string key = section + "." + trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw IoError("config: unknown key '" + key + "'");
    it->second(cfg, key, value);
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string RunConfig::to_string() const {
  std::ostringstream out;
  out << "[data]\n"
      << "response = " << response << "\n"
      << "train_fraction = " << format_g(train_fraction) << "\n\n"
      << "[forest]\n"
      << "ntree = " << ntree << "\n"
      << "mtry = " << mtry << "\n"
      << "min_node_size = " << min_node_size << "\n\n"
      << "[varprio]\n"
      << "max_rules = " << max_rules << "\n"
      << "selection = " << selection << "\n"
      << "top_k = " << top_k << "\n"
      << "quantile = " << format_g(sel_quantile) << "\n\n"
      << "[outpro]\n"
      << "k = " << K << "\n"
      << "metrics = " << join(metrics) << "\n"
      << "epsilon = " << format_g(epsilon) << "\n"
      << "minkowski_p = " << format_g(minkowski_p) << "\n"
      << "min_pts = " << min_pts << "\n"
      << "ridge = " << format_g(ridge) << "\n"
      << "alpha = " << format_g(alpha) << "\n"
      << "trim_fraction = " << format_g(trim_fraction) << "\n\n"
      << "[anomaly]\n"
      << "mode = " << mode << "\n"
      << "gamma = " << format_g(gamma) << "\n"
      << "q = " << format_g(q) << "\n"
      << "magnitude = " << format_g(magnitude) << "\n"
      << "count = " << count << "\n"
      << "top_frac = " << format_g(top_frac) << "\n\n"
      << "[bench]\n"
      << "replicates = " << replicates << "\n"
      << "n = " << n << "\n"
      << "d = " << d << "\n"
      << "sigma = " << format_g(sigma) << "\n"
      << "shifts = " << join(shifts) << "\n"
      << "baselines = " << join(baselines) << "\n"
      << "modes = " << join(modes) << "\n"
      << "knn_k = " << knn_k << "\n\n"
      << "[run]\n"
      << "seed = " << seed << "\n"
      << "jobs = " << jobs << "\n";
  return out.str();
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  out << to_string();
}

MetricSpec RunConfig::metric_spec(const std::string& name) const {
  MetricSpec m = MetricSpec::parse(name);
  m.epsilon = epsilon;
  m.p = minkowski_p;
  m.min_pts = min_pts;
  m.ridge = ridge;
  m.validate();
  return m;
}

std::vector<MetricSpec> RunConfig::metric_specs() const {
  std::vector<MetricSpec> out;
  for (const std::string& name : metrics) out.push_back(metric_spec(name));
  return out;
}

SelectionPolicy RunConfig::selection_policy() const {
  if (selection == "mean_positive") return SelectionPolicy::MeanPositive;
  if (selection == "top_k") return SelectionPolicy::TopK;
  if (selection == "quantile") return SelectionPolicy::Quantile;
  throw IoError("config: unknown selection policy '" + selection + "'");
}

ForestParams RunConfig::forest_params() const {
  ForestParams p;
  p.ntree = ntree;
  p.mtry = mtry;
  p.min_node_size = min_node_size;
  p.seed = seed;
  return p;
}

BenchConfig RunConfig::bench_config() const {
  BenchConfig b;
  b.replicates = replicates;
  b.forest = forest_params();
  b.varprio.max_rules = max_rules;
  b.varprio.policy = selection_policy();
  b.varprio.top_k = top_k;
  b.varprio.quantile = sel_quantile;
  b.metrics = metric_specs();
  for (const std::string& name : baselines) b.baselines.push_back(parse_baseline(name));
  b.K = K;
  b.alpha = alpha;
  b.knn_k = knn_k;
  b.train_fraction = train_fraction;
  b.top_frac = top_frac;
  b.seed = seed;
  b.jobs = jobs;
  b.n = n;
  b.d = d;
  b.sigma = sigma;
  b.shifts = shifts;
  b.modes = modes;
  b.gamma = gamma;
  b.q = q;
  return b;
}

}  // namespace outpro
