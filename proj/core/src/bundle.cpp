#include "outpro/bundle.hpp"

#include <cstring>
#include <fstream>

namespace outpro {

namespace {

constexpr char kMagic[8] = {'O', 'P', 'R', 'O', 'B', 'N', 'D', 'L'};

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_i32(std::ostream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  put_u64(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
}
void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) *
                                         static_cast<std::size_t>(m.size())));
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::int32_t get_i32(std::istream& in) {
  std::int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
double get_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::string get_string(std::istream& in) {
  const std::uint64_t n = get_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}
Eigen::VectorXd get_vector(std::istream& in) {
  const std::uint64_t n = get_u64(in);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  return v;
}
Eigen::MatrixXd get_matrix(std::istream& in) {
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * rows * cols));
  return m;
}

void put_forest(std::ostream& out, const Forest& f) {
  put_i32(out, f.params().ntree);
  put_i32(out, f.params().mtry);
  put_i32(out, f.params().min_node_size);
  put_u64(out, f.params().seed);
  put_u64(out, static_cast<std::uint64_t>(f.dimension()));
  put_u64(out, f.trees().size());
  for (const Tree& t : f.trees()) {
    put_u64(out, t.nodes.size());
    for (const TreeNode& nd : t.nodes) {
      put_i32(out, nd.feature);
      put_f64(out, nd.threshold);
      put_i32(out, nd.left);
      put_i32(out, nd.right);
      put_f64(out, nd.mean);
      put_i32(out, nd.count);
    }
    put_u64(out, t.oob.size());
    for (int i : t.oob) put_i32(out, i);
  }
  put_vector(out, f.oob_predictions());
}

Forest get_forest(std::istream& in) {
  ForestParams params;
  params.ntree = get_i32(in);
  params.mtry = get_i32(in);
  params.min_node_size = get_i32(in);
  params.seed = get_u64(in);
  const Eigen::Index d = static_cast<Eigen::Index>(get_u64(in));
  const std::uint64_t ntree = get_u64(in);
  std::vector<Tree> trees(ntree);
  for (std::uint64_t t = 0; t < ntree; ++t) {
    const std::uint64_t nn = get_u64(in);
    trees[t].nodes.resize(nn);
    for (std::uint64_t k = 0; k < nn; ++k) {
      TreeNode& nd = trees[t].nodes[k];
      nd.feature = get_i32(in);
      nd.threshold = get_f64(in);
      nd.left = get_i32(in);
      nd.right = get_i32(in);
      nd.mean = get_f64(in);
      nd.count = get_i32(in);
    }
    const std::uint64_t no = get_u64(in);
    trees[t].oob.resize(no);
    for (std::uint64_t k = 0; k < no; ++k) trees[t].oob[k] = get_i32(in);
  }
  Eigen::VectorXd oob = get_vector(in);
  return Forest::from_parts(std::move(trees), params, d, std::move(oob));
}

}  // namespace

OodModel ModelBundle::model() const {
  return OodModel(core, metric, alpha, train_scores);
}

void ModelBundle::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write bundle: " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_string(out, config_snapshot);

  // training data (raw scale)
  put_matrix(out, train.features);
  put_vector(out, train.response);
  put_u64(out, train.feature_names.size());
  for (const std::string& s : train.feature_names) put_string(out, s);

  // standardizer
  put_vector(out, core->standardizer().means);
  put_vector(out, core->standardizer().sds);

  put_forest(out, core->forest());

  // importance plan
  const ImportancePlan& plan = core->plan();
  put_vector(out, plan.raw_scores);
  put_u64(out, plan.signal.size());
  for (int s : plan.signal) put_i32(out, s);
  put_vector(out, plan.weights);
  put_string(out, plan.policy);

  // scoring configuration and calibration
  put_i32(out, core->K());
  put_f64(out, core->trim_fraction());
  put_i32(out, static_cast<std::int32_t>(metric.kind));
  put_f64(out, metric.epsilon);
  put_f64(out, metric.p);
  put_i32(out, metric.min_pts);
  put_f64(out, metric.ridge);
  put_f64(out, alpha);
  put_vector(out, train_scores);
  put_f64(out, threshold);
  if (!out) throw IoError("bundle write failed: " + path);
}

ModelBundle ModelBundle::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bundle: " + path);
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a model bundle: " + path);
  }
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw IoError("bundle version mismatch in " + path + ": found " +
                  std::to_string(version) + ", expected " + std::to_string(kVersion));
  }

  ModelBundle b;
  b.config_snapshot = get_string(in);
  b.train.features = get_matrix(in);
  b.train.response = get_vector(in);
  const std::uint64_t nn = get_u64(in);
  b.train.feature_names.resize(nn);
  for (std::uint64_t i = 0; i < nn; ++i) b.train.feature_names[i] = get_string(in);

  Standardizer st;
  st.means = get_vector(in);
  st.sds = get_vector(in);

  Forest forest = get_forest(in);

  ImportancePlan plan;
  plan.raw_scores = get_vector(in);
  const std::uint64_t ns = get_u64(in);
  plan.signal.resize(ns);
  for (std::uint64_t i = 0; i < ns; ++i) plan.signal[i] = get_i32(in);
  plan.weights = get_vector(in);
  plan.policy = get_string(in);

  const int K = get_i32(in);
  const double trim = get_f64(in);
  b.metric.kind = static_cast<MetricKind>(get_i32(in));
  b.metric.epsilon = get_f64(in);
  b.metric.p = get_f64(in);
  b.metric.min_pts = get_i32(in);
  b.metric.ridge = get_f64(in);
  b.alpha = get_f64(in);
  b.train_scores = get_vector(in);
  b.threshold = get_f64(in);
  if (!in) throw IoError("bundle truncated: " + path);

  const Eigen::MatrixXd train_std = st.transform(b.train.features);
  auto core = std::make_shared<OodCore>(std::move(forest), std::move(plan), std::move(st),
                                        train_std, K, b.metric.ridge);
  core->set_trim_fraction(trim);
  b.core = core;
  return b;
}

}  // namespace outpro
