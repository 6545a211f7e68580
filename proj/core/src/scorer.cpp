#include "outpro/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "outpro/optics.hpp"
#include "outpro/parallel.hpp"

namespace outpro {

std::string MetricSpec::name() const {
  switch (kind) {
    case MetricKind::Product: return "product";
    case MetricKind::Optics: return "optics";
    case MetricKind::Euclidean: return "euclidean";
    case MetricKind::Manhattan: return "manhattan";
    case MetricKind::Mahalanobis: return "mahalanobis";
    case MetricKind::Minkowski: return "minkowski";
  }
  return "?";
}

MetricSpec MetricSpec::parse(const std::string& name) {
  MetricSpec m;
  if (name == "product") m.kind = MetricKind::Product;
  else if (name == "optics") m.kind = MetricKind::Optics;
  else if (name == "euclidean") m.kind = MetricKind::Euclidean;
  else if (name == "manhattan") m.kind = MetricKind::Manhattan;
  else if (name == "mahalanobis") m.kind = MetricKind::Mahalanobis;
  else if (name == "minkowski") m.kind = MetricKind::Minkowski;
  else throw std::invalid_argument("unknown metric: " + name);
  return m;
}

void MetricSpec::validate() const {
  if (kind == MetricKind::Product && !(epsilon > 0.0)) {
    throw std::invalid_argument("product metric: epsilon must be > 0");
  }
  if (kind == MetricKind::Minkowski && !(p >= 1.0)) {
    throw std::invalid_argument("minkowski metric: p must be >= 1");
  }
  if (kind == MetricKind::Optics && min_pts < 1) {
    throw std::invalid_argument("optics metric: min_pts must be >= 1");
  }
  if (kind == MetricKind::Mahalanobis && ridge < 0.0) {
    throw std::invalid_argument("mahalanobis metric: ridge must be >= 0");
  }
}

OodCore::OodCore(Forest forest, ImportancePlan plan, Standardizer standardizer,
                 Eigen::MatrixXd train_std, int K, double ridge)
    : forest_(std::move(forest)),
      plan_(std::move(plan)),
      standardizer_(std::move(standardizer)),
      train_std_(std::move(train_std)),
      k_(K) {
  if (plan_.signal.empty()) throw std::invalid_argument("OodCore: empty signal set");
  if (k_ < 1) throw std::invalid_argument("OodCore: K must be >= 1");
  if (ridge < 0.0) throw std::invalid_argument("OodCore: ridge must be >= 0");
  const Eigen::Index n = train_std_.rows();
  const Eigen::Index q = static_cast<Eigen::Index>(plan_.signal.size());

  train_sig_.resize(n, q);
  for (Eigen::Index k = 0; k < q; ++k) {
    train_sig_.col(k) = train_std_.col(plan_.signal[static_cast<std::size_t>(k)]);
  }

  // Signal-subspace covariance with a relative ridge, shared by every
  // mahalanobis evaluation of this model.
  const Eigen::RowVectorXd mu = train_sig_.colwise().mean();
  const Eigen::MatrixXd centered = train_sig_.rowwise() - mu;
  sigma_ = centered.transpose() * centered / static_cast<double>(n > 1 ? n - 1 : 1);
  const double lambda = ridge * sigma_.trace() / static_cast<double>(q);
  sigma_.diagonal().array() += lambda > 0.0 ? lambda : 1e-12;
  sigma_llt_.compute(sigma_);
  if (sigma_llt_.info() != Eigen::Success) {
    throw std::runtime_error(
        "OodCore: signal covariance is singular even after ridge; increase the ridge");
  }

  sorted_vals_.resize(static_cast<std::size_t>(q));
  rank_of_.resize(static_cast<std::size_t>(q));
  std::vector<int> order(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < q; ++k) {
    auto& vals = sorted_vals_[static_cast<std::size_t>(k)];
    auto& rank = rank_of_[static_cast<std::size_t>(k)];
    std::iota(order.begin(), order.end(), 0);
    const Eigen::MatrixXd& sig = train_sig_;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return sig(a, k) < sig(b, k); });
    vals.resize(static_cast<std::size_t>(n));
    rank.resize(static_cast<std::size_t>(n));
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      vals[pos] = sig(order[pos], k);
      rank[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos);
    }
  }
}

void OodCore::set_trim_fraction(double f) {
  if (!(f >= 0.0 && f < 0.5)) throw std::invalid_argument("trim_fraction must be in [0, 0.5)");
  trim_fraction_ = f;
}

Eigen::VectorXd OodCore::signal_coords(const Eigen::VectorXd& x_std) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(plan_.signal.size()));
  for (std::size_t k = 0; k < plan_.signal.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = x_std(plan_.signal[k]);
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> OodCore::frequency_counts(
    const Eigen::VectorXd& x_std) const {
  if (x_std.size() != train_std_.cols()) {
    throw std::invalid_argument("frequency_counts: dimension mismatch");
  }
  const std::size_t q = plan_.signal.size();
  const std::size_t n = static_cast<std::size_t>(train_std_.rows());

  // Interval stabbing per signal axis: each rule containing x contributes
  // +1 on the sorted-order range of training values admitted by its bounds
  // on that axis; prefix sums then yield every point's count at once.
  std::vector<std::vector<std::int32_t>> diff(q, std::vector<std::int32_t>(n + 1, 0));

  std::vector<double> lo(q), hi(q);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (const Tree& tree : forest_.trees()) {
    std::fill(lo.begin(), lo.end(), -kInf);
    std::fill(hi.begin(), hi.end(), kInf);
    int idx = 0;
    while (tree.nodes[static_cast<std::size_t>(idx)].feature >= 0) {
      const TreeNode& nd = tree.nodes[static_cast<std::size_t>(idx)];
      const bool go_left = x_std(nd.feature) <= nd.threshold;
      for (std::size_t k = 0; k < q; ++k) {
        if (plan_.signal[k] == nd.feature) {
          if (go_left) {
            hi[k] = std::min(hi[k], nd.threshold);
          } else {
            lo[k] = std::max(lo[k], nd.threshold);
          }
          break;
        }
      }
      idx = go_left ? nd.left : nd.right;
    }
    for (std::size_t k = 0; k < q; ++k) {
      const auto& vals = sorted_vals_[k];
      // first sorted position with value > lo, one past the last with value <= hi
      const std::size_t first =
          lo[k] == -kInf ? 0
                         : static_cast<std::size_t>(
                               std::upper_bound(vals.begin(), vals.end(), lo[k]) - vals.begin());
      const std::size_t last =
          hi[k] == kInf ? n
                        : static_cast<std::size_t>(
                              std::upper_bound(vals.begin(), vals.end(), hi[k]) - vals.begin());
      if (first < last) {
        ++diff[k][first];
        --diff[k][last];
      }
    }
  }

  std::vector<std::vector<std::uint32_t>> counts(q, std::vector<std::uint32_t>(n, 0));
  for (std::size_t k = 0; k < q; ++k) {
    std::int64_t running = 0;
    std::vector<std::uint32_t> by_pos(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
      running += diff[k][pos];
      by_pos[pos] = static_cast<std::uint32_t>(running);
    }
    const auto& rank = rank_of_[k];
    for (std::size_t i = 0; i < n; ++i) {
      counts[k][i] = by_pos[static_cast<std::size_t>(rank[i])];
    }
  }
  return counts;
}

std::vector<ProximityProfile> OodCore::frequency_profiles(const Eigen::VectorXd& x_std) const {
  const auto counts = frequency_counts(x_std);
  const std::size_t q = plan_.signal.size();
  const std::size_t n = static_cast<std::size_t>(train_std_.rows());

  std::vector<ProximityProfile> profiles(n);
  for (std::size_t i = 0; i < n; ++i) {
    ProximityProfile& pr = profiles[i];
    pr.counts.resize(q);
    std::uint64_t total = 0;
    std::uint64_t sumsq = 0;
    for (std::size_t k = 0; k < q; ++k) {
      const std::uint32_t c = counts[k][i];
      pr.counts[k] = c;
      total += c;
      sumsq += static_cast<std::uint64_t>(c) * c;
    }
    pr.total = total;
    pr.freqs.assign(q, 0.0);
    if (total > 0) {
      for (std::size_t k = 0; k < q; ++k) {
        pr.freqs[k] = static_cast<double>(pr.counts[k]) / static_cast<double>(total);
      }
      // sum p(1-p) = (total^2 - sum c^2) / total^2, exact in integers first
      const double t2 = static_cast<double>(total) * static_cast<double>(total);
      pr.dispersion = (t2 - static_cast<double>(sumsq)) / t2;
      pr.weight = static_cast<double>(total) * pr.dispersion;
    }
  }
  return profiles;
}

std::vector<int> OodCore::select_neighborhood(const std::vector<ProximityProfile>& profiles,
                                              int exclude) const {
  std::vector<int> candidates;
  candidates.reserve(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (static_cast<int>(i) == exclude) continue;
    if (profiles[i].total > 0) candidates.push_back(static_cast<int>(i));
  }
  if (candidates.empty()) {
    throw std::runtime_error("select_neighborhood: no co-occurring training points");
  }
  const auto better = [&](int a, int b) {
    const ProximityProfile& pa = profiles[static_cast<std::size_t>(a)];
    const ProximityProfile& pb = profiles[static_cast<std::size_t>(b)];
    if (pa.weight != pb.weight) return pa.weight > pb.weight;
    if (pa.total != pb.total) return pa.total > pb.total;
    return a < b;
  };
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k_), candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(kk),
                    candidates.end(), better);
  candidates.resize(kk);
  return candidates;
}

double OodCore::subspace_distance(const MetricSpec& metric, const Eigen::VectorXd& x_std,
                                  const Eigen::VectorXd& y_std) const {
  metric.validate();
  const Eigen::VectorXd dx = signal_coords(x_std) - signal_coords(y_std);
  const Eigen::VectorXd& w = plan_.weights;
  switch (metric.kind) {
    case MetricKind::Product: {
      double log_sum = 0.0;
      for (Eigen::Index k = 0; k < dx.size(); ++k) {
        log_sum += w(k) * std::log(std::abs(dx(k)) + metric.epsilon);
      }
      return std::exp(log_sum);
    }
    case MetricKind::Euclidean:
      return std::sqrt((w.array() * dx.array().square()).sum());
    case MetricKind::Manhattan:
      return (w.array() * dx.array().abs()).sum();
    case MetricKind::Mahalanobis: {
      const Eigen::VectorXd solved = sigma_llt_.matrixL().solve(dx);
      return solved.norm();
    }
    case MetricKind::Minkowski: {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < dx.size(); ++k) {
        acc += w(k) * std::pow(std::abs(dx(k)), metric.p);
      }
      return std::pow(acc, 1.0 / metric.p);
    }
    case MetricKind::Optics:
      throw std::invalid_argument("subspace_distance: optics is a neighborhood score");
  }
  return 0.0;
}

double OodCore::aggregate_score(const MetricSpec& metric, const Eigen::VectorXd& x_std,
                                const std::vector<int>& neighborhood) const {
  if (neighborhood.empty()) {
    throw std::runtime_error("aggregate_score: empty neighborhood");
  }
  if (metric.kind == MetricKind::Optics) {
    const std::size_t m = neighborhood.size() + 1;
    if (static_cast<int>(m) < metric.min_pts) {
      throw std::invalid_argument(
          "optics metric: neighborhood smaller than min_pts; increase K");
    }
    const Eigen::Index q = static_cast<Eigen::Index>(plan_.signal.size());
    const Eigen::ArrayXd scale = plan_.weights.array().sqrt();
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(m), q);
    for (std::size_t r = 0; r < neighborhood.size(); ++r) {
      pts.row(static_cast<Eigen::Index>(r)) =
          train_sig_.row(neighborhood[r]).array() * scale.transpose();
    }
    pts.row(static_cast<Eigen::Index>(m - 1)) =
        signal_coords(x_std).transpose().array() * scale.transpose();
    return optics_reachability(pts, static_cast<int>(m - 1), metric.min_pts);
  }

  std::vector<double> dists;
  dists.reserve(neighborhood.size());
  for (int i : neighborhood) {
    dists.push_back(subspace_distance(metric, x_std, train_std_.row(i).transpose()));
  }
  if (trim_fraction_ > 0.0 && dists.size() > 2) {
    const std::size_t cut = static_cast<std::size_t>(trim_fraction_ * dists.size());
    if (cut > 0 && 2 * cut < dists.size()) {
      std::sort(dists.begin(), dists.end());
      dists.erase(dists.end() - static_cast<std::ptrdiff_t>(cut), dists.end());
      dists.erase(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(cut));
    }
  }
  return std::accumulate(dists.begin(), dists.end(), 0.0) / static_cast<double>(dists.size());
}

double order_statistic_quantile(std::vector<double> values, double level) {
  if (values.empty()) throw std::invalid_argument("order_statistic_quantile: empty sample");
  const std::size_t n = values.size();
  std::size_t idx = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
  if (idx < 1) idx = 1;
  if (idx > n) idx = n;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(idx - 1),
                   values.end());
  return values[idx - 1];
}

OodModel::OodModel(std::shared_ptr<const OodCore> core, MetricSpec metric, double alpha,
                   Eigen::VectorXd train_scores)
    : core_(std::move(core)), metric_(metric), alpha_(alpha), train_scores_(std::move(train_scores)) {
  metric_.validate();
  if (!(alpha_ > 0.0 && alpha_ < 1.0)) {
    throw std::invalid_argument("OodModel: alpha must be in (0,1)");
  }
  const std::size_t n = static_cast<std::size_t>(train_scores_.size());
  if (n < 2) throw std::invalid_argument("OodModel: need at least 2 training scores");
  const std::size_t idx = static_cast<std::size_t>(
      std::ceil((1.0 - alpha_) * static_cast<double>(n)));
  if (idx > n - 1) {
    throw std::invalid_argument(
        "OodModel: training sample too small for the requested alpha");
  }
  sorted_scores_.assign(train_scores_.data(), train_scores_.data() + train_scores_.size());
  std::sort(sorted_scores_.begin(), sorted_scores_.end());
  threshold_ = sorted_scores_[idx - 1];
}

OodResult OodModel::score_point(const Eigen::VectorXd& x_raw) const {
  const OodCore& core = *core_;
  if (x_raw.size() != core.train_std().cols()) {
    throw std::invalid_argument("score_point: dimension mismatch");
  }
  const Eigen::VectorXd x_std = core.standardizer().transform_row(x_raw);
  const auto profiles = core.frequency_profiles(x_std);
  OodResult res;
  res.neighborhood = core.select_neighborhood(profiles);
  res.score = core.aggregate_score(metric_, x_std, res.neighborhood);
  const auto up = std::upper_bound(sorted_scores_.begin(), sorted_scores_.end(), res.score);
  res.percentile = 100.0 * static_cast<double>(up - sorted_scores_.begin()) /
                   static_cast<double>(sorted_scores_.size());
  res.flagged = res.score > threshold_;
  return res;
}

std::vector<OodResult> OodModel::score_batch(const Eigen::MatrixXd& x_raw, unsigned jobs) const {
  std::vector<OodResult> out(static_cast<std::size_t>(x_raw.rows()));
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i] = score_point(x_raw.row(static_cast<Eigen::Index>(i)).transpose());
  });
  return out;
}

std::vector<OodModel> calibrate(std::shared_ptr<const OodCore> core,
                                const std::vector<MetricSpec>& metrics, double alpha,
                                unsigned jobs) {
  if (metrics.empty()) throw std::invalid_argument("calibrate: no metrics given");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("calibrate: alpha must be in (0,1)");
  }
  for (const MetricSpec& m : metrics) m.validate();
  const Eigen::Index n = core->train_std().rows();
  if (n < 2) throw std::invalid_argument("calibrate: need at least 2 training points");
  const std::size_t idx = static_cast<std::size_t>(
      std::ceil((1.0 - alpha) * static_cast<double>(n)));
  if (idx > static_cast<std::size_t>(n) - 1) {
    throw std::invalid_argument("calibrate: training sample too small for the requested alpha");
  }

  Eigen::MatrixXd scores(n, static_cast<Eigen::Index>(metrics.size()));
  parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t i) {
    const Eigen::VectorXd x_std = core->train_std().row(static_cast<Eigen::Index>(i)).transpose();
    const auto profiles = core->frequency_profiles(x_std);
    const auto nbhd = core->select_neighborhood(profiles, static_cast<int>(i));
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) =
          core->aggregate_score(metrics[m], x_std, nbhd);
    }
  });

  std::vector<OodModel> models;
  models.reserve(metrics.size());
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    models.emplace_back(core, metrics[m], alpha, scores.col(static_cast<Eigen::Index>(m)));
  }
  return models;
}

}  // namespace outpro
