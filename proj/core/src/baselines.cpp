#include "outpro/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "outpro/parallel.hpp"
#include "outpro/rng.hpp"
#include "outpro/scorer.hpp"

namespace outpro {

std::string baseline_name(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Msp: return "msp";
    case BaselineKind::Odin: return "odin";
    case BaselineKind::MahalanobisInput: return "mahalanobis_input";
    case BaselineKind::Conformal: return "conformal";
    case BaselineKind::KnnInput: return "knn_input";
  }
  return "?";
}

BaselineKind parse_baseline(const std::string& name) {
  if (name == "msp") return BaselineKind::Msp;
  if (name == "odin") return BaselineKind::Odin;
  if (name == "mahalanobis_input") return BaselineKind::MahalanobisInput;
  if (name == "conformal") return BaselineKind::Conformal;
  if (name == "knn_input") return BaselineKind::KnnInput;
  throw std::invalid_argument("unknown baseline: " + name);
}

Orientation BaselineModel::orientation() const {
  switch (kind_) {
    case BaselineKind::Msp:
    case BaselineKind::Odin:
      return Orientation::SmallerIsOod;
    default:
      return Orientation::LargerIsOod;
  }
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty vector");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double BaselineModel::raw_score(const Eigen::VectorXd& x_raw) const {
  switch (kind_) {
    case BaselineKind::Msp: {
      const double f = forest_->predict(standardizer_.transform_row(x_raw));
      return 1.0 / (1.0 + std::abs(f - train_mean_y_));
    }
    case BaselineKind::Odin: {
      // Perturbation on the raw scale, then standardized.
      Eigen::VectorXd pert = x_raw;
      for (Eigen::Index j = 0; j < pert.size(); ++j) pert(j) += 0.01 * sign_of(x_raw(j));
      const double f = forest_->predict(standardizer_.transform_row(pert));
      return 1.0 / (1.0 + std::abs(f - train_mean_y_));
    }
    case BaselineKind::MahalanobisInput: {
      const Eigen::VectorXd xs = standardizer_.transform_row(x_raw);
      const Eigen::VectorXd solved = sigma_llt_.matrixL().solve(xs - mu_);
      return solved.norm();
    }
    case BaselineKind::Conformal: {
      const double f = conformal_forest_->predict(standardizer_.transform_row(x_raw));
      return std::abs(f - calib_median_);
    }
    case BaselineKind::KnnInput: {
      const Eigen::VectorXd xs = standardizer_.transform_row(x_raw);
      std::vector<double> d2(static_cast<std::size_t>(train_std_.rows()));
      for (Eigen::Index i = 0; i < train_std_.rows(); ++i) {
        d2[static_cast<std::size_t>(i)] = (train_std_.row(i).transpose() - xs).squaredNorm();
      }
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(knn_k_), d2.size());
      std::partial_sort(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(k), d2.end());
      double sum = 0.0;
      for (std::size_t i = 0; i < k; ++i) sum += std::sqrt(d2[i]);
      return sum / static_cast<double>(k);
    }
  }
  return 0.0;
}

double BaselineModel::oriented_score(const Eigen::VectorXd& x_raw) const {
  const double s = raw_score(x_raw);
  return orientation() == Orientation::LargerIsOod ? s : -s;
}

bool BaselineModel::flag(const Eigen::VectorXd& x_raw) const {
  return oriented_score(x_raw) > threshold_;
}

BaselineModel BaselineModel::fit(BaselineKind kind, const FitInputs& in) {
  BaselineModel m;
  m.kind_ = kind;
  m.standardizer_ = in.standardizer;
  m.forest_ = in.forest;
  m.train_mean_y_ = in.train.response.mean();
  const Eigen::Index n = in.train.n();
  const Eigen::Index d = in.train.d();

  switch (kind) {
    case BaselineKind::Msp:
    case BaselineKind::Odin:
      if (!m.forest_) throw std::invalid_argument("baseline fit: missing shared forest");
      break;
    case BaselineKind::MahalanobisInput: {
      if (d >= n) {
        // The paper notes this failure mode explicitly for d >> n.
        throw std::runtime_error(
            "mahalanobis_input: covariance is singular with d >= n; "
            "use a subspace method or a ridge");
      }
      const Eigen::MatrixXd xs = in.standardizer.transform(in.train.features);
      m.mu_ = xs.colwise().mean();
      const Eigen::MatrixXd centered = xs.rowwise() - m.mu_.transpose();
      Eigen::MatrixXd sigma = centered.transpose() * centered / static_cast<double>(n - 1);
      const double lambda = 1e-6 * sigma.trace() / static_cast<double>(d);
      sigma.diagonal().array() += lambda > 0.0 ? lambda : 1e-12;
      m.sigma_llt_.compute(sigma);
      if (m.sigma_llt_.info() != Eigen::Success) {
        throw std::runtime_error("mahalanobis_input: covariance singular after ridge");
      }
      break;
    }
    case BaselineKind::Conformal: {
      // 75/25 fit/calibration partition of the training set.
      auto [fit_idx, calib_idx] = split_indices(n, {0.75, derive_seed(in.seed, 0x6366ULL)});
      const Dataset fit_part = take_rows(in.train, fit_idx);
      const Dataset calib_part = take_rows(in.train, calib_idx);
      Forest cf = Forest::fit(in.standardizer.transform(fit_part.features), fit_part.response,
                              in.forest_params, in.jobs);
      m.conformal_forest_ = std::make_shared<const Forest>(std::move(cf));
      std::vector<double> preds;
      preds.reserve(static_cast<std::size_t>(calib_part.n()));
      const Eigen::MatrixXd calib_std = in.standardizer.transform(calib_part.features);
      for (Eigen::Index i = 0; i < calib_part.n(); ++i) {
        preds.push_back(m.conformal_forest_->predict(calib_std.row(i).transpose()));
      }
      m.calib_median_ = median_of(preds);
      std::vector<double> resid;
      resid.reserve(preds.size());
      for (double p : preds) resid.push_back(std::abs(p - m.calib_median_));
      m.conformal_q_ = order_statistic_quantile(resid, 1.0 - in.alpha);
      m.threshold_ = m.conformal_q_;
      m.train_scores_ = Eigen::Map<Eigen::VectorXd>(resid.data(),
                                                    static_cast<Eigen::Index>(resid.size()));
      return m;
    }
    case BaselineKind::KnnInput: {
      if (in.knn_k < 1) throw std::invalid_argument("knn_input: k must be >= 1");
      if (in.knn_k > n) throw std::invalid_argument("knn_input: k larger than training size");
      m.train_std_ = in.standardizer.transform(in.train.features);
      m.knn_k_ = in.knn_k;
      break;
    }
  }

  // Shared calibration rule: oriented training scores, (1-alpha) quantile.
  Eigen::VectorXd scores(n);
  if (kind == BaselineKind::KnnInput) {
    // Self-exclusion: a training point is not its own neighbor.
    parallel_for(static_cast<std::size_t>(n), in.jobs, [&](std::size_t i) {
      std::vector<double> d2;
      d2.reserve(static_cast<std::size_t>(n) - 1);
      const Eigen::VectorXd xi = m.train_std_.row(static_cast<Eigen::Index>(i)).transpose();
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r == static_cast<Eigen::Index>(i)) continue;
        d2.push_back((m.train_std_.row(r).transpose() - xi).squaredNorm());
      }
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(m.knn_k_), d2.size());
      std::partial_sort(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(k), d2.end());
      double sum = 0.0;
      for (std::size_t r = 0; r < k; ++r) sum += std::sqrt(d2[r]);
      scores(static_cast<Eigen::Index>(i)) = sum / static_cast<double>(k);
    });
  } else {
    parallel_for(static_cast<std::size_t>(n), in.jobs, [&](std::size_t i) {
      scores(static_cast<Eigen::Index>(i)) =
          m.oriented_score(in.train.features.row(static_cast<Eigen::Index>(i)).transpose());
    });
  }
  m.train_scores_ = scores;
  std::vector<double> v(scores.data(), scores.data() + scores.size());
  m.threshold_ = order_statistic_quantile(std::move(v), 1.0 - in.alpha);
  return m;
}

}  // namespace outpro
