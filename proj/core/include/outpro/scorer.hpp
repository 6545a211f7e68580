#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "outpro/dataset.hpp"
#include "outpro/forest.hpp"
#include "outpro/importance.hpp"

namespace outpro {

// Co-occurrence profile of one training point against a scored input.
// counts are per signal feature, in plan.signal order. All derived values
// come from integer count arithmetic before the float conversion.
struct ProximityProfile {
  std::vector<std::uint32_t> counts;
  std::uint64_t total = 0;
  std::vector<double> freqs;
  double dispersion = 0.0;  // sum p(1-p), Gini style
  double weight = 0.0;      // total * dispersion
};

enum class MetricKind { Product, Optics, Euclidean, Manhattan, Mahalanobis, Minkowski };

struct MetricSpec {
  MetricKind kind = MetricKind::Product;
  double epsilon = 1e-6;     // product stability constant (standardized scale)
  double p = 4.0;            // minkowski exponent, >= 1
  int min_pts = 5;           // optics density parameter
  double ridge = 1e-6;       // mahalanobis diagonal ridge, relative to trace/|S|

  std::string name() const;
  static MetricSpec parse(const std::string& name);
  void validate() const;
};

struct OodResult {
  double score = 0.0;
  double percentile = 0.0;  // empirical CDF of training scores, in [0,100]
  bool flagged = false;
  std::vector<int> neighborhood;  // selected training indices (size <= K)
};

// Metric-independent scoring machinery shared by every calibrated model:
// forest, signal plan, standardizer, standardized training matrix and the
// per-signal-axis sorted orders used for counting.
class OodCore {
 public:
  // ridge is relative: lambda = ridge * trace(Sigma_S) / |S| on the diagonal.
  OodCore(Forest forest, ImportancePlan plan, Standardizer standardizer,
          Eigen::MatrixXd train_std, int K, double ridge = 1e-6);

  // Release-region co-occurrence counts of every training point for a
  // standardized input: counts[k][i] = number of rules containing x whose
  // bounds on signal axis k admit training point i.
  std::vector<std::vector<std::uint32_t>> frequency_counts(const Eigen::VectorXd& x_std) const;

  std::vector<ProximityProfile> frequency_profiles(const Eigen::VectorXd& x_std) const;

  // Indices of the K largest proximity weights; ties broken by larger
  // total, then lower index. Points with total 0 never qualify. exclude
  // removes one candidate (self-exclusion during calibration).
  std::vector<int> select_neighborhood(const std::vector<ProximityProfile>& profiles,
                                       int exclude = -1) const;

  // Weighted subspace distance between two standardized points (not optics).
  double subspace_distance(const MetricSpec& metric, const Eigen::VectorXd& x_std,
                           const Eigen::VectorXd& y_std) const;

  // Neighborhood aggregate for any metric, including optics reachability.
  double aggregate_score(const MetricSpec& metric, const Eigen::VectorXd& x_std,
                         const std::vector<int>& neighborhood) const;

  const Forest& forest() const { return forest_; }
  const ImportancePlan& plan() const { return plan_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const Eigen::MatrixXd& train_std() const { return train_std_; }
  const Eigen::MatrixXd& sigma_signal() const { return sigma_; }
  int K() const { return k_; }
  double trim_fraction() const { return trim_fraction_; }
  void set_trim_fraction(double f);

 private:
  Eigen::VectorXd signal_coords(const Eigen::VectorXd& x_std) const;

  Forest forest_;
  ImportancePlan plan_;
  Standardizer standardizer_;
  Eigen::MatrixXd train_std_;   // n x d
  Eigen::MatrixXd train_sig_;   // n x |S| subspace copy
  Eigen::MatrixXd sigma_;       // |S| x |S| covariance with ridge
  Eigen::LLT<Eigen::MatrixXd> sigma_llt_;
  int k_ = 50;
  double trim_fraction_ = 0.0;  // trimmed-mean aggregation, off by default

  // per signal axis: training values ascending + each point's sorted position
  std::vector<std::vector<double>> sorted_vals_;
  std::vector<std::vector<int>> rank_of_;
};

// Calibrated detector for one metric: training scores with self-exclusion
// and the (1-alpha) order-statistic threshold.
class OodModel {
 public:
  OodModel(std::shared_ptr<const OodCore> core, MetricSpec metric, double alpha,
           Eigen::VectorXd train_scores);

  OodResult score_point(const Eigen::VectorXd& x_raw) const;
  std::vector<OodResult> score_batch(const Eigen::MatrixXd& x_raw, unsigned jobs = 0) const;

  const OodCore& core() const { return *core_; }
  std::shared_ptr<const OodCore> core_ptr() const { return core_; }
  const MetricSpec& metric() const { return metric_; }
  double alpha() const { return alpha_; }
  double threshold() const { return threshold_; }
  const Eigen::VectorXd& train_scores() const { return train_scores_; }

 private:
  std::shared_ptr<const OodCore> core_;
  MetricSpec metric_;
  double alpha_ = 0.05;
  Eigen::VectorXd train_scores_;
  std::vector<double> sorted_scores_;
  double threshold_ = 0.0;
};

// Scores every training point with itself excluded from the neighborhood
// candidates, one profile pass shared across all metrics.
std::vector<OodModel> calibrate(std::shared_ptr<const OodCore> core,
                                const std::vector<MetricSpec>& metrics, double alpha,
                                unsigned jobs = 0);

// Empirical (1-alpha) quantile as the ceil((1-alpha)n)-th order statistic.
double order_statistic_quantile(std::vector<double> values, double level);

}  // namespace outpro
