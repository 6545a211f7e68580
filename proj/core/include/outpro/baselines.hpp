#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>

#include "outpro/dataset.hpp"
#include "outpro/forest.hpp"

namespace outpro {

enum class BaselineKind { Msp, Odin, MahalanobisInput, Conformal, KnnInput };

enum class Orientation { LargerIsOod, SmallerIsOod };

std::string baseline_name(BaselineKind kind);
BaselineKind parse_baseline(const std::string& name);

// Non-neural comparison detectors sharing the forest predictor. Every kind
// declares its score orientation; oriented_score always returns
// larger-is-more-OOD, and flag() applies the same training-quantile rule as
// the main detector (conformal uses its own calibration split).
class BaselineModel {
 public:
  struct FitInputs {
    const Dataset& train;
    const Standardizer& standardizer;
    std::shared_ptr<const Forest> forest;  // shared predictor (not used by conformal)
    ForestParams forest_params;            // conformal refits on its 75% part
    double alpha = 0.05;
    int knn_k = 10;
    std::uint64_t seed = 0;
    unsigned jobs = 0;
  };

  static BaselineModel fit(BaselineKind kind, const FitInputs& in);

  BaselineKind kind() const { return kind_; }
  Orientation orientation() const;

  double raw_score(const Eigen::VectorXd& x_raw) const;
  double oriented_score(const Eigen::VectorXd& x_raw) const;
  bool flag(const Eigen::VectorXd& x_raw) const;

  double threshold() const { return threshold_; }
  const Eigen::VectorXd& train_scores() const { return train_scores_; }  // oriented

 private:
  BaselineKind kind_ = BaselineKind::Msp;
  Standardizer standardizer_;
  std::shared_ptr<const Forest> forest_;
  double train_mean_y_ = 0.0;

  // mahalanobis_input state
  Eigen::VectorXd mu_;
  Eigen::LLT<Eigen::MatrixXd> sigma_llt_;

  // knn state
  Eigen::MatrixXd train_std_;
  int knn_k_ = 10;

  // conformal state
  std::shared_ptr<const Forest> conformal_forest_;
  double calib_median_ = 0.0;
  double conformal_q_ = 0.0;

  Eigen::VectorXd train_scores_;  // oriented, larger = more OOD
  double threshold_ = 0.0;
};

}  // namespace outpro
