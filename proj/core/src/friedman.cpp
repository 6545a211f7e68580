#include "outpro/friedman.hpp"

#include <cmath>
#include <stdexcept>

#include "outpro/rng.hpp"

namespace outpro {

double friedman_response(const Eigen::VectorXd& x) {
  if (x.size() < 5) throw std::invalid_argument("friedman_response: need d >= 5");
  constexpr double pi = 3.14159265358979323846;
  return 10.0 * std::sin(pi * x(0) * x(1)) + 20.0 * (x(2) - 0.5) * (x(2) - 0.5) +
         10.0 * x(3) + 5.0 * x(4);
}

Dataset gen_friedman(const FriedmanSpec& spec) {
  if (spec.d < 5) throw std::invalid_argument("gen_friedman: need d >= 5");
  if (spec.n < 1) throw std::invalid_argument("gen_friedman: need n >= 1");
  if (spec.sigma < 0.0) throw std::invalid_argument("gen_friedman: sigma must be >= 0");

  Dataset ds;
  ds.features.resize(spec.n, spec.d);
  ds.response.resize(spec.n);
  for (int j = 0; j < spec.d; ++j) ds.feature_names.push_back("x" + std::to_string(j + 1));

  Rng rng(spec.seed);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.d; ++j) ds.features(i, j) = rng.uniform01();
    ds.response(i) =
        friedman_response(ds.features.row(i).transpose()) + spec.sigma * rng.normal();
  }
  return ds;
}

AnomalyBatch gen_shift_anomalies(const Dataset& test, const std::vector<int>& target_features,
                                 double magnitude, std::uint64_t seed) {
  if (target_features.empty()) {
    throw std::invalid_argument("gen_shift_anomalies: target feature set is empty");
  }
  if (magnitude < 0.0) throw std::invalid_argument("gen_shift_anomalies: magnitude must be >= 0");
  const Eigen::Index n = test.n();
  const Eigen::Index d = test.d();
  for (int f : target_features) {
    if (f < 0 || f >= d) throw std::invalid_argument("gen_shift_anomalies: target out of range");
  }
  // The support labeling rule only makes sense on unit-interval covariates.
  if ((test.features.array() < 0.0).any() || (test.features.array() > 1.0).any()) {
    throw std::invalid_argument(
        "gen_shift_anomalies: covariates must lie in [0,1] for the support rule");
  }

  std::vector<double> delta;
  delta.reserve(target_features.size());
  for (int f : target_features) {
    const double mean = test.features.col(f).mean();
    const double var = (test.features.col(f).array() - mean).square().sum() /
                       static_cast<double>(n > 1 ? n - 1 : 1);
    delta.push_back(magnitude * std::sqrt(var));
  }

  AnomalyBatch batch;
  batch.mode = "shift";
  batch.seed = seed;
  batch.magnitude = magnitude;
  batch.points = test.features;
  batch.labels.assign(static_cast<std::size_t>(n), 0);
  Rng rng(derive_seed(seed, 0x73686966ULL));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < target_features.size(); ++t) {
      const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
      batch.points(i, target_features[t]) += sign * delta[t];
    }
    bool outside = false;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double v = batch.points(i, j);
      if (v < 0.0 || v > 1.0) {
        outside = true;
        break;
      }
    }
    batch.labels[static_cast<std::size_t>(i)] = outside ? 1 : 0;
  }
  return batch;
}

}  // namespace outpro
