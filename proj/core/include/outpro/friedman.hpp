#pragma once

#include <cstdint>
#include <vector>

#include "outpro/copula.hpp"
#include "outpro/dataset.hpp"

namespace outpro {

struct FriedmanSpec {
  int n = 2000;
  int d = 10;     // >= 5; features beyond the first five are noise
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

// Noise-free regression surface: 10 sin(pi x1 x2) + 20 (x3 - 1/2)^2
// + 10 x4 + 5 x5.
double friedman_response(const Eigen::VectorXd& x);

// i.i.d. U[0,1] covariates with Gaussian response noise.
Dataset gen_friedman(const FriedmanSpec& spec);

// Additive shifts of magnitude * sd_j on the targeted features, sign drawn
// independently per point and feature. Requires covariates inside [0,1];
// a point is labeled anomalous iff any coordinate leaves [0,1].
AnomalyBatch gen_shift_anomalies(const Dataset& test, const std::vector<int>& target_features,
                                 double magnitude, std::uint64_t seed);

}  // namespace outpro
