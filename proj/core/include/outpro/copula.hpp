#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "outpro/dataset.hpp"

namespace outpro {

// Rank-based empirical marginal of one feature: CDF values rank/(n+1) with
// midranks for ties, piecewise-linear quantile function, and fitted tail
// slopes for the extrapolating inverse.
struct EmpiricalMarginal {
  std::vector<double> values;   // unique training values, ascending
  std::vector<double> cdf;      // averaged-rank/(n+1) at each unique value
  double lo_slope = 0.0;        // d value / d u below the first knot
  double hi_slope = 0.0;        // d value / d u above the last knot

  static EmpiricalMarginal fit(const Eigen::VectorXd& column);

  double cdf_at(double v) const;            // clamped to [cdf.front(), cdf.back()]
  double quantile(double u) const;          // clamped to observed range
  double quantile_extrapolating(double u) const;
};

// Gaussian copula of the training features: latent correlation matrix (PD
// after jitter), latent training vectors, marginals, and the Mahalanobis
// labeling threshold tau at level 1-q.
struct CopulaModel {
  Eigen::MatrixXd R;
  Eigen::LLT<Eigen::MatrixXd> llt;  // Cholesky of the jittered R
  Eigen::MatrixXd latents;          // n x d training z
  std::vector<EmpiricalMarginal> marginals;
  double tau = 0.0;
  double q = 0.05;
  int jitter_attempts = 0;
  bool small_sample_warning = false;  // n < d + 2

  Eigen::Index d() const { return R.rows(); }
  double mahalanobis(const Eigen::VectorXd& z) const;
  Eigen::VectorXd to_latent(const Eigen::VectorXd& x_raw) const;
};

CopulaModel fit_copula(const Eigen::MatrixXd& x_raw, double q);

struct AnomalyBatch {
  Eigen::MatrixXd points;    // m x d, raw scale
  std::string mode;          // warp | joint | support | shift
  std::vector<std::uint8_t> labels;
  Eigen::MatrixXd latent_u;  // m x d copula coordinates (copula modes only)
  double gamma = 0.0;
  double q = 0.0;
  double magnitude = 0.0;
  std::uint64_t seed = 0;
};

// Marginal tail distortion: u -> u^g / (u^g + (1-u)^g) applied coordinate
// wise; labels from the latent Mahalanobis rule d_M > tau.
AnomalyBatch gen_warp(const CopulaModel& model, int m, double gamma, std::uint64_t seed);

// Dependence perturbation: latent base point plus a radial step drawn from
// the upper-q tail of chi-squared(d); labels all 1.
AnomalyBatch gen_joint(const CopulaModel& model, int m, double q, std::uint64_t seed);

// Extrapolation beyond the observed support: latent vector rescaled to an
// upper-tail Mahalanobis radius, mapped through the extrapolating inverse
// CDF; labels all 1.
AnomalyBatch gen_support(const CopulaModel& model, int m, double q, std::uint64_t seed);

// The monotone warp map itself (fixed points 0, 1/2, 1 for every gamma).
double warp_map(double u, double gamma);

// Copula coordinates clamped into the open unit interval: the normal CDF
// saturates to exactly 1.0 in double beyond ~8.2 sd, which would break the
// inverse map. All generated latent_u values are stored clamped.
double clamp_unit_open(double u);

// Mahalanobis labels recomputed from copula coordinates; gen_warp's labels
// equal recompute_warp_labels(model, batch.latent_u).
std::vector<std::uint8_t> recompute_warp_labels(const CopulaModel& model,
                                                const Eigen::MatrixXd& latent_u);

// CSV with feature columns plus mode,label,seed; JSON sidecar with params.
void write_anomaly_csv(const AnomalyBatch& batch, const std::vector<std::string>& feature_names,
                       const std::string& path);
void write_anomaly_sidecar(const AnomalyBatch& batch, const std::string& path);

}  // namespace outpro
