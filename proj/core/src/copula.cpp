#include "outpro/copula.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "outpro/rng.hpp"
#include "outpro/special_math.hpp"

namespace outpro {

EmpiricalMarginal EmpiricalMarginal::fit(const Eigen::VectorXd& column) {
  const std::size_t n = static_cast<std::size_t>(column.size());
  if (n < 2) throw std::invalid_argument("EmpiricalMarginal::fit: need n >= 2");
  std::vector<double> sorted(column.data(), column.data() + column.size());
  std::sort(sorted.begin(), sorted.end());

  EmpiricalMarginal m;
  // Collapse ties to unique knots at their averaged rank / (n+1).
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    m.values.push_back(sorted[i]);
    m.cdf.push_back(avg_rank / static_cast<double>(n + 1));
    i = j + 1;
  }

  // Tail slopes from a least-squares line through the outer 5% of the
  // (u, value) knots, at least 2 points each side.
  const auto ls_slope = [&](std::size_t first, std::size_t count) {
    double su = 0, sv = 0, suu = 0, suv = 0;
    for (std::size_t k = first; k < first + count; ++k) {
      su += m.cdf[k];
      sv += m.values[k];
      suu += m.cdf[k] * m.cdf[k];
      suv += m.cdf[k] * m.values[k];
    }
    const double c = static_cast<double>(count);
    const double denom = c * suu - su * su;
    if (denom <= 0.0) return 0.0;
    return (c * suv - su * sv) / denom;
  };
  const std::size_t nk = m.values.size();
  const std::size_t tail = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(nk))));
  if (nk >= 2) {
    const std::size_t cnt = std::min(tail, nk);
    m.lo_slope = ls_slope(0, cnt);
    m.hi_slope = ls_slope(nk - cnt, cnt);
  }
  return m;
}

double EmpiricalMarginal::cdf_at(double v) const {
  if (v <= values.front()) return cdf.front();
  if (v >= values.back()) return cdf.back();
  const auto it = std::upper_bound(values.begin(), values.end(), v);
  const std::size_t hi = static_cast<std::size_t>(it - values.begin());
  const std::size_t lo = hi - 1;
  const double t = (v - values[lo]) / (values[hi] - values[lo]);
  return cdf[lo] + t * (cdf[hi] - cdf[lo]);
}

double EmpiricalMarginal::quantile(double u) const {
  if (u <= cdf.front()) return values.front();
  if (u >= cdf.back()) return values.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const std::size_t hi = static_cast<std::size_t>(it - cdf.begin());
  const std::size_t lo = hi - 1;
  const double t = (u - cdf[lo]) / (cdf[hi] - cdf[lo]);
  return values[lo] + t * (values[hi] - values[lo]);
}

double EmpiricalMarginal::quantile_extrapolating(double u) const {
  if (u < cdf.front()) return values.front() - lo_slope * (cdf.front() - u);
  if (u > cdf.back()) return values.back() + hi_slope * (u - cdf.back());
  return quantile(u);
}

double CopulaModel::mahalanobis(const Eigen::VectorXd& z) const {
  const Eigen::VectorXd solved = llt.matrixL().solve(z);
  return solved.norm();
}

Eigen::VectorXd CopulaModel::to_latent(const Eigen::VectorXd& x_raw) const {
  Eigen::VectorXd z(x_raw.size());
  for (Eigen::Index j = 0; j < x_raw.size(); ++j) {
    z(j) = normal_quantile(marginals[static_cast<std::size_t>(j)].cdf_at(x_raw(j)));
  }
  return z;
}

CopulaModel fit_copula(const Eigen::MatrixXd& x_raw, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("fit_copula: q must be in (0,1)");
  const Eigen::Index n = x_raw.rows();
  const Eigen::Index d = x_raw.cols();
  if (n < 2 || d < 1) throw std::invalid_argument("fit_copula: need n >= 2, d >= 1");

  CopulaModel model;
  model.q = q;
  model.small_sample_warning = n < d + 2;
  model.marginals.reserve(static_cast<std::size_t>(d));
  model.latents.resize(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    EmpiricalMarginal m = EmpiricalMarginal::fit(x_raw.col(j));
    for (Eigen::Index i = 0; i < n; ++i) {
      model.latents(i, j) = normal_quantile(m.cdf_at(x_raw(i, j)));
    }
    model.marginals.push_back(std::move(m));
  }

  // Sample correlation of the latents.
  const Eigen::RowVectorXd mu = model.latents.colwise().mean();
  const Eigen::MatrixXd centered = model.latents.rowwise() - mu;
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::VectorXd sd = cov.diagonal().array().sqrt();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(sd(j) > 0.0)) sd(j) = 1.0;
  }
  model.R = cov.array() / (sd * sd.transpose()).array();
  model.R.diagonal().setOnes();

  // Jitter to positive definiteness, then restore the unit diagonal.
  double jitter = 1e-8;
  for (int attempt = 0; attempt <= 10; ++attempt) {
    model.llt.compute(model.R);
    if (model.llt.info() == Eigen::Success) break;
    if (attempt == 10) {
      throw std::runtime_error("fit_copula: correlation matrix not PD after maximum jitter");
    }
    Eigen::MatrixXd jittered = model.R;
    jittered.diagonal().array() += jitter;
    const Eigen::VectorXd dg = jittered.diagonal().array().sqrt();
    model.R = jittered.array() / (dg * dg.transpose()).array();
    model.R.diagonal().setOnes();
    jitter *= 2.0;
    ++model.jitter_attempts;
  }

  std::vector<double> dm(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    dm[static_cast<std::size_t>(i)] = model.mahalanobis(model.latents.row(i).transpose());
  }
  std::sort(dm.begin(), dm.end());
  std::size_t idx = static_cast<std::size_t>(
      std::ceil((1.0 - q) * static_cast<double>(n)));
  if (idx < 1) idx = 1;
  if (idx > dm.size()) idx = dm.size();
  model.tau = dm[idx - 1];
  return model;
}

double warp_map(double u, double gamma) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double a = std::pow(u, gamma);
  const double b = std::pow(1.0 - u, gamma);
  return a / (a + b);
}

double clamp_unit_open(double u) {
  constexpr double lo = 1e-300;
  constexpr double hi = 1.0 - 0x1p-53;  // largest double below 1
  return u < lo ? lo : (u > hi ? hi : u);
}

namespace {

// z ~ N(0, R) through the model's Cholesky factor.
Eigen::VectorXd sample_latent(const CopulaModel& model, Rng& rng) {
  Eigen::VectorXd xi(model.d());
  for (Eigen::Index j = 0; j < model.d(); ++j) xi(j) = rng.normal();
  return model.llt.matrixL() * xi;
}

AnomalyBatch make_batch(const CopulaModel& model, int m, const std::string& mode,
                        std::uint64_t seed) {
  AnomalyBatch batch;
  batch.mode = mode;
  batch.seed = seed;
  batch.points.resize(m, model.d());
  batch.latent_u.resize(m, model.d());
  batch.labels.assign(static_cast<std::size_t>(m), 1);
  return batch;
}

}  // namespace

AnomalyBatch gen_warp(const CopulaModel& model, int m, double gamma, std::uint64_t seed) {
  if (!(gamma > 1.0)) throw std::invalid_argument("gen_warp: gamma must be > 1");
  if (m < 0) throw std::invalid_argument("gen_warp: negative count");
  AnomalyBatch batch = make_batch(model, m, "warp", seed);
  batch.gamma = gamma;
  batch.q = model.q;
  Rng rng(derive_seed(seed, 0x77617270ULL));
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd z = sample_latent(model, rng);
    Eigen::VectorXd zstar(model.d());
    for (Eigen::Index j = 0; j < model.d(); ++j) {
      const double u = normal_cdf(z(j));
      const double ustar = clamp_unit_open(warp_map(u, gamma));
      batch.latent_u(i, j) = ustar;
      batch.points(i, j) = model.marginals[static_cast<std::size_t>(j)].quantile(ustar);
      zstar(j) = normal_quantile(ustar);
    }
    batch.labels[static_cast<std::size_t>(i)] = model.mahalanobis(zstar) > model.tau ? 1 : 0;
  }
  return batch;
}

AnomalyBatch gen_joint(const CopulaModel& model, int m, double q, std::uint64_t seed) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("gen_joint: q must be in (0,1)");
  if (m < 0) throw std::invalid_argument("gen_joint: negative count");
  AnomalyBatch batch = make_batch(model, m, "joint", seed);
  batch.q = q;
  Rng rng(derive_seed(seed, 0x6a6f696eULL));
  const int dof = static_cast<int>(model.d());
  const std::size_t n = static_cast<std::size_t>(model.latents.rows());
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd z_base =
        model.latents.row(static_cast<Eigen::Index>(rng.bounded(n))).transpose();
    Eigen::VectorXd dir(model.d());
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < model.d(); ++j) dir(j) = rng.normal();
      norm = dir.norm();
    } while (!(norm > 0.0));
    dir /= norm;
    // chi-squared truncated to [chi2(1-q), inf): invert at 1-q + q*U
    const double p = (1.0 - q) + q * rng.uniform01();
    const double r = std::sqrt(chi2_quantile(p, dof));
    const Eigen::VectorXd zstar = z_base + r * dir;
    for (Eigen::Index j = 0; j < model.d(); ++j) {
      const double u = clamp_unit_open(normal_cdf(zstar(j)));
      batch.latent_u(i, j) = u;
      batch.points(i, j) = model.marginals[static_cast<std::size_t>(j)].quantile(u);
    }
  }
  return batch;
}

AnomalyBatch gen_support(const CopulaModel& model, int m, double q, std::uint64_t seed) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("gen_support: q must be in (0,1)");
  if (m < 0) throw std::invalid_argument("gen_support: negative count");
  AnomalyBatch batch = make_batch(model, m, "support", seed);
  batch.q = q;
  Rng rng(derive_seed(seed, 0x73757070ULL));
  const int dof = static_cast<int>(model.d());
  const std::size_t n = static_cast<std::size_t>(model.latents.rows());
  for (int i = 0; i < m; ++i) {
    Eigen::VectorXd z_base;
    double r_base = 0.0;
    do {
      z_base = model.latents.row(static_cast<Eigen::Index>(rng.bounded(n))).transpose();
      r_base = model.mahalanobis(z_base);
    } while (!(r_base > 0.0));
    // Target radius drawn directly from the upper-q chi-squared tail. The
    // resulting factor r*/r_b is large, which is what pushes coordinates
    // past the marginal knots and into the extrapolating inverse.
    const double p = (1.0 - q) + q * rng.uniform01();
    const double r_star = chi2_quantile(p, dof);
    const Eigen::VectorXd zstar = z_base * (r_star / r_base);
    for (Eigen::Index j = 0; j < model.d(); ++j) {
      const double u = clamp_unit_open(normal_cdf(zstar(j)));
      batch.latent_u(i, j) = u;
      batch.points(i, j) =
          model.marginals[static_cast<std::size_t>(j)].quantile_extrapolating(u);
    }
  }
  return batch;
}

std::vector<std::uint8_t> recompute_warp_labels(const CopulaModel& model,
                                                const Eigen::MatrixXd& latent_u) {
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(latent_u.rows()));
  for (Eigen::Index i = 0; i < latent_u.rows(); ++i) {
    Eigen::VectorXd z(latent_u.cols());
    for (Eigen::Index j = 0; j < latent_u.cols(); ++j) {
      z(j) = normal_quantile(clamp_unit_open(latent_u(i, j)));
    }
    labels[static_cast<std::size_t>(i)] = model.mahalanobis(z) > model.tau ? 1 : 0;
  }
  return labels;
}

void write_anomaly_csv(const AnomalyBatch& batch, const std::vector<std::string>& feature_names,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  for (Eigen::Index j = 0; j < batch.points.cols(); ++j) {
    const std::string name = static_cast<std::size_t>(j) < feature_names.size()
                                 ? feature_names[static_cast<std::size_t>(j)]
                                 : ("x" + std::to_string(j + 1));
    out << name << ',';
  }
  out << "mode,label,seed\n";
  char buf[40];
  for (Eigen::Index i = 0; i < batch.points.rows(); ++i) {
    for (Eigen::Index j = 0; j < batch.points.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", batch.points(i, j));
      out << buf << ',';
    }
    out << batch.mode << ',' << int(batch.labels[static_cast<std::size_t>(i)]) << ','
        << batch.seed << '\n';
  }
}

void write_anomaly_sidecar(const AnomalyBatch& batch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\n  \"mode\": \"%s\",\n  \"count\": %lld,\n  \"gamma\": %.17g,\n"
                "  \"q\": %.17g,\n  \"magnitude\": %.17g,\n  \"seed\": %llu,\n"
                "  \"tail_convention\": \"upper tail mass q\"\n}\n",
                batch.mode.c_str(), static_cast<long long>(batch.points.rows()), batch.gamma,
                batch.q, batch.magnitude, static_cast<unsigned long long>(batch.seed));
  out << buf;
}

}  // namespace outpro
