#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "outpro/rng.hpp"
#include "outpro/special_math.hpp"

using namespace outpro;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("normal cdf and quantile agree on known values", "[math]") {
  CHECK_THAT(normal_cdf(0.0), WithinAbs(0.5, 1e-15));
  CHECK_THAT(normal_cdf(1.959963984540054), WithinAbs(0.975, 1e-12));
  CHECK_THAT(normal_quantile(0.5), WithinAbs(0.0, 1e-12));
  CHECK_THAT(normal_quantile(0.975), WithinAbs(1.959963984540054, 1e-10));
  CHECK_THAT(normal_quantile(0.0013498980316300933), WithinAbs(-3.0, 1e-9));
}

TEST_CASE("normal quantile round-trips through the cdf", "[math]") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double p = rng.uniform(1e-12, 1.0 - 1e-12);
    CHECK_THAT(normal_cdf(normal_quantile(p)), WithinAbs(p, 1e-12));
  }
  // deep tails stay finite and monotone
  CHECK(normal_quantile(1e-300) < normal_quantile(1e-200));
  CHECK(std::isfinite(normal_quantile(1e-300)));
}

TEST_CASE("chi2 quantile matches closed forms", "[math]") {
  // dof=2 is exponential with mean 2: median = 2 ln 2
  CHECK_THAT(chi2_quantile(0.5, 2), WithinAbs(2.0 * std::log(2.0), 1e-10));
  CHECK_THAT(chi2_quantile(0.95, 10), WithinAbs(18.307038053275146, 1e-6));
  CHECK_THAT(chi2_cdf(1.386294361119890618, 2), WithinAbs(0.5, 1e-12));
}

TEST_CASE("chi2 quantile round-trips |cdf(Q(p)) - p| <= 1e-10", "[math]") {
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    const double p = rng.uniform(0.001, 0.999);
    const int dof = 1 + static_cast<int>(rng.bounded(200));
    const double x = chi2_quantile(p, dof);
    REQUIRE_THAT(chi2_cdf(x, dof), WithinAbs(p, 1e-10));
  }
}

TEST_CASE("chi2 quantile is monotone in p", "[math]") {
  for (int dof : {1, 3, 10, 50}) {
    double prev = 0.0;
    for (double p = 0.01; p < 1.0; p += 0.01) {
      const double x = chi2_quantile(p, dof);
      CHECK(x > prev);
      prev = x;
    }
  }
}

TEST_CASE("chi2 quantile rejects invalid arguments", "[math]") {
  CHECK_THROWS(chi2_quantile(0.0, 3));
  CHECK_THROWS(chi2_quantile(1.0, 3));
  CHECK_THROWS(chi2_quantile(0.5, 0));
  CHECK_THROWS(normal_quantile(0.0));
}
