#pragma once

namespace outpro {

// Standard normal CDF.
double normal_cdf(double z);

// Standard normal quantile. Bracketing plus Newton refinement on
// normal_cdf; accurate to ~1e-14 over p in (1e-300, 1-1e-16).
double normal_quantile(double p);

// Regularized lower incomplete gamma P(a, x): series expansion for
// x < a+1, continued fraction (modified Lentz) otherwise.
double gamma_p(double a, double x);

// Chi-squared CDF with dof degrees of freedom.
double chi2_cdf(double x, int dof);

// Chi-squared quantile: numerical inversion of chi2_cdf by bracketing and
// bisection/Newton. Guarantees |chi2_cdf(result, dof) - p| <= 1e-10.
double chi2_quantile(double p, int dof);

}  // namespace outpro
