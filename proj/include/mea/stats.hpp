#pragma once

namespace mea {

// Standard normal CDF.
double normal_cdf(double x);

// Inverse of the standard normal CDF via the Wichura AS 241 (PPND16)
// rational approximation; absolute error below 1e-8 over (0, 1).
double normal_quantile(double p);

// Two-sided normal p-value for a point estimate with standard error se.
// se == 0 degenerates to 1 when point == 0 and 0 otherwise.
double normal_two_sided_p(double point, double se);

// Regularized lower/upper incomplete gamma P(a, x), Q(a, x) for a > 0,
// x >= 0. Series expansion for x < a + 1, Lentz continued fraction
// otherwise; accurate to ~1e-12 relative for a up to several thousand.
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

// Upper-tail probability of a chi-squared variate: Q(dof/2, chi2/2).
double chi_squared_survival(double chi2, int dof);

}  // namespace mea
