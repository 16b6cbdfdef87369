#pragma once

// Special functions and distribution tails used by the test battery.
// Everything is plain double arithmetic on top of <cmath>.

namespace neurocat::dist {

// Regularized lower/upper incomplete gamma P(a, x), Q(a, x) = 1 - P(a, x).
// Series for x < a + 1, Lentz continued fraction otherwise.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

double normal_cdf(double z);
double normal_sf(double z);  // 1 - cdf, computed without cancellation
// Inverse of normal_cdf on (0, 1). Acklam's rational approximation polished
// by one Halley step; relative error near machine precision.
double normal_quantile(double p);

double chi2_cdf(double x, double df);
double chi2_sf(double x, double df);

// Upper tail of the F(d1, d2) distribution.
double f_sf(double x, double d1, double d2);

}  // namespace neurocat::dist
