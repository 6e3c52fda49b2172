#pragma once

namespace causalcmp {

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Chi-square survival function with df degrees of freedom.
double chi2_sf(int df, double x);

/// Chi-square CDF.
double chi2_cdf(int df, double x);

/// Quantile at `level` (e.g. 0.95), by bracketed root-finding on the
/// survival function.
double chi2_quantile(int df, double level);

/// Standard normal CDF.
double normal_cdf(double x);

/// Two-sided p-value for z = estimate / se.
double two_sided_p(double estimate, double se);

inline constexpr double z_975 = 1.959964;

}  // namespace causalcmp
