#include "causalcmp/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace causalcmp {

namespace {

// Series expansion for P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x), valid for x >= a + 1 (Lentz's method).
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chi2_sf(int df, double x) {
  if (df < 1) throw std::invalid_argument("chi2_sf: df must be >= 1");
  if (x <= 0.0) return 1.0;
  const double a = 0.5 * df;
  const double h = 0.5 * x;
  if (h < a + 1.0) return 1.0 - gamma_p_series(a, h);
  return gamma_q_cf(a, h);
}

double chi2_cdf(int df, double x) { return 1.0 - chi2_sf(df, x); }

double chi2_quantile(int df, double level) {
  if (df < 1) throw std::invalid_argument("chi2_quantile: df must be >= 1");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("chi2_quantile: level must be in (0,1)");
  const double target = 1.0 - level;  // sf(q) == target
  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(df));
  while (chi2_sf(df, hi) > target) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_sf(df, mid) > target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double two_sided_p(double estimate, double se) {
  if (se <= 0.0) return estimate == 0.0 ? 1.0 : 0.0;
  return 2.0 * normal_cdf(-std::fabs(estimate / se));
}

}  // namespace causalcmp
