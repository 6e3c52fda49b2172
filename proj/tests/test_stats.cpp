#include <cmath>
#include <initializer_list>

#include "causalcmp/stats.hpp"
#include "doctest.h"

using namespace causalcmp;

TEST_CASE("chi-square quantiles match published critical values") {
  CHECK(chi2_quantile(1, 0.95) == doctest::Approx(3.841).epsilon(1e-3));
  CHECK(chi2_quantile(2, 0.95) == doctest::Approx(5.991).epsilon(1e-3));
  CHECK(chi2_quantile(3, 0.95) == doctest::Approx(7.815).epsilon(1e-3));
  CHECK(chi2_quantile(4, 0.95) == doctest::Approx(9.488).epsilon(1e-3));
  CHECK(chi2_quantile(1, 0.99) == doctest::Approx(6.635).epsilon(1e-3));
}

TEST_CASE("chi-square df=2 survival has a closed form") {
  // sf(x; 2) = exp(-x/2)
  for (double x : {0.1, 0.5, 1.0, 2.5, 7.0, 15.0})
    CHECK(chi2_sf(2, x) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-10));
}

TEST_CASE("chi-square df=1 relates to the normal distribution") {
  // P(chi2_1 > x) = 2 * (1 - Phi(sqrt(x)))
  for (double x : {0.5, 1.0, 3.841, 9.0})
    CHECK(chi2_sf(1, x) ==
          doctest::Approx(2.0 * (1.0 - normal_cdf(std::sqrt(x)))).epsilon(1e-9));
}

TEST_CASE("cdf and sf are complementary and quantile inverts cdf") {
  for (int df : {1, 2, 3, 5, 10}) {
    for (double x : {0.2, 1.0, 4.0, 12.0}) {
      CHECK(chi2_cdf(df, x) + chi2_sf(df, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
    for (double p : {0.05, 0.5, 0.9, 0.95, 0.999}) {
      const double q = chi2_quantile(df, p);
      CHECK(chi2_cdf(df, q) == doctest::Approx(p).epsilon(1e-9));
    }
  }
}

TEST_CASE("normal cdf reference points") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
  CHECK(normal_cdf(-1.0) == doctest::Approx(0.158655).epsilon(1e-5));
}

TEST_CASE("two sided p-value") {
  CHECK(two_sided_p(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(two_sided_p(1.959964, 1.0) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(two_sided_p(-1.959964, 1.0) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(two_sided_p(3.919928, 2.0) == doctest::Approx(0.05).epsilon(1e-4));
}
