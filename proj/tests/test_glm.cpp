#include <cmath>
#include <vector>

#include "causalcmp/errors.hpp"
#include "causalcmp/glm.hpp"
#include "doctest.h"

using namespace causalcmp;

namespace {

DesignSpec ols_fixture() {
  DesignSpec s;
  s.link = Link::identity;
  s.response.resize(5);
  s.response << 2.1, 3.9, 6.2, 8.1, 9.8;
  s.predictors.resize(5, 2);
  s.predictors << 1, 1, 1, 2, 1, 3, 1, 4, 1, 5;
  s.names = {"(Intercept)", "x"};
  return s;
}

// 20-row logistic fixture with a single continuous predictor
DesignSpec logit_fixture() {
  const std::vector<double> x = {-1.9, -1.5, -1.2, -0.8, -0.6, -0.4, -0.3,
                                 -0.1, 0.1,  0.2,  0.4,  0.5,  0.7,  0.9,
                                 1.1,  1.3,  1.6,  1.8,  2.0,  2.3};
  const std::vector<double> y = {0, 0, 0, 0, 1, 0, 0, 1, 0, 1,
                                 0, 1, 1, 0, 1, 1, 1, 1, 1, 1};
  DesignSpec s;
  s.link = Link::logit;
  s.response = Eigen::Map<const Eigen::VectorXd>(y.data(), 20);
  s.predictors.resize(20, 2);
  s.predictors.col(0).setOnes();
  s.predictors.col(1) = Eigen::Map<const Eigen::VectorXd>(x.data(), 20);
  s.names = {"(Intercept)", "x"};
  return s;
}

// 20-row logistic fixture with a binary treatment and one covariate
DesignSpec treatment_fixture() {
  const std::vector<double> t = {0, 1, 0, 1, 1, 0, 1, 0, 1, 1,
                                 0, 0, 1, 0, 1, 0, 1, 1, 0, 1};
  const std::vector<double> w = {0.5, -0.2, 1.1, 0.3,  -0.8, 0.0, 0.9,
                                 -1.2, 0.4, 1.5, -0.5, 0.7,  -0.3, 0.2,
                                 1.0,  -0.9, 0.6, -0.1, 0.8,  -0.6};
  const std::vector<double> y = {0, 1, 0, 1, 0, 0, 1, 0, 1, 1,
                                 0, 1, 1, 0, 1, 0, 0, 1, 0, 1};
  DesignSpec s;
  s.link = Link::logit;
  s.response = Eigen::Map<const Eigen::VectorXd>(y.data(), 20);
  s.predictors.resize(20, 3);
  s.predictors.col(0).setOnes();
  s.predictors.col(1) = Eigen::Map<const Eigen::VectorXd>(t.data(), 20);
  s.predictors.col(2) = Eigen::Map<const Eigen::VectorXd>(w.data(), 20);
  s.names = {"(Intercept)", "t", "w"};
  return s;
}

double log_likelihood(const DesignSpec& s, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = s.predictors * beta;
  double ll = 0;
  for (Eigen::Index i = 0; i < s.n(); ++i) {
    const double mu = sigmoid(eta[i]);
    ll += s.response[i] * std::log(mu) + (1.0 - s.response[i]) * std::log(1.0 - mu);
  }
  return ll;
}

}  // namespace

TEST_CASE("OLS matches the normal-equation solution") {
  const GlmFit fit = fit_ols(ols_fixture());
  // solved independently from the normal equations on the same numbers
  CHECK(fit.coef("(Intercept)") == doctest::Approx(0.14).epsilon(1e-10));
  CHECK(fit.coef("x") == doctest::Approx(1.96).epsilon(1e-10));
  CHECK(fit.covariance(0, 0) == doctest::Approx(0.033733333333).epsilon(1e-8));
  CHECK(fit.covariance(0, 1) == doctest::Approx(-0.0092).epsilon(1e-8));
  CHECK(fit.covariance(1, 1) == doctest::Approx(0.003066666667).epsilon(1e-8));
  CHECK(fit.robust_covariance(0, 0) == doctest::Approx(0.010976).epsilon(1e-8));
  CHECK(fit.robust_covariance(1, 1) == doctest::Approx(0.001184).epsilon(1e-8));
  CHECK(fit.robust_covariance(0, 1) == doctest::Approx(-0.002992).epsilon(1e-8));
}

TEST_CASE("logistic IRLS matches an independent Newton solution") {
  const DesignSpec s = logit_fixture();
  const GlmFit fit = fit_logistic(s);
  CHECK(fit.converged);
  CHECK(fit.coef("(Intercept)") == doctest::Approx(-0.215052915111).epsilon(1e-6));
  CHECK(fit.coef("x") == doctest::Approx(1.831861703615).epsilon(1e-6));
  CHECK(fit.covariance(0, 0) == doctest::Approx(0.382435367848).epsilon(1e-6));
  CHECK(fit.covariance(1, 1) == doctest::Approx(0.651347584861).epsilon(1e-6));
}

TEST_CASE("logistic solution beats every point of a coefficient grid") {
  const DesignSpec s = logit_fixture();
  const GlmFit fit = fit_logistic(s);
  const double ll_hat = log_likelihood(s, fit.coefficients);
  CHECK(ll_hat == doctest::Approx(-8.553990427671).epsilon(1e-8));
  double best = -1e300;
  Eigen::VectorXd best_b(2), b(2);
  for (double b0 = -2.0; b0 <= 2.0; b0 += 0.05) {
    for (double b1 = -1.0; b1 <= 4.0; b1 += 0.05) {
      b << b0, b1;
      const double ll = log_likelihood(s, b);
      if (ll > best) {
        best = ll;
        best_b = b;
      }
    }
  }
  CHECK(ll_hat >= best);
  CHECK(std::abs(fit.coefficients[0] - best_b[0]) < 0.05);
  CHECK(std::abs(fit.coefficients[1] - best_b[1]) < 0.05);
}

TEST_CASE("logistic covariance agrees with a finite-difference Hessian") {
  const DesignSpec s = logit_fixture();
  const GlmFit fit = fit_logistic(s);
  const double h = 1e-4;
  Eigen::MatrixXd hess(2, 2);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd bpp = fit.coefficients, bpm = fit.coefficients,
                      bmp = fit.coefficients, bmm = fit.coefficients;
      bpp[i] += h; bpp[j] += h;
      bpm[i] += h; bpm[j] -= h;
      bmp[i] -= h; bmp[j] += h;
      bmm[i] -= h; bmm[j] -= h;
      hess(i, j) = (log_likelihood(s, bpp) - log_likelihood(s, bpm) -
                    log_likelihood(s, bmp) + log_likelihood(s, bmm)) /
                   (4 * h * h);
    }
  }
  const Eigen::MatrixXd cov_fd = (-hess).inverse();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(fit.covariance(i, j) == doctest::Approx(cov_fd(i, j)).epsilon(1e-4));
}

TEST_CASE("AME of a binary treatment matches the frozen reference") {
  const DesignSpec s = treatment_fixture();
  const GlmFit fit = fit_logistic(s);
  CHECK(fit.coef("t") == doctest::Approx(3.903620923129).epsilon(1e-6));
  const AmeResult classical = average_marginal_effect(fit, s, "t");
  CHECK(classical.estimate == doctest::Approx(0.680620796115).epsilon(1e-7));
  CHECK(classical.se == doctest::Approx(0.159206571950).epsilon(1e-6));
  const AmeResult robust = average_marginal_effect(fit, s, "t", /*robust=*/true);
  CHECK(robust.estimate == doctest::Approx(classical.estimate).epsilon(1e-12));
  CHECK(robust.se == doctest::Approx(0.158004245002).epsilon(1e-6));
}

TEST_CASE("AME under the identity link is the raw coefficient") {
  DesignSpec s = treatment_fixture();
  s.link = Link::identity;
  const GlmFit fit = fit_ols(s);
  const AmeResult ame = average_marginal_effect(fit, s, "t");
  CHECK(ame.estimate == doctest::Approx(fit.coef("t")).epsilon(1e-12));
  CHECK(ame.se == doctest::Approx(fit.se("t")).epsilon(1e-12));
}

TEST_CASE("AME is invariant to rescaling a covariate") {
  DesignSpec s = treatment_fixture();
  const AmeResult base = average_marginal_effect(fit_logistic(s), s, "t");
  s.predictors.col(2) *= 10.0;
  const GlmFit scaled = fit_logistic(s);
  const AmeResult ame = average_marginal_effect(scaled, s, "t");
  CHECK(ame.estimate == doctest::Approx(base.estimate).epsilon(1e-7));
  CHECK(ame.se == doctest::Approx(base.se).epsilon(1e-6));
}

TEST_CASE("interaction AME matches the frozen double-difference reference") {
  std::vector<double> a = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  std::vector<double> bb = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  std::vector<double> w = {0.5, -0.2, 1.1, 0.3,  -0.8, 0.0, 0.9, -1.2, 0.4, 1.5,
                           -0.5, 0.7, -0.3, 0.2, 1.0,  -0.9, 0.6, -0.1, 0.8, -0.6};
  std::vector<double> y = {0, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0, 1, 0, 0, 1, 1, 1, 1, 0, 1};
  DesignSpec s;
  s.link = Link::logit;
  s.response = Eigen::Map<const Eigen::VectorXd>(y.data(), 20);
  s.predictors.resize(20, 5);
  s.predictors.col(0).setOnes();
  s.predictors.col(1) = Eigen::Map<const Eigen::VectorXd>(a.data(), 20);
  s.predictors.col(2) = Eigen::Map<const Eigen::VectorXd>(bb.data(), 20);
  s.predictors.col(3) =
      (s.predictors.col(1).array() * s.predictors.col(2).array()).matrix();
  s.predictors.col(4) = Eigen::Map<const Eigen::VectorXd>(w.data(), 20);
  s.names = {"(Intercept)", "a", "b", "a:b", "w"};
  const GlmFit fit = fit_logistic(s);
  const AmeResult dd = interaction_ame(fit, s, "a", "b");
  CHECK(dd.estimate == doctest::Approx(0.024995774596).epsilon(1e-7));
  CHECK(dd.se == doctest::Approx(0.398508376122).epsilon(1e-6));

  s.link = Link::identity;
  const GlmFit lin = fit_ols(s);
  const AmeResult lin_dd = interaction_ame(lin, s, "a", "b");
  CHECK(lin_dd.estimate == doctest::Approx(lin.coef("a:b")).epsilon(1e-12));
}

TEST_CASE("error paths") {
  SUBCASE("rank deficiency is rejected") {
    DesignSpec s = ols_fixture();
    DesignSpec dup = s;
    dup.predictors.conservativeResize(Eigen::NoChange, 3);
    dup.predictors.col(2) = dup.predictors.col(1);
    dup.names.push_back("x_copy");
    CHECK_THROWS_AS(fit_ols(dup), RankDeficientError);
  }
  SUBCASE("logit response must be binary") {
    DesignSpec s = logit_fixture();
    s.response[3] = 0.5;
    CHECK_THROWS_AS(fit_logistic(s), BadValueError);
  }
  SUBCASE("perfect separation is detected") {
    DesignSpec s = logit_fixture();
    for (Eigen::Index i = 0; i < s.n(); ++i)
      s.response[i] = s.predictors(i, 1) > 0 ? 1.0 : 0.0;
    CHECK_THROWS_AS(fit_logistic(s), SeparationError);
  }
  SUBCASE("unknown term name") {
    const GlmFit fit = fit_ols(ols_fixture());
    CHECK_THROWS_AS(fit.coef("nope"), UnknownTermError);
  }
  SUBCASE("dimension mismatch") {
    DesignSpec s = ols_fixture();
    s.response.conservativeResize(4);
    CHECK_THROWS_AS(s.validate(), DimensionMismatchError);
  }
}
