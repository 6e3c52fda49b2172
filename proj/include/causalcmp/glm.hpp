#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace causalcmp {

enum class Link { identity, logit };

/// Response plus a named predictor matrix. The intercept is an explicit
/// column ("(Intercept)" by convention); nothing is added implicitly.
struct DesignSpec {
  Eigen::VectorXd response;
  Eigen::MatrixXd predictors;
  std::vector<std::string> names;
  Link link = Link::identity;

  Eigen::Index n() const { return predictors.rows(); }
  Eigen::Index p() const { return predictors.cols(); }
  Eigen::Index term_index(const std::string& name) const;  // throws UnknownTermError
  void validate() const;
};

struct GlmFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;         // inverse observed information
  Eigen::MatrixXd robust_covariance;  // HC0 sandwich
  std::vector<std::string> names;
  Link link = Link::identity;
  Eigen::Index n_obs = 0;
  bool converged = false;
  int iterations = 0;

  Eigen::Index term_index(const std::string& name) const;
  double coef(const std::string& name) const;
  double se(const std::string& name) const;
  /// Mean response for each row of X under the fitted link.
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

struct AmeResult {
  double estimate = 0.0;
  double se = 0.0;
  std::string target_term;
};

struct IrlsOptions {
  int max_iter = 50;
  double tol = 1e-8;
  double separation_bound = 30.0;  // |coef| beyond this flags separation
};

GlmFit fit_ols(const DesignSpec& spec);
GlmFit fit_logistic(const DesignSpec& spec, const IrlsOptions& opts = {});
GlmFit fit_glm(const DesignSpec& spec, const IrlsOptions& opts = {});

/// Counterfactual risk difference for toggling `target_term` 0 -> 1,
/// averaged over rows of `data`; delta-method SE (sandwich covariance when
/// `robust`).
AmeResult average_marginal_effect(const GlmFit& fit, const DesignSpec& data,
                                  const std::string& target_term, bool robust = false);

/// Double difference of average predicted outcomes over the 2x2 toggle of
/// (term_a, term_b), holding each row's other covariates fixed. Requires a
/// product column named "a:b" (or "b:a") in the design.
AmeResult interaction_ame(const GlmFit& fit, const DesignSpec& data,
                          const std::string& term_a, const std::string& term_b);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace causalcmp
