#include "causalcmp/glm.hpp"

#include <algorithm>
#include <cmath>

#include "causalcmp/errors.hpp"

namespace causalcmp {

namespace {

constexpr double kRankThreshold = 1e-10;

void check_full_rank(const Eigen::MatrixXd& X) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < X.cols())
    throw RankDeficientError("predictor matrix is rank deficient (rank " +
                             std::to_string(qr.rank()) + " of " +
                             std::to_string(X.cols()) + ")");
}

Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& A, const char* what) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success)
    throw RankDeficientError(std::string(what) + ": information matrix not invertible");
  return ldlt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
}

// HC0 sandwich: bread * (sum of r_i^2 x_i x_i') * bread
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& resid) {
  Eigen::MatrixXd meat =
      X.transpose() * resid.array().square().matrix().asDiagonal() * X;
  return bread * meat * bread;
}

}  // namespace

Eigen::Index DesignSpec::term_index(const std::string& name) const {
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(names.size()); ++j)
    if (names[static_cast<std::size_t>(j)] == name) return j;
  throw UnknownTermError("unknown term '" + name + "'");
}

void DesignSpec::validate() const {
  if (predictors.rows() != response.size())
    throw DimensionMismatchError("response length " + std::to_string(response.size()) +
                                 " != predictor rows " + std::to_string(predictors.rows()));
  if (static_cast<Eigen::Index>(names.size()) != predictors.cols())
    throw DimensionMismatchError("name count does not match predictor columns");
  if (n() < p() + 1)
    throw DimensionMismatchError("need at least p+1 observations");
  if (link == Link::logit) {
    for (Eigen::Index i = 0; i < response.size(); ++i)
      if (response[i] != 0.0 && response[i] != 1.0)
        throw BadValueError(static_cast<std::size_t>(i), "response",
                            "logit response must be 0 or 1");
  }
}

Eigen::Index GlmFit::term_index(const std::string& name) const {
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(names.size()); ++j)
    if (names[static_cast<std::size_t>(j)] == name) return j;
  throw UnknownTermError("unknown term '" + name + "'");
}

double GlmFit::coef(const std::string& name) const { return coefficients[term_index(name)]; }

double GlmFit::se(const std::string& name) const {
  const Eigen::Index j = term_index(name);
  return std::sqrt(std::max(0.0, covariance(j, j)));
}

Eigen::VectorXd GlmFit::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd eta = X * coefficients;
  if (link == Link::identity) return eta;
  return eta.unaryExpr([](double e) { return sigmoid(e); });
}

GlmFit fit_ols(const DesignSpec& spec) {
  spec.validate();
  if (spec.link != Link::identity)
    throw DimensionMismatchError("fit_ols requires identity link");
  const auto& X = spec.predictors;
  const auto& y = spec.response;
  check_full_rank(X);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta;
  const double rss = resid.squaredNorm();
  const double dof = static_cast<double>(spec.n() - spec.p());
  const double sigma2 = rss / dof;

  GlmFit fit;
  fit.coefficients = beta;
  const Eigen::MatrixXd xtx_inv = invert_spd(X.transpose() * X, "fit_ols");
  fit.covariance = sigma2 * xtx_inv;
  fit.robust_covariance = sandwich(xtx_inv, X, resid);
  fit.names = spec.names;
  fit.link = Link::identity;
  fit.n_obs = spec.n();
  fit.converged = true;
  fit.iterations = 1;
  return fit;
}

GlmFit fit_logistic(const DesignSpec& spec, const IrlsOptions& opts) {
  spec.validate();
  if (spec.link != Link::logit)
    throw DimensionMismatchError("fit_logistic requires logit link");
  const auto& X = spec.predictors;
  const auto& y = spec.response;
  check_full_rank(X);

  const Eigen::Index p = spec.p();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(spec.n());
  int iter = 0;
  bool converged = false;
  Eigen::MatrixXd info(p, p);

  for (; iter < opts.max_iter; ++iter) {
    Eigen::VectorXd mu = eta.unaryExpr([](double e) { return sigmoid(e); });
    Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
    w = w.cwiseMax(1e-10);
    // working response: z = eta + (y - mu)/w
    Eigen::VectorXd wz = (eta.array() * w.array() + (y - mu).array()).matrix();
    info.noalias() = X.transpose() * w.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success)
      throw RankDeficientError("fit_logistic: weighted information not invertible");
    Eigen::VectorXd beta_new = ldlt.solve(X.transpose() * wz);

    if (beta_new.cwiseAbs().maxCoeff() > opts.separation_bound)
      throw SeparationError(
          "fit_logistic: coefficient exceeded " + std::to_string(opts.separation_bound) +
          "; data appear separated");

    const double delta = (beta_new - beta).cwiseAbs().maxCoeff();
    beta = beta_new;
    eta.noalias() = X * beta;
    if (delta < opts.tol) {
      converged = true;
      ++iter;
      break;
    }
  }
  if (!converged)
    throw NotConvergedError("fit_logistic: IRLS did not converge in " +
                            std::to_string(opts.max_iter) + " iterations");

  // Fisher information at the optimum
  Eigen::VectorXd mu = eta.unaryExpr([](double e) { return sigmoid(e); });
  Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).cwiseMax(1e-10);
  info.noalias() = X.transpose() * w.asDiagonal() * X;

  GlmFit fit;
  fit.coefficients = beta;
  fit.covariance = invert_spd(info, "fit_logistic");
  fit.robust_covariance = sandwich(fit.covariance, X, y - mu);
  fit.names = spec.names;
  fit.link = Link::logit;
  fit.n_obs = spec.n();
  fit.converged = true;
  fit.iterations = iter;
  return fit;
}

GlmFit fit_glm(const DesignSpec& spec, const IrlsOptions& opts) {
  return spec.link == Link::identity ? fit_ols(spec) : fit_logistic(spec, opts);
}

AmeResult average_marginal_effect(const GlmFit& fit, const DesignSpec& data,
                                  const std::string& target_term, bool robust) {
  const Eigen::Index j = fit.term_index(target_term);
  const Eigen::MatrixXd& cov = robust ? fit.robust_covariance : fit.covariance;
  AmeResult out;
  out.target_term = target_term;

  if (fit.link == Link::identity) {
    out.estimate = fit.coefficients[j];
    out.se = std::sqrt(std::max(0.0, cov(j, j)));
    return out;
  }

  Eigen::MatrixXd X1 = data.predictors;
  Eigen::MatrixXd X0 = data.predictors;
  X1.col(j).setOnes();
  X0.col(j).setZero();
  const Eigen::VectorXd eta1 = X1 * fit.coefficients;
  const Eigen::VectorXd eta0 = X0 * fit.coefficients;
  const Eigen::Index n = data.n();

  double sum = 0.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(fit.coefficients.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p1 = sigmoid(eta1[i]);
    const double p0 = sigmoid(eta0[i]);
    sum += p1 - p0;
    grad.noalias() += p1 * (1.0 - p1) * X1.row(i).transpose();
    grad.noalias() -= p0 * (1.0 - p0) * X0.row(i).transpose();
  }
  out.estimate = sum / static_cast<double>(n);
  grad /= static_cast<double>(n);
  out.se = std::sqrt(std::max(0.0, double(grad.transpose() * cov * grad)));
  return out;
}

AmeResult interaction_ame(const GlmFit& fit, const DesignSpec& data,
                          const std::string& term_a, const std::string& term_b) {
  const Eigen::Index ja = fit.term_index(term_a);
  const Eigen::Index jb = fit.term_index(term_b);
  Eigen::Index jab = -1;
  const std::string ab = term_a + ":" + term_b;
  const std::string ba = term_b + ":" + term_a;
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(fit.names.size()); ++j) {
    const auto& nm = fit.names[static_cast<std::size_t>(j)];
    if (nm == ab || nm == ba) jab = j;
  }
  if (jab < 0)
    throw MissingInteractionColumnError("no product column '" + ab + "' in fit");

  AmeResult out;
  out.target_term = ab;

  if (fit.link == Link::identity) {
    out.estimate = fit.coefficients[jab];
    out.se = std::sqrt(std::max(0.0, fit.covariance(jab, jab)));
    return out;
  }

  const Eigen::Index n = data.n();
  auto toggled = [&](double a, double b) {
    Eigen::MatrixXd X = data.predictors;
    X.col(ja).setConstant(a);
    X.col(jb).setConstant(b);
    X.col(jab).setConstant(a * b);
    return X;
  };
  const Eigen::MatrixXd X11 = toggled(1, 1), X01 = toggled(0, 1),
                        X10 = toggled(1, 0), X00 = toggled(0, 0);
  const Eigen::VectorXd e11 = X11 * fit.coefficients, e01 = X01 * fit.coefficients,
                        e10 = X10 * fit.coefficients, e00 = X00 * fit.coefficients;

  double sum = 0.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(fit.coefficients.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p11 = sigmoid(e11[i]), p01 = sigmoid(e01[i]);
    const double p10 = sigmoid(e10[i]), p00 = sigmoid(e00[i]);
    sum += (p11 - p01) - (p10 - p00);
    grad.noalias() += p11 * (1 - p11) * X11.row(i).transpose();
    grad.noalias() -= p01 * (1 - p01) * X01.row(i).transpose();
    grad.noalias() -= p10 * (1 - p10) * X10.row(i).transpose();
    grad.noalias() += p00 * (1 - p00) * X00.row(i).transpose();
  }
  out.estimate = sum / static_cast<double>(n);
  grad /= static_cast<double>(n);
  out.se = std::sqrt(std::max(0.0, double(grad.transpose() * fit.covariance * grad)));
  return out;
}

}  // namespace causalcmp
