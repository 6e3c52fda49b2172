#include "causalcmp/heterogeneity.hpp"

#include <cmath>

#include "causalcmp/errors.hpp"
#include "causalcmp/stats.hpp"

namespace causalcmp {

BootstrapEnsemble bootstrap_ensemble(const Cohort& cohort, const std::vector<Method>& methods,
                                     int B, std::uint64_t seed,
                                     const EstimatorOptions& options) {
  if (B < 2) throw ConfigError("bootstrap_ensemble: B must be >= 2");
  if (methods.empty()) throw ConfigError("bootstrap_ensemble: empty method set");
  cohort.validate();
  const std::size_t k = methods.size();

  BootstrapEnsemble e;
  e.methods = methods;
  e.requested_B = B;
  e.point_estimates.resize(static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j)
    e.point_estimates[static_cast<Eigen::Index>(j)] =
        point_estimate(methods[j], cohort, options);

  std::vector<Eigen::VectorXd> rows;
  rows.reserve(static_cast<std::size_t>(B));
  for (int b = 0; b < B; ++b) {
    const Cohort sub =
        cohort.subset(bootstrap_indices(seed, static_cast<std::uint64_t>(b), cohort.size()));
    Eigen::VectorXd row(static_cast<Eigen::Index>(k));
    bool ok = true;
    for (std::size_t j = 0; j < k && ok; ++j) {
      try {
        row[static_cast<Eigen::Index>(j)] = point_estimate(methods[j], sub, options);
      } catch (const Error&) {
        ok = false;  // one failed fit invalidates the whole replicate row
      }
    }
    if (ok)
      rows.push_back(std::move(row));
    else
      ++e.failed_replicates;
  }
  if (e.failed_replicates > 0.1 * B)
    throw TooManyFailedReplicatesError(std::to_string(e.failed_replicates) + " of " +
                                       std::to_string(B) + " replicates failed");

  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  e.replicates.resize(m, static_cast<Eigen::Index>(k));
  for (Eigen::Index b = 0; b < m; ++b) e.replicates.row(b) = rows[static_cast<std::size_t>(b)];

  const Eigen::RowVectorXd mean = e.replicates.colwise().mean();
  Eigen::MatrixXd centered = e.replicates.rowwise() - mean;
  e.covariance = centered.transpose() * centered / static_cast<double>(m - 1);
  e.correlation = e.covariance;
  for (Eigen::Index i = 0; i < e.covariance.rows(); ++i)
    for (Eigen::Index j = 0; j < e.covariance.cols(); ++j) {
      const double d = std::sqrt(e.covariance(i, i) * e.covariance(j, j));
      e.correlation(i, j) = d > 0 ? e.covariance(i, j) / d : 0.0;
    }
  return e;
}

double ivw_pool(const Eigen::VectorXd& estimates, const Eigen::VectorXd& variances) {
  if (estimates.size() != variances.size())
    throw DimensionMismatchError("ivw_pool: length mismatch");
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 0; j < estimates.size(); ++j) {
    if (variances[j] <= 0.0) throw ZeroVarianceError("ivw_pool: non-positive variance");
    const double w = 1.0 / variances[j];
    num += w * estimates[j];
    den += w;
  }
  return num / den;
}

QTestResult q_statistic_from(const Eigen::VectorXd& point_estimates,
                             const Eigen::MatrixXd& covariance, double alpha) {
  const Eigen::Index k = point_estimates.size();
  if (k < 2) throw ConfigError("q_statistic requires at least two estimates");
  if (covariance.rows() != k || covariance.cols() != k)
    throw DimensionMismatchError("q_statistic: covariance dimension mismatch");

  QTestResult r;
  r.ivw_pooled = ivw_pool(point_estimates, covariance.diagonal());
  const Eigen::VectorXd d =
      point_estimates - Eigen::VectorXd::Constant(k, r.ivw_pooled);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(covariance);
  bool ok = ldlt.info() == Eigen::Success;
  Eigen::VectorXd solved;
  if (ok) {
    solved = ldlt.solve(d);
    // reject solutions from a numerically singular factorization
    ok = (covariance * solved - d).norm() <= 1e-6 * (1.0 + d.norm());
  }
  if (!ok) {
    // pseudo-inverse fallback: drop eigenvalues below 1e-10 * max
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double cutoff = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    Eigen::VectorXd inv_ev = ev;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      inv_ev[i] = ev[i] > cutoff ? 1.0 / ev[i] : 0.0;
    solved = es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose() * d;
    r.used_pseudo_inverse = true;
  }
  r.q = std::max(0.0, d.dot(solved));
  r.df = static_cast<int>(k) - 1;
  r.critical_value = chi2_quantile(r.df, 1.0 - alpha);
  r.p_value = chi2_sf(r.df, r.q);
  r.similar = !(r.q > r.critical_value);
  return r;
}

QTestResult q_statistic(const BootstrapEnsemble& ensemble, double alpha) {
  return q_statistic_from(ensemble.point_estimates, ensemble.covariance, alpha);
}

}  // namespace causalcmp
