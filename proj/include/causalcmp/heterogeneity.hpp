#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "causalcmp/estimators.hpp"

namespace causalcmp {

/// One shared patient resample per replicate, every method evaluated on it;
/// the shared resample is what induces the cross-method correlation.
struct BootstrapEnsemble {
  std::vector<Method> methods;
  Eigen::MatrixXd replicates;      // used_B x |e|
  Eigen::VectorXd point_estimates; // from the full data
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd correlation;
  int requested_B = 0;
  int failed_replicates = 0;
};

BootstrapEnsemble bootstrap_ensemble(const Cohort& cohort, const std::vector<Method>& methods,
                                     int B, std::uint64_t seed,
                                     const EstimatorOptions& options = {});

/// Inverse-variance weighted average.
double ivw_pool(const Eigen::VectorXd& estimates, const Eigen::VectorXd& variances);

struct QTestResult {
  double q = 0.0;
  int df = 0;
  double critical_value = 0.0;
  double p_value = 1.0;
  bool similar = true;
  double ivw_pooled = 0.0;
  bool used_pseudo_inverse = false;
};

/// Generalized heterogeneity statistic q = d' Sigma^-1 d with
/// d = estimates - ivw * 1; chi-square test on |e|-1 df.
QTestResult q_statistic_from(const Eigen::VectorXd& point_estimates,
                             const Eigen::MatrixXd& covariance, double alpha = 0.05);
QTestResult q_statistic(const BootstrapEnsemble& ensemble, double alpha = 0.05);

struct PairwiseRateRow {
  std::vector<Method> set;
  double reject_rate = 0.0;  // fraction of runs with q > critical
  double retain_rate = 0.0;
  int n_runs = 0;
};

}  // namespace causalcmp
