#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causalcmp/cohort.hpp"
#include "causalcmp/matching.hpp"

namespace causalcmp {

enum class Method {
  CaT,
  CaT_with_Z,
  IV_ratio,
  IV_TSLS,
  POA_IV,
  DiD,
  DiD_with_Z,
  PSM_CaT,
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);

/// Point estimate on the risk-difference scale (outcome units when
/// continuous), normal-approximation CI.
struct EstimateResult {
  Method method = Method::CaT;
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  std::size_t n_used = 0;
  std::map<std::string, double> diagnostics;
};

enum class SeMode {
  bootstrap,  // nonparametric, resampling patients
  plugin,     // delta-method / Hessian-based
};

struct EstimatorOptions {
  bool include_z_as_covariate = false;  // adds Z (and Z*P for DiD) to the model
  bool poa_include_y0_stage2 = false;   // add Y0 to the POA-IV outcome model
  SeMode se_mode = SeMode::bootstrap;   // for TSLS / POA-IV / logit-DiD SEs
  int bootstrap_B = 500;
  std::uint64_t seed = 20240501;
  std::vector<std::string> psm_covariates;  // empty = all W1 columns
};

EstimateResult estimate_cat(const Cohort& cohort, const EstimatorOptions& options = {});
EstimateResult estimate_iv_ratio(const Cohort& cohort, const EstimatorOptions& options = {});
EstimateResult estimate_tsls(const Cohort& cohort, const EstimatorOptions& options = {});
EstimateResult estimate_did(const Cohort& cohort, const EstimatorOptions& options = {});
EstimateResult estimate_poa_iv(const Cohort& cohort, const EstimatorOptions& options = {});
EstimateResult estimate_psm_cat(const Cohort& cohort, const MatchResult& match,
                                const EstimatorOptions& options = {});

/// Point estimate only (no SE machinery); this is what bootstrap replicates
/// and the Monte Carlo engine evaluate. PSM_CaT re-fits the propensity model
/// and re-matches on the given (sub)sample.
double point_estimate(Method m, const Cohort& cohort, const EstimatorOptions& options = {});

/// Dispatch to the full estimator for a method tag.
EstimateResult estimate(Method m, const Cohort& cohort, const EstimatorOptions& options = {});

/// With-replacement patient resample, deterministic in (seed, replicate).
std::vector<std::size_t> bootstrap_indices(std::uint64_t seed, std::uint64_t replicate,
                                           std::size_t n);

/// Bootstrap SE of a scalar statistic of the cohort. Replicates where `f`
/// throws are dropped; more than `max_fail_frac` failures aborts.
double bootstrap_se(const std::function<double(const Cohort&)>& f, const Cohort& cohort,
                    int B, std::uint64_t seed, double max_fail_frac = 0.1);

/// Fill ci_low/ci_high/p_value from estimate and se.
void finalize_result(EstimateResult& r);

}  // namespace causalcmp
