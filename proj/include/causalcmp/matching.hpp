#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "causalcmp/cohort.hpp"
#include "causalcmp/glm.hpp"

namespace causalcmp {

struct MatchResult {
  struct Pair {
    std::string treated_id;
    std::string control_id;
    double distance = 0.0;  // |linear-predictor difference|
  };
  std::vector<Pair> pairs;
  std::set<std::string> matched_ids;
  std::vector<std::size_t> matched_rows;  // row indices, sorted; robust to duplicate ids
  std::size_t discard_count = 0;  // caliper-discarded treated
  GlmFit propensity_fit;
};

/// Logistic fit of X on the named covariates (looked up among the cohort's
/// W1 columns, then W0). An intercept is always included.
GlmFit fit_propensity(const Cohort& cohort, const std::vector<std::string>& covariate_names);

/// Greedy 1-1 nearest-neighbour matching without replacement: treated
/// patients in descending propensity order, distance on the logit scale,
/// ties broken by patient_id.
MatchResult match_nearest(const std::vector<double>& scores, const std::vector<int>& x,
                          const std::vector<std::string>& patient_ids,
                          std::optional<double> caliper = {});

/// fit_propensity + match_nearest over a cohort.
MatchResult propensity_match(const Cohort& cohort,
                             const std::vector<std::string>& covariate_names,
                             std::optional<double> caliper = {});

struct BalanceReport {
  struct Row {
    std::string name;
    double smd_before = 0.0;
    double smd_after = 0.0;
  };
  std::vector<Row> rows;  // love-plot order: descending |smd_before|
  std::size_t n_treated_before = 0, n_control_before = 0;
  std::size_t n_treated_after = 0, n_control_after = 0;
};

/// Standardized mean differences before/after matching; the pooled-SD
/// denominator is fixed at its pre-match value for both columns.
BalanceReport balance_report(const Cohort& cohort, const MatchResult& match,
                             const std::vector<std::string>& covariate_names);

}  // namespace causalcmp
