#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "causalcmp/cohort.hpp"
#include "causalcmp/estimators.hpp"
#include "causalcmp/heterogeneity.hpp"

namespace causalcmp {

/// Full coefficient set of the two-period data-generating process.
/// Outcomes and treatment are Bernoulli draws of a linear probability
/// index (continuous mode keeps the index itself as the outcome).
struct ScenarioSpec {
  int n = 5000;
  int n_clusters = 50;
  double beta = 0.1;
  OutcomeKind outcome_kind = OutcomeKind::binary;
  bool poa_interaction = false;  // X model gains the Y0*Z term

  struct Coefficients {
    double w1_w0 = 0.5, w1_eps = 0.5;
    double y0_0 = 0.0, y0_u = 0.0, y0_w0 = 0.0, y0_eps = 0.0;
    double x_0 = 0.0, x_z = 0.0, x_u = 0.0, x_w0 = 0.0, x_w1 = 0.0;
    double x_y0 = 0.0, x_y0z = 0.0, x_eps = 0.0;
    double y1_0 = 0.0, y1_u = 0.0, y1_w1 = 0.0, y1_z = 0.0, y1_eps = 0.0;
  } g;

  void validate() const;
};

enum class PresetId {
  S1, S2, S3, S4, S5, S6, S7, S8,
  POA_basic, POA_AC1, POA_AC2, POA_AC3, POA_AC3_continuous,
};

std::string preset_name(PresetId id);
PresetId preset_from_name(const std::string& name);
ScenarioSpec preset(PresetId id);
std::vector<PresetId> all_presets();

struct SimulatedCohort {
  Cohort cohort;
  std::vector<double> u;  // unmeasured confounder, diagnostics only
  std::int64_t clipped = 0;
  std::int64_t probability_draws = 0;
};

/// Draws one cohort. Bernoulli indices outside [0,1] are clipped and
/// counted; more than 0.1% clipped aborts.
SimulatedCohort simulate_cohort(const ScenarioSpec& spec, std::uint64_t seed);

struct MethodPerformance {
  Method method = Method::CaT;
  double bias = 0.0;
  double empirical_sd = 0.0;
  double mean_se = 0.0;
  double mse = 0.0;
  double coverage = 0.0;  // percent
  double t1e = 0.0;       // percent, from the paired beta=0 companion runs
  double mcse_bias = 0.0;
  double mcse_mse = 0.0;
  double mcse_coverage = 0.0;  // percent
  double mcse_t1e = 0.0;       // percent
  int n_failed = 0;
  int n_used = 0;
};

struct PerformanceSummary {
  std::string scenario;
  double true_beta = 0.0;
  int n_sim = 0;
  std::vector<MethodPerformance> methods;
  double clip_fraction = 0.0;
  /// long-format per-run estimates (method-major, run-minor), for
  /// distribution dumps
  std::vector<std::vector<double>> estimates;  // [method][run], NaN = failed
};

struct MonteCarloOptions {
  std::vector<Method> methods = {Method::CaT, Method::IV_TSLS, Method::DiD};
  bool with_z_variants = false;   // adds CaT_with_Z / DiD_with_Z
  bool with_t1e = true;           // run the paired beta=0 companion stream
  SeMode se_mode = SeMode::plugin;
  int se_bootstrap_B = 200;       // only used when se_mode == bootstrap
  double alpha = 0.05;
  int threads = 0;                // 0 = all available
};

/// OpenMP-parallel Monte Carlo driver; per-run RNG substreams make the
/// result independent of scheduling.
PerformanceSummary run_monte_carlo(const ScenarioSpec& spec, const std::string& label,
                                   int n_sim, std::uint64_t seed,
                                   const MonteCarloOptions& options);
PerformanceSummary run_monte_carlo(PresetId id, int n_sim, std::uint64_t seed,
                                   MonteCarloOptions options);

/// Serial reference implementation of the same driver; kept for testing
/// the parallel path against.
PerformanceSummary run_monte_carlo_serial(const ScenarioSpec& spec, const std::string& label,
                                          int n_sim, std::uint64_t seed,
                                          const MonteCarloOptions& options);

/// POA study: run_monte_carlo with the POA-IV estimator added.
PerformanceSummary run_poa_study(PresetId id, int n_sim, std::uint64_t seed,
                                 MonteCarloOptions options = {});

/// Heterogeneity-test case study: per simulated dataset, Q_e for each
/// method set over a shared bootstrap; tabulates rejection fractions.
std::vector<PairwiseRateRow> pairwise_similarity_study(
    const ScenarioSpec& spec, const std::vector<std::vector<Method>>& sets, int n_sim, int B,
    std::uint64_t seed, double alpha = 0.05, int threads = 0);

}  // namespace causalcmp
