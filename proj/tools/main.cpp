#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "causalcmp/cohort.hpp"
#include "causalcmp/csv.hpp"
#include "causalcmp/errors.hpp"
#include "causalcmp/estimators.hpp"
#include "causalcmp/heterogeneity.hpp"
#include "causalcmp/matching.hpp"
#include "causalcmp/rng.hpp"
#include "causalcmp/simulation.hpp"

namespace fs = std::filesystem;
using namespace causalcmp;

namespace {

struct RunConfig {
  std::string command;
  std::string input;
  std::string history;
  std::string methods;  // comma separated; empty = per-command default
  std::string preset_id = "S1";
  int n_sim = 100;
  int bootstrap_B = 500;
  std::uint64_t seed = 20240501;  // logged default; see manifest.json
  double alpha = 0.05;
  int threads = 1;
  std::string out_dir = "out";
  std::string formats = "csv";
  bool with_z = false;
  std::string iv_mode = "dynamic";
  std::int64_t burn_in_end = 0;
  bool burn_in_set = false;
  std::string outcome = "binary";
  std::string se_mode = "bootstrap";
  double caliper = 0.0;
  bool caliper_set = false;
  bool qtest = false;
  bool dump_cohort = false;
};

constexpr double kPct = 100.0;  // display scale, applied at serialization only

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

/// Table rows as an array of {header: cell} objects. Cells that parse as
/// numbers are emitted bare so the JSON mirrors the CSV exactly.
void write_json_table(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << "[\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << "  {";
    for (std::size_t c = 0; c < header.size(); ++c) {
      char* end = nullptr;
      const std::string& cell = rows[r][c];
      std::strtod(cell.c_str(), &end);
      const bool numeric = !cell.empty() && end && *end == '\0';
      out << '"' << json_escape(header[c]) << "\": ";
      if (numeric)
        out << cell;
      else
        out << '"' << json_escape(cell) << '"';
      if (c + 1 < header.size()) out << ", ";
    }
    out << (r + 1 < rows.size() ? "},\n" : "}\n");
  }
  out << "]\n";
}

struct Emitter {
  fs::path dir;
  bool csv = true;
  bool json = false;

  void table(const std::string& name, const std::vector<std::string>& header,
             const std::vector<std::vector<std::string>>& rows) const {
    if (csv) write_csv((dir / (name + ".csv")).string(), header, rows);
    if (json) write_json_table((dir / (name + ".json")).string(), header, rows);
  }
};

void write_manifest(const RunConfig& c) {
  std::ofstream out(fs::path(c.out_dir) / "manifest.json", std::ios::binary);
  out << "{\n";
  auto field = [&](const std::string& k, const std::string& v, bool last = false) {
    out << "  \"" << k << "\": \"" << json_escape(v) << '"' << (last ? "\n" : ",\n");
  };
  auto raw = [&](const std::string& k, const std::string& v, bool last = false) {
    out << "  \"" << k << "\": " << v << (last ? "\n" : ",\n");
  };
  field("command", c.command);
  field("input", c.input);
  field("history", c.history);
  field("methods", c.methods);
  field("preset", c.preset_id);
  raw("n_sim", std::to_string(c.n_sim));
  raw("bootstrap_B", std::to_string(c.bootstrap_B));
  raw("seed", std::to_string(c.seed));
  raw("alpha", format_double(c.alpha));
  raw("threads", std::to_string(c.threads));
  field("out", c.out_dir);
  field("format", c.formats);
  raw("with_z", c.with_z ? "true" : "false");
  field("iv_mode", c.iv_mode);
  raw("burn_in_end", c.burn_in_set ? std::to_string(c.burn_in_end) : "null");
  field("outcome", c.outcome);
  field("se", c.se_mode);
  raw("caliper", c.caliper_set ? format_double(c.caliper) : "null");
  raw("qtest", c.qtest ? "true" : "false", true);
  out << "}\n";
}

Emitter make_emitter(const RunConfig& c) {
  Emitter e;
  e.dir = c.out_dir;
  e.csv = e.json = false;
  for (const std::string& f : split_csv_list(c.formats)) {
    if (f == "csv")
      e.csv = true;
    else if (f == "json")
      e.json = true;
    else
      throw ConfigError("unknown report format '" + f + "' (expected csv and/or json)");
  }
  if (!e.csv && !e.json) throw ConfigError("--format selected no report format");
  return e;
}

std::vector<Method> parse_methods(const std::string& list, const std::string& fallback) {
  std::vector<Method> out;
  for (const std::string& name : split_csv_list(list.empty() ? fallback : list)) {
    const Method m = method_from_name(name);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw ConfigError("no methods requested");
  return out;
}

bool needs_instrument(Method m) {
  return m == Method::IV_ratio || m == Method::IV_TSLS || m == Method::POA_IV ||
         m == Method::CaT_with_Z || m == Method::DiD_with_Z;
}

OutcomeKind parse_outcome(const std::string& s) {
  if (s == "binary") return OutcomeKind::binary;
  if (s == "continuous") return OutcomeKind::continuous;
  throw ConfigError("unknown outcome kind '" + s + "'");
}

EstimatorOptions estimator_options(const RunConfig& c) {
  EstimatorOptions o;
  if (c.se_mode == "plugin")
    o.se_mode = SeMode::plugin;
  else if (c.se_mode == "bootstrap")
    o.se_mode = SeMode::bootstrap;
  else
    throw ConfigError("unknown --se mode '" + c.se_mode + "'");
  o.bootstrap_B = c.bootstrap_B;
  o.seed = c.seed;
  return o;
}

std::string set_label(const std::vector<Method>& set) {
  std::string s;
  for (const Method m : set) {
    if (!s.empty()) s += ", ";
    s += method_name(m);
  }
  return s;
}

void emit_qtest(const Emitter& emit, const Cohort& cohort, const std::vector<Method>& methods,
                const RunConfig& c) {
  const BootstrapEnsemble ens =
      bootstrap_ensemble(cohort, methods, c.bootstrap_B, c.seed, estimator_options(c));

  std::vector<std::vector<Method>> sets;
  for (std::size_t a = 0; a < methods.size(); ++a)
    for (std::size_t b = a + 1; b < methods.size(); ++b)
      sets.push_back({methods[a], methods[b]});
  if (methods.size() > 2) sets.push_back(methods);

  std::vector<std::vector<std::string>> rows;
  for (const auto& set : sets) {
    std::vector<Eigen::Index> idx;
    for (const Method m : set)
      idx.push_back(std::find(methods.begin(), methods.end(), m) - methods.begin());
    Eigen::VectorXd est(static_cast<Eigen::Index>(idx.size()));
    Eigen::MatrixXd cov(static_cast<Eigen::Index>(idx.size()),
                        static_cast<Eigen::Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a) {
      est[static_cast<Eigen::Index>(a)] = ens.point_estimates[idx[a]];
      for (std::size_t b = 0; b < idx.size(); ++b)
        cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            ens.covariance(idx[a], idx[b]);
    }
    const QTestResult q = q_statistic_from(est, cov, c.alpha);
    rows.push_back({set_label(set), format_double(q.q),
                    format_double(q.critical_value) + " (" + std::to_string(q.df) + ")",
                    format_double(q.p_value), q.similar ? "similar" : "not similar"});
  }
  emit.table("qtest", {"set", "q", "critical_df", "p_value", "decision"}, rows);

  std::vector<std::string> header = {"method"};
  for (const Method m : methods) header.push_back(method_name(m));
  std::vector<std::vector<std::string>> corr;
  for (std::size_t a = 0; a < methods.size(); ++a) {
    std::vector<std::string> row = {method_name(methods[a])};
    for (std::size_t b = 0; b < methods.size(); ++b)
      row.push_back(format_double(ens.correlation(static_cast<Eigen::Index>(a),
                                                  static_cast<Eigen::Index>(b))));
    corr.push_back(std::move(row));
  }
  emit.table("correlation", header, corr);
}

int cmd_estimate(const RunConfig& c, bool het_only) {
  if (c.input.empty()) throw ConfigError("--input is required");
  const Emitter emit = make_emitter(c);
  const Cohort cohort = load_cohort(c.input, ColumnSchema{}, parse_outcome(c.outcome));
  const std::vector<Method> methods = parse_methods(c.methods, "CaT,IV,DiD");
  for (const Method m : methods)
    if (needs_instrument(m) && !cohort.has_z())
      throw ConfigError("method " + method_name(m) +
                        " needs an instrument but the input has no 'z' column");
  const EstimatorOptions opt = estimator_options(c);

  if (!het_only) {
    std::vector<std::vector<std::string>> rows, forest;
    for (const Method m : methods) {
      const EstimateResult r = estimate(m, cohort, opt);
      rows.push_back({method_name(m), format_double(kPct * r.estimate),
                      format_double(kPct * r.ci_low), format_double(kPct * r.ci_high),
                      format_double(kPct * r.se), format_double(r.p_value)});
      forest.push_back({method_name(m), format_double(kPct * r.estimate),
                        format_double(kPct * r.ci_low), format_double(kPct * r.ci_high)});
    }
    emit.table("estimates",
               {"method", "estimate_pct", "ci_low_pct", "ci_high_pct", "se_pct", "p_value"},
               rows);
    emit.table("forest", {"method", "estimate_pct", "ci_low_pct", "ci_high_pct"}, forest);
  }
  if (het_only || c.qtest) emit_qtest(emit, cohort, methods, c);
  return 0;
}

int cmd_match(const RunConfig& c) {
  if (c.input.empty()) throw ConfigError("--input is required");
  const Emitter emit = make_emitter(c);
  const Cohort cohort = load_cohort(c.input, ColumnSchema{}, parse_outcome(c.outcome));
  const std::optional<double> caliper =
      c.caliper_set ? std::optional<double>(c.caliper) : std::nullopt;
  const MatchResult m = propensity_match(cohort, cohort.w1_names, caliper);

  std::vector<std::vector<std::string>> pairs;
  for (const auto& p : m.pairs)
    pairs.push_back({p.treated_id, p.control_id, format_double(p.distance)});
  emit.table("pairs", {"treated_id", "control_id", "distance"}, pairs);

  const BalanceReport rep = balance_report(cohort, m, cohort.w1_names);
  std::vector<std::vector<std::string>> bal;
  for (const auto& row : rep.rows)
    bal.push_back({row.name, format_double(row.smd_before), format_double(row.smd_after)});
  emit.table("balance", {"covariate", "smd_before", "smd_after"}, bal);
  return 0;
}

void emit_summary(const Emitter& emit, const PerformanceSummary& s) {
  std::vector<std::vector<std::string>> rows, mcse, estimates;
  for (std::size_t j = 0; j < s.methods.size(); ++j) {
    const MethodPerformance& m = s.methods[j];
    const std::string name = method_name(m.method);
    rows.push_back({s.scenario, name, format_double(kPct * m.bias),
                    format_double(kPct * m.empirical_sd), format_double(kPct * m.mean_se),
                    format_double(kPct * kPct * m.mse), format_double(m.coverage),
                    format_double(m.t1e), std::to_string(m.n_used),
                    std::to_string(m.n_failed)});
    mcse.push_back({s.scenario, name, format_double(kPct * m.mcse_bias),
                    format_double(kPct * kPct * m.mcse_mse), format_double(m.mcse_coverage),
                    format_double(m.mcse_t1e)});
    for (std::size_t r = 0; r < s.estimates[j].size(); ++r) {
      const double e = s.estimates[j][r];
      estimates.push_back({s.scenario, name, std::to_string(r),
                           std::isnan(e) ? "" : format_double(kPct * e)});
    }
  }
  emit.table("summary",
             {"scenario", "method", "bias_pct", "empirical_sd_pct", "mean_se_pct",
              "mse_pct2", "coverage_pct", "t1e_pct", "n_used", "n_failed"},
             rows);
  emit.table("mcse",
             {"scenario", "method", "mcse_bias_pct", "mcse_mse_pct2", "mcse_coverage_pct",
              "mcse_t1e_pct"},
             mcse);
  emit.table("estimates_long", {"scenario", "method", "run", "estimate_pct"}, estimates);
}

int cmd_simulate(const RunConfig& c, bool poa) {
  const Emitter emit = make_emitter(c);
  const PresetId id = preset_from_name(c.preset_id);
  MonteCarloOptions o;
  o.methods = parse_methods(c.methods, poa ? "CaT,IV,DiD,POA_IV" : "CaT,IV,DiD");
  o.with_z_variants = c.with_z;
  o.alpha = c.alpha;
  o.threads = c.threads;
  const PerformanceSummary s = poa ? run_poa_study(id, c.n_sim, c.seed, o)
                                   : run_monte_carlo(id, c.n_sim, c.seed, o);
  emit_summary(emit, s);
  if (c.dump_cohort) {
    // the exact draw the Monte Carlo engine used for run 0
    const std::uint64_t run_key = CounterRng::derive(
        CounterRng::derive(c.seed, stream_id::monte_carlo_run), 0);
    const SimulatedCohort sim = simulate_cohort(preset(id), run_key);
    save_cohort((emit.dir / "cohort_0.csv").string(), sim.cohort, ColumnSchema{});
  }
  return 0;
}

int cmd_iv_build(const RunConfig& c) {
  if (c.input.empty()) throw ConfigError("--input is required");
  if (c.history.empty()) throw ConfigError("--history is required");
  const Emitter emit = make_emitter(c);
  IvMode mode;
  if (c.iv_mode == "dynamic")
    mode = IvMode::dynamic;
  else if (c.iv_mode == "static")
    mode = IvMode::static_burn_in;
  else
    throw ConfigError("unknown --iv-mode '" + c.iv_mode + "'");
  if (mode == IvMode::static_burn_in && !c.burn_in_set)
    throw ConfigError("--burn-in-end is required with --iv-mode static");

  const Cohort cohort = load_cohort(c.input, ColumnSchema{}, parse_outcome(c.outcome));
  const auto events = load_prescription_events(c.history);
  const IvBuildResult r = build_preference_iv(
      events, cohort, mode,
      c.burn_in_set ? std::optional<std::int64_t>(c.burn_in_end) : std::nullopt);

  save_cohort((emit.dir / "cohort_with_z.csv").string(), r.cohort, ColumnSchema{});
  std::vector<std::vector<std::string>> excluded;
  for (const auto& id : r.excluded_patient_ids) excluded.push_back({id});
  emit.table("excluded_patients", {"patient_id"}, excluded);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"two-period causal estimator comparison toolkit"};
  app.require_subcommand(1);
  app.set_config("--config");
  app.fallthrough();

  app.add_option("--input", c.input, "cohort CSV path");
  app.add_option("--history", c.history, "prescription history CSV path");
  app.add_option("--methods", c.methods, "comma-separated estimator list");
  app.add_option("--preset", c.preset_id, "scenario preset id");
  app.add_option("--nsim", c.n_sim, "Monte Carlo repetitions");
  app.add_option("--bootstrap", c.bootstrap_B, "bootstrap replicates");
  app.add_option("--seed", c.seed, "RNG seed (defaults to a logged value)");
  app.add_option("--alpha", c.alpha, "significance level");
  app.add_option("--threads", c.threads, "parallelism cap (0 = all cores)");
  app.add_option("--out", c.out_dir, "output directory");
  app.add_option("--format", c.formats, "report formats: csv,json");
  app.add_flag("--with-z", c.with_z, "add instrument-adjusted estimator variants");
  app.add_option("--iv-mode", c.iv_mode, "preference-IV mode: static|dynamic");
  app.add_option("--burn-in-end", c.burn_in_end, "first day after the burn-in window")
      ->each([&](const std::string&) { c.burn_in_set = true; });
  app.add_option("--outcome", c.outcome, "outcome kind: binary|continuous");
  app.add_option("--se", c.se_mode, "standard-error mode: bootstrap|plugin");
  app.add_option("--caliper", c.caliper, "matching caliper on the logit scale")
      ->each([&](const std::string&) { c.caliper_set = true; });
  app.add_flag("--qtest", c.qtest, "also run the similarity test on the estimates");
  app.add_flag("--dump-cohort", c.dump_cohort, "also write run 0's simulated cohort CSV");

  app.add_subcommand("estimate", "estimate treatment effects on a cohort");
  app.add_subcommand("match", "propensity-score matching and balance report");
  app.add_subcommand("het", "bootstrap similarity test across estimators");
  app.add_subcommand("simulate", "Monte Carlo study on a scenario preset");
  app.add_subcommand("poa-study", "Monte Carlo study including the POA-IV estimator");
  app.add_subcommand("iv-build", "fill the preference instrument from history");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  c.command = app.get_subcommands().front()->get_name();

  // the manifest documents the resolved configuration even when the run
  // fails later
  try {
    fs::create_directories(c.out_dir);
    write_manifest(c);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot prepare output directory: " << e.what() << "\n";
    return 2;
  }

  try {
    if (c.command == "estimate") return cmd_estimate(c, false);
    if (c.command == "het") return cmd_estimate(c, true);
    if (c.command == "match") return cmd_match(c);
    if (c.command == "simulate") return cmd_simulate(c, false);
    if (c.command == "poa-study") return cmd_simulate(c, true);
    if (c.command == "iv-build") return cmd_iv_build(c);
    throw ConfigError("unknown command '" + c.command + "'");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
