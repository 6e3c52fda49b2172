#include <cmath>
#include <string>
#include <vector>

#include "causalcmp/errors.hpp"
#include "causalcmp/estimators.hpp"
#include "causalcmp/matching.hpp"
#include "causalcmp/rng.hpp"
#include "doctest.h"

using namespace causalcmp;

namespace {

Cohort confounded_cohort(std::uint64_t seed, std::size_t n) {
  CounterRng rng(seed);
  Cohort c;
  c.outcome_kind = OutcomeKind::binary;
  c.w1_names = {"w1_sev"};
  for (std::size_t i = 0; i < n; ++i) {
    ObservationRecord r;
    r.patient_id = "p" + std::to_string(i);
    r.cluster_id = "g1";
    const double w = rng.next_normal();
    r.w1.resize(1);
    r.w1[0] = w;
    r.w0.resize(0);
    r.x = rng.next_bernoulli(sigmoid(-0.4 + 1.2 * w));
    r.y0 = rng.next_bernoulli(0.2);
    r.y1 = rng.next_bernoulli(0.15 + 0.1 * r.x);
    c.records.push_back(std::move(r));
  }
  return c;
}

}  // namespace

TEST_CASE("greedy nearest-neighbour matching, 12-patient hand enumeration") {
  //            T1    T2    T3    C1    C2    C3    C4    C5  (+4 fillers)
  // score     0.80  0.60  0.40  0.75  0.55  0.50  0.35  0.30
  // logit     1.386 0.405 -.405 1.099 0.201 0.000 -.619 -.847
  // greedy order is descending treated logit:
  //   T1 -> C1 (|1.386-1.099| = 0.288), T2 -> C2 (0.204), T3 -> C4 (0.214)
  const std::vector<double> scores = {0.80, 0.60, 0.40, 0.75, 0.55, 0.50,
                                      0.35, 0.30, 0.10, 0.12, 0.14, 0.16};
  const std::vector<int> x = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<std::string> ids = {"T1", "T2", "T3", "C1", "C2", "C3",
                                        "C4", "C5", "C6", "C7", "C8", "C9"};
  const MatchResult m = match_nearest(scores, x, ids);
  REQUIRE(m.pairs.size() == 3);
  CHECK(m.pairs[0].treated_id == "T1");
  CHECK(m.pairs[0].control_id == "C1");
  CHECK(m.pairs[0].distance ==
        doctest::Approx(std::log(0.80 / 0.20) - std::log(0.75 / 0.25)).epsilon(1e-12));
  CHECK(m.pairs[1].treated_id == "T2");
  CHECK(m.pairs[1].control_id == "C2");
  CHECK(m.pairs[2].treated_id == "T3");
  CHECK(m.pairs[2].control_id == "C4");
  CHECK(m.matched_ids.count("C3") == 0);
  CHECK(m.matched_rows == std::vector<std::size_t>{0, 1, 2, 3, 4, 6});
  CHECK(m.discard_count == 0);
}

TEST_CASE("exact-tie controls are broken by patient id") {
  const std::vector<double> scores = {0.6, 0.5, 0.5};
  const std::vector<int> x = {1, 0, 0};
  const MatchResult m = match_nearest(scores, x, {"t", "cb", "ca"});
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].control_id == "ca");
}

TEST_CASE("caliper discards distant treated") {
  const std::vector<double> scores = {0.9, 0.6, 0.55, 0.1};
  const std::vector<int> x = {1, 1, 0, 0};
  const MatchResult m = match_nearest(scores, x, {"t1", "t2", "c1", "c2"}, 0.5);
  // t1 (logit 2.197) is 1.996 from c1 -> discarded; t2 (0.405) is 0.205
  // from c1 -> kept
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].treated_id == "t2");
  CHECK(m.discard_count == 1);
}

TEST_CASE("matching without replacement never reuses a control") {
  const std::vector<double> scores = {0.60, 0.59, 0.58, 0.5};
  const std::vector<int> x = {1, 1, 1, 0};
  const MatchResult m = match_nearest(scores, x, {"t1", "t2", "t3", "c1"});
  CHECK(m.pairs.size() == 1);  // single control can serve only one treated
  CHECK(m.pairs[0].treated_id == "t1");
}

TEST_CASE("scores outside (0,1) and missing controls are rejected") {
  CHECK_THROWS_AS(match_nearest({1.0, 0.5}, {1, 0}, {"a", "b"}), Error);
  CHECK_THROWS_AS(match_nearest({0.4, 0.5}, {1, 1}, {"a", "b"}), NoControlsError);
}

TEST_CASE("with enough controls every treated patient is matched") {
  const Cohort c = confounded_cohort(31, 400);
  std::size_t n_treated = 0;
  for (const auto& r : c.records) n_treated += static_cast<std::size_t>(r.x);
  REQUIRE(n_treated < c.size() - n_treated);
  const MatchResult m = propensity_match(c, c.w1_names);
  CHECK(m.pairs.size() == n_treated);
  CHECK(m.discard_count == 0);
}

TEST_CASE("matching is deterministic and improves covariate balance") {
  const Cohort c = confounded_cohort(32, 500);
  const MatchResult m1 = propensity_match(c, c.w1_names);
  const MatchResult m2 = propensity_match(c, c.w1_names);
  REQUIRE(m1.pairs.size() == m2.pairs.size());
  for (std::size_t i = 0; i < m1.pairs.size(); ++i) {
    CHECK(m1.pairs[i].treated_id == m2.pairs[i].treated_id);
    CHECK(m1.pairs[i].control_id == m2.pairs[i].control_id);
  }

  const BalanceReport rep = balance_report(c, m1, c.w1_names);
  REQUIRE(rep.rows.size() == 1);
  CHECK(std::fabs(rep.rows[0].smd_before) > 0.3);  // construction is confounded
  CHECK(std::fabs(rep.rows[0].smd_after) < std::fabs(rep.rows[0].smd_before));
  CHECK(rep.n_treated_after == rep.n_control_after);
  CHECK(rep.n_treated_before + rep.n_control_before == c.size());
}

TEST_CASE("PSM estimator runs on the matched subset only") {
  const Cohort c = confounded_cohort(33, 500);
  const MatchResult m = propensity_match(c, c.w1_names);
  const EstimateResult r = estimate_psm_cat(c, m);
  CHECK(r.method == Method::PSM_CaT);
  CHECK(r.n_used == 2 * m.pairs.size());
  CHECK(r.diagnostics.at("n_pairs") == doctest::Approx(double(m.pairs.size())));

  MatchResult empty;
  CHECK_THROWS_AS(estimate_psm_cat(c, empty), EmptyMatchedSetError);
}
