#include "causalcmp/matching.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "causalcmp/errors.hpp"

namespace causalcmp {

namespace {

// column of covariate values for a name found in w1 (preferred) or w0
Eigen::VectorXd covariate_column(const Cohort& cohort, const std::string& name) {
  const Eigen::Index n = static_cast<Eigen::Index>(cohort.size());
  Eigen::VectorXd col(n);
  auto it1 = std::find(cohort.w1_names.begin(), cohort.w1_names.end(), name);
  if (it1 != cohort.w1_names.end()) {
    const Eigen::Index k = it1 - cohort.w1_names.begin();
    for (Eigen::Index i = 0; i < n; ++i) col[i] = cohort.records[i].w1[k];
    return col;
  }
  auto it0 = std::find(cohort.w0_names.begin(), cohort.w0_names.end(), name);
  if (it0 != cohort.w0_names.end()) {
    const Eigen::Index k = it0 - cohort.w0_names.begin();
    for (Eigen::Index i = 0; i < n; ++i) col[i] = cohort.records[i].w0[k];
    return col;
  }
  throw UnknownTermError("covariate '" + name + "' not found in cohort");
}

}  // namespace

GlmFit fit_propensity(const Cohort& cohort, const std::vector<std::string>& covariate_names) {
  cohort.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(cohort.size());
  const Eigen::Index d = static_cast<Eigen::Index>(covariate_names.size());
  DesignSpec spec;
  spec.link = Link::logit;
  spec.response.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) spec.response[i] = cohort.records[i].x;
  spec.predictors.resize(n, d + 1);
  spec.predictors.col(0).setOnes();
  spec.names = {"(Intercept)"};
  for (Eigen::Index k = 0; k < d; ++k) {
    spec.predictors.col(k + 1) = covariate_column(cohort, covariate_names[k]);
    spec.names.push_back(covariate_names[k]);
  }
  return fit_logistic(spec);
}

MatchResult match_nearest(const std::vector<double>& scores, const std::vector<int>& x,
                          const std::vector<std::string>& patient_ids,
                          std::optional<double> caliper) {
  const std::size_t n = scores.size();
  if (x.size() != n || patient_ids.size() != n)
    throw DimensionMismatchError("match_nearest: input length mismatch");
  for (double s : scores)
    if (!(s > 0.0 && s < 1.0)) throw Error("match_nearest: scores must be in (0,1)");

  struct Unit {
    double lp;
    std::string id;
    std::size_t idx;
  };
  std::vector<Unit> treated, controls;
  for (std::size_t i = 0; i < n; ++i) {
    const double lp = std::log(scores[i] / (1.0 - scores[i]));
    (x[i] == 1 ? treated : controls).push_back({lp, patient_ids[i], i});
  }
  if (controls.empty()) throw NoControlsError("no control records to match against");

  std::sort(treated.begin(), treated.end(), [](const Unit& a, const Unit& b) {
    if (a.lp != b.lp) return a.lp > b.lp;
    if (a.id != b.id) return a.id < b.id;
    return a.idx < b.idx;
  });
  // available controls keyed by (lp, id, row); row keeps duplicate ids distinct
  using Key = std::tuple<double, std::string, std::size_t>;
  std::map<Key, std::size_t> avail;
  for (const auto& c : controls) avail[{c.lp, c.id, c.idx}] = c.idx;

  MatchResult result;
  for (const auto& t : treated) {
    if (avail.empty()) break;
    auto hi = avail.lower_bound({t.lp, std::string(), 0});
    auto best = avail.end();
    double best_dist = 0.0;
    auto better_key = [](const Key& a, const Key& b) {
      if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
      return std::get<2>(a) < std::get<2>(b);
    };
    auto consider = [&](std::map<Key, std::size_t>::iterator it) {
      if (it == avail.end()) return;
      const double dist = std::fabs(std::get<0>(it->first) - t.lp);
      if (best == avail.end() || dist < best_dist ||
          (dist == best_dist && better_key(it->first, best->first))) {
        best = it;
        best_dist = dist;
      }
    };
    consider(hi);
    if (hi != avail.begin()) consider(std::prev(hi));
    // equal-distance run on either side: scan neighbours with the same distance
    if (best != avail.end()) {
      auto fwd = hi;
      while (fwd != avail.end() && std::fabs(std::get<0>(fwd->first) - t.lp) == best_dist) {
        consider(fwd);
        ++fwd;
      }
      auto bwd = hi;
      while (bwd != avail.begin()) {
        --bwd;
        if (std::fabs(std::get<0>(bwd->first) - t.lp) != best_dist) break;
        consider(bwd);
      }
    }
    if (best == avail.end()) continue;
    if (caliper && best_dist > *caliper) {
      ++result.discard_count;
      continue;
    }
    result.pairs.push_back({t.id, std::get<1>(best->first), best_dist});
    result.matched_ids.insert(t.id);
    result.matched_ids.insert(std::get<1>(best->first));
    result.matched_rows.push_back(t.idx);
    result.matched_rows.push_back(best->second);
    avail.erase(best);
  }
  std::sort(result.matched_rows.begin(), result.matched_rows.end());
  return result;
}

MatchResult propensity_match(const Cohort& cohort,
                             const std::vector<std::string>& covariate_names,
                             std::optional<double> caliper) {
  GlmFit fit = fit_propensity(cohort, covariate_names);
  const std::size_t n = cohort.size();
  std::vector<double> scores(n);
  std::vector<int> x(n);
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = cohort.records[i];
    double eta = fit.coefficients[0];
    for (std::size_t k = 1; k < fit.names.size(); ++k) {
      Eigen::VectorXd col;  // covariate lookup per record is cheap enough here
      // inline lookup to avoid refetching whole columns
      const auto& name = fit.names[k];
      auto it1 = std::find(cohort.w1_names.begin(), cohort.w1_names.end(), name);
      if (it1 != cohort.w1_names.end())
        eta += fit.coefficients[static_cast<Eigen::Index>(k)] *
               r.w1[it1 - cohort.w1_names.begin()];
      else {
        auto it0 = std::find(cohort.w0_names.begin(), cohort.w0_names.end(), name);
        eta += fit.coefficients[static_cast<Eigen::Index>(k)] *
               r.w0[it0 - cohort.w0_names.begin()];
      }
    }
    double s = sigmoid(eta);
    s = std::min(std::max(s, 1e-12), 1.0 - 1e-12);
    scores[i] = s;
    x[i] = r.x;
    ids[i] = r.patient_id;
  }
  MatchResult m = match_nearest(scores, x, ids, caliper);
  m.propensity_fit = std::move(fit);
  return m;
}

BalanceReport balance_report(const Cohort& cohort, const MatchResult& match,
                             const std::vector<std::string>& covariate_names) {
  BalanceReport report;
  const std::size_t n = cohort.size();
  std::vector<bool> matched(n, false);
  for (std::size_t i = 0; i < n; ++i)
    matched[i] = match.matched_ids.count(cohort.records[i].patient_id) > 0;

  for (std::size_t i = 0; i < n; ++i) {
    if (cohort.records[i].x == 1) {
      ++report.n_treated_before;
      if (matched[i]) ++report.n_treated_after;
    } else {
      ++report.n_control_before;
      if (matched[i]) ++report.n_control_after;
    }
  }

  for (const auto& name : covariate_names) {
    const Eigen::VectorXd col = covariate_column(cohort, name);
    double st = 0, sc = 0, sst = 0, ssc = 0, at = 0, ac = 0;
    std::size_t nt = 0, nc = 0, nta = 0, nca = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = col[static_cast<Eigen::Index>(i)];
      if (cohort.records[i].x == 1) {
        st += v;
        sst += v * v;
        ++nt;
        if (matched[i]) { at += v; ++nta; }
      } else {
        sc += v;
        ssc += v * v;
        ++nc;
        if (matched[i]) { ac += v; ++nca; }
      }
    }
    const double mt = st / nt, mc = sc / nc;
    const double vt = (sst - nt * mt * mt) / std::max<std::size_t>(nt - 1, 1);
    const double vc = (ssc - nc * mc * mc) / std::max<std::size_t>(nc - 1, 1);
    const double pooled_sd = std::sqrt(0.5 * (vt + vc));
    BalanceReport::Row row;
    row.name = name;
    row.smd_before = pooled_sd > 0 ? (mt - mc) / pooled_sd : 0.0;
    if (nta > 0 && nca > 0)
      row.smd_after = pooled_sd > 0 ? (at / nta - ac / nca) / pooled_sd : 0.0;
    report.rows.push_back(row);
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const BalanceReport::Row& a, const BalanceReport::Row& b) {
                     return std::fabs(a.smd_before) > std::fabs(b.smd_before);
                   });
  return report;
}

}  // namespace causalcmp
