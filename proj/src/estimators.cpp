#include "causalcmp/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "causalcmp/errors.hpp"
#include "causalcmp/rng.hpp"
#include "causalcmp/stats.hpp"

namespace causalcmp {

namespace {

constexpr double kZeroDenominator = 1e-12;

struct Columns {
  Eigen::VectorXd y0, y1, x, z;
  Eigen::MatrixXd w1;
  bool have_z = false;
};

Columns extract(const Cohort& cohort) {
  const Eigen::Index n = static_cast<Eigen::Index>(cohort.size());
  const Eigen::Index d = static_cast<Eigen::Index>(cohort.w1_names.size());
  Columns c;
  c.y0.resize(n);
  c.y1.resize(n);
  c.x.resize(n);
  c.w1.resize(n, d);
  c.have_z = cohort.has_z();
  if (c.have_z) c.z.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = cohort.records[static_cast<std::size_t>(i)];
    c.y0[i] = r.y0;
    c.y1[i] = r.y1;
    c.x[i] = r.x;
    if (c.have_z) c.z[i] = *r.z;
    c.w1.row(i) = r.w1.transpose();
  }
  return c;
}

void require_z(const Columns& c) {
  if (!c.have_z) throw MissingInstrumentError("estimator requires an instrument column");
}

Link outcome_link(const Cohort& cohort) {
  return cohort.outcome_kind == OutcomeKind::binary ? Link::logit : Link::identity;
}

// AME point value without the delta-method gradient
double ame_estimate_only(const GlmFit& fit, const Eigen::MatrixXd& X, Eigen::Index target) {
  if (fit.link == Link::identity) return fit.coefficients[target];
  Eigen::MatrixXd X1 = X, X0 = X;
  X1.col(target).setOnes();
  X0.col(target).setZero();
  const Eigen::VectorXd e1 = X1 * fit.coefficients;
  const Eigen::VectorXd e0 = X0 * fit.coefficients;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) sum += sigmoid(e1[i]) - sigmoid(e0[i]);
  return sum / static_cast<double>(X.rows());
}

DesignSpec cat_design(const Cohort& cohort, const Columns& c, bool with_z) {
  const Eigen::Index n = c.y1.size();
  const Eigen::Index d = c.w1.cols();
  DesignSpec spec;
  spec.link = outcome_link(cohort);
  spec.response = c.y1;
  spec.predictors.resize(n, 2 + d + (with_z ? 1 : 0));
  spec.predictors.col(0).setOnes();
  spec.predictors.col(1) = c.x;
  spec.names = {"(Intercept)", "x"};
  for (Eigen::Index k = 0; k < d; ++k) {
    spec.predictors.col(2 + k) = c.w1.col(k);
    spec.names.push_back(cohort.w1_names[static_cast<std::size_t>(k)]);
  }
  if (with_z) {
    spec.predictors.col(2 + d) = c.z;
    spec.names.push_back("z");
  }
  return spec;
}

DesignSpec did_design(const Cohort& cohort, const PooledDiDView& v, bool with_z) {
  const Eigen::Index m = v.y.size();
  const Eigen::Index d = v.w.cols();
  DesignSpec spec;
  spec.link = outcome_link(cohort);
  spec.response = v.y;
  spec.predictors.resize(m, 4 + 2 * d + (with_z ? 2 : 0));
  spec.predictors.col(0).setOnes();
  spec.predictors.col(1) = v.period;
  spec.predictors.col(2) = v.x_star;
  spec.predictors.col(3) = v.x_star_by_p;
  spec.names = {"(Intercept)", "p", "x_star", "p:x_star"};
  for (Eigen::Index k = 0; k < d; ++k) {
    spec.predictors.col(4 + 2 * k) = v.w.col(k);
    spec.predictors.col(5 + 2 * k) = v.w_by_p.col(k);
    spec.names.push_back(v.w_names[static_cast<std::size_t>(k)]);
    spec.names.push_back(v.w_names[static_cast<std::size_t>(k)] + ":p");
  }
  if (with_z) {
    spec.predictors.col(4 + 2 * d) = *v.z;
    spec.predictors.col(5 + 2 * d) = (v.z->array() * v.period.array()).matrix();
    spec.names.push_back("z");
    spec.names.push_back("z:p");
  }
  return spec;
}

// First stage of TSLS / POA-IV; identity link (linear probability for
// binary X). with_interaction adds Y0 and Y0*Z.
DesignSpec first_stage_design(const Cohort& cohort, const Columns& c, bool with_interaction) {
  const Eigen::Index n = c.x.size();
  const Eigen::Index d = c.w1.cols();
  DesignSpec spec;
  spec.link = Link::identity;
  spec.response = c.x;
  spec.predictors.resize(n, 2 + d + (with_interaction ? 2 : 0));
  spec.predictors.col(0).setOnes();
  spec.predictors.col(1) = c.z;
  spec.names = {"(Intercept)", "z"};
  for (Eigen::Index k = 0; k < d; ++k) {
    spec.predictors.col(2 + k) = c.w1.col(k);
    spec.names.push_back(cohort.w1_names[static_cast<std::size_t>(k)]);
  }
  if (with_interaction) {
    spec.predictors.col(2 + d) = c.y0;
    spec.predictors.col(3 + d) = (c.y0.array() * c.z.array()).matrix();
    spec.names.push_back("y0");
    spec.names.push_back("y0:z");
  }
  return spec;
}

DesignSpec second_stage_design(const Cohort& cohort, const Columns& c,
                               const Eigen::VectorXd& xhat, bool with_z, bool with_y0) {
  const Eigen::Index n = c.y1.size();
  const Eigen::Index d = c.w1.cols();
  DesignSpec spec;
  spec.link = outcome_link(cohort);
  spec.response = c.y1;
  spec.predictors.resize(n, 2 + d + (with_z ? 1 : 0) + (with_y0 ? 1 : 0));
  spec.predictors.col(0).setOnes();
  spec.predictors.col(1) = xhat;
  spec.names = {"(Intercept)", "xhat"};
  Eigen::Index j = 2;
  for (Eigen::Index k = 0; k < d; ++k, ++j) {
    spec.predictors.col(j) = c.w1.col(k);
    spec.names.push_back(cohort.w1_names[static_cast<std::size_t>(k)]);
  }
  if (with_z) {
    spec.predictors.col(j++) = c.z;
    spec.names.push_back("z");
  }
  if (with_y0) {
    spec.predictors.col(j++) = c.y0;
    spec.names.push_back("y0");
  }
  return spec;
}

struct TwoStageFit {
  GlmFit stage1;
  GlmFit stage2;
  DesignSpec stage1_spec;
  DesignSpec stage2_spec;
  double estimate = 0.0;
};

TwoStageFit two_stage(const Cohort& cohort, const Columns& c, bool poa,
                      const EstimatorOptions& opt) {
  TwoStageFit out;
  DesignSpec s1 = first_stage_design(cohort, c, poa);
  out.stage1 = fit_ols(s1);
  const std::string iv_term = poa ? "y0:z" : "z";
  if (std::fabs(out.stage1.coef(iv_term)) < kZeroDenominator)
    throw ZeroDenominatorError("first-stage coefficient on " + iv_term +
                               " is numerically zero");
  const Eigen::VectorXd xhat = s1.predictors * out.stage1.coefficients;
  out.stage1_spec = std::move(s1);
  out.stage2_spec =
      second_stage_design(cohort, c, xhat, /*with_z=*/poa, poa && opt.poa_include_y0_stage2);
  out.stage2 = fit_glm(out.stage2_spec);
  if (out.stage2.link == Link::identity) {
    out.estimate = out.stage2.coef("xhat");
  } else {
    // average-derivative marginal effect: the fitted treatment is a
    // continuous regressor, so the risk difference per unit of xhat is
    // b_x * mean(mu (1 - mu)). A 0/1 toggle would extrapolate far outside
    // the fitted-value support and picks up curvature error there.
    const Eigen::VectorXd eta = out.stage2_spec.predictors * out.stage2.coefficients;
    double mean_w = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double m = sigmoid(eta[i]);
      mean_w += m * (1.0 - m);
    }
    mean_w /= static_cast<double>(eta.size());
    out.estimate = out.stage2.coef("xhat") * mean_w;
  }
  return out;
}

double cat_point(const Cohort& cohort, const Columns& c, bool with_z) {
  DesignSpec spec = cat_design(cohort, c, with_z);
  GlmFit fit = fit_glm(spec);
  return ame_estimate_only(fit, spec.predictors, fit.term_index("x"));
}

// Eq.-style logit DiD contrast: the treatment AME averaged over the
// study-period rows minus the same contrast averaged over the prior-period
// rows. Averaging each period's contrast over its own rows avoids the
// cross-period extrapolation a pooled-row double difference would add.
AmeResult did_logit_ame(const GlmFit& fit, const DesignSpec& spec, bool want_se) {
  const Eigen::Index jp = fit.term_index("p");
  const Eigen::Index jx = fit.term_index("x_star");
  const Eigen::Index jxp = fit.term_index("p:x_star");
  const Eigen::MatrixXd& X = spec.predictors;
  const Eigen::VectorXd& b = fit.coefficients;

  double sum1 = 0.0, sum0 = 0.0;
  Eigen::Index n1 = 0, n0 = 0;
  Eigen::VectorXd g1 = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd g0 = Eigen::VectorXd::Zero(b.size());
  Eigen::RowVectorXd row;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    row = X.row(i);
    const double p = X(i, jp);
    row[jx] = 1.0;
    row[jxp] = p;
    const double eta_t = row.dot(b);
    row[jx] = 0.0;
    row[jxp] = 0.0;
    const double eta_c = row.dot(b);
    const double mt = sigmoid(eta_t), mc = sigmoid(eta_c);
    const double contrast = mt - mc;
    Eigen::VectorXd* const g = p == 1.0 ? &g1 : &g0;
    if (p == 1.0) {
      sum1 += contrast;
      ++n1;
    } else {
      sum0 += contrast;
      ++n0;
    }
    if (want_se) {
      row[jx] = 1.0;
      row[jxp] = p;
      *g += mt * (1.0 - mt) * row.transpose();
      row[jx] = 0.0;
      row[jxp] = 0.0;
      *g -= mc * (1.0 - mc) * row.transpose();
    }
  }
  if (n1 == 0 || n0 == 0) throw EmptyCohortError("DiD needs rows in both periods");

  AmeResult out;
  out.target_term = "p:x_star";
  out.estimate = sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
  if (want_se) {
    const Eigen::VectorXd grad =
        g1 / static_cast<double>(n1) - g0 / static_cast<double>(n0);
    out.se = std::sqrt(std::max(0.0, grad.dot(fit.robust_covariance * grad)));
  }
  return out;
}

double did_point(const Cohort& cohort, bool with_z) {
  PooledDiDView v = pool_for_did(cohort);
  DesignSpec spec = did_design(cohort, v, with_z);
  GlmFit fit = fit_glm(spec);
  if (fit.link == Link::identity) return fit.coef("p:x_star");
  return did_logit_ame(fit, spec, /*want_se=*/false).estimate;
}

double iv_ratio_point(const Columns& c) {
  double n1 = 0, n0 = 0, sy1 = 0, sy0 = 0, sx1 = 0, sx0 = 0;
  for (Eigen::Index i = 0; i < c.y1.size(); ++i) {
    if (c.z[i] == 1.0) {
      ++n1;
      sy1 += c.y1[i];
      sx1 += c.x[i];
    } else {
      ++n0;
      sy0 += c.y1[i];
      sx0 += c.x[i];
    }
  }
  if (n1 == 0 || n0 == 0) throw ZeroDenominatorError("instrument has only one level");
  const double den = sx1 / n1 - sx0 / n0;
  if (std::fabs(den) < kZeroDenominator)
    throw ZeroDenominatorError("X-Z association is zero");
  return (sy1 / n1 - sy0 / n0) / den;
}

std::vector<std::string> psm_covariates(const Cohort& cohort, const EstimatorOptions& opt) {
  return opt.psm_covariates.empty() ? cohort.w1_names : opt.psm_covariates;
}

// Plug-in SE for a two-stage fit: sandwich covariance of the stacked
// M-estimator (first-stage OLS moments over second-stage score), which
// carries the generated-regressor uncertainty into the second stage, then
// the delta method through the average-derivative AME map
// b_x * mean(mu (1 - mu)). The logit weights depend on xhat, so the AME
// gradient has a first-stage block as well.
double two_stage_plugin_se(const TwoStageFit& ts, const Columns& c) {
  const Eigen::MatrixXd& S = ts.stage1_spec.predictors;
  const Eigen::MatrixXd& H = ts.stage2_spec.predictors;
  const Eigen::VectorXd& b = ts.stage2.coefficients;
  const Eigen::Index n = S.rows();
  const Eigen::Index p1 = S.cols();
  const Eigen::Index p2 = H.cols();
  const Eigen::Index jx = ts.stage2.term_index("xhat");
  const bool logit = ts.stage2.link == Link::logit;

  const Eigen::VectorXd u = c.x - S * ts.stage1.coefficients;
  const Eigen::VectorXd eta = H * b;
  Eigen::VectorXd mu(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    mu[i] = logit ? sigmoid(eta[i]) : eta[i];
    w[i] = logit ? mu[i] * (1.0 - mu[i]) : 1.0;
  }
  const Eigen::VectorXd r = ts.stage2_spec.response - mu;

  // negated stacked Jacobian, block lower triangular
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p1 + p2, p1 + p2);
  A.topLeftCorner(p1, p1) = S.transpose() * S;
  A.bottomRightCorner(p2, p2) = H.transpose() * w.asDiagonal() * H;
  Eigen::MatrixXd c21 =
      H.transpose() * (w.array() * b[jx]).matrix().asDiagonal() * S;
  c21.row(jx) -= (S.transpose() * r).transpose();  // d(h r)/da via the xhat column
  A.bottomLeftCorner(p2, p1) = c21;

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p1 + p2);
  if (!logit) {
    grad[p1 + jx] = 1.0;
  } else {
    // AME = b_jx * Wbar with Wbar = mean(w_i); dw_i/deta_i = w_i (1 - 2 mu_i)
    const double inv_n = 1.0 / static_cast<double>(n);
    double wbar = 0.0;
    Eigen::VectorXd ga = Eigen::VectorXd::Zero(p1);
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(p2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dw = w[i] * (1.0 - 2.0 * mu[i]);
      wbar += w[i];
      gb.noalias() += dw * H.row(i).transpose();
      ga.noalias() += dw * S.row(i).transpose();
    }
    wbar *= inv_n;
    grad.head(p1) = (b[jx] * b[jx] * inv_n) * ga;  // eta depends on a via the xhat column
    grad.tail(p2) = (b[jx] * inv_n) * gb;
    grad[p1 + jx] += wbar;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(A.transpose());
  if (!lu.isInvertible())
    throw RankDeficientError("two-stage SE: stacked information not invertible");
  const Eigen::VectorXd t = lu.solve(grad);
  const Eigen::VectorXd t1 = t.head(p1), t2 = t.tail(p2);
  // quadratic form grad' A^-1 (sum_i m_i m_i') A^-T grad with
  // m_i = (s_i u_i; h_i r_i)
  double var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q = u[i] * S.row(i).dot(t1) + r[i] * H.row(i).dot(t2);
    var += q * q;
  }
  return std::sqrt(var);
}

double psm_cat_point(const Cohort& cohort, const EstimatorOptions& opt) {
  MatchResult m = propensity_match(cohort, psm_covariates(cohort, opt));
  if (m.pairs.empty()) throw EmptyMatchedSetError("matching produced no pairs");
  const Cohort sub = cohort.subset(m.matched_rows);
  const Columns c = extract(sub);
  return cat_point(sub, c, false);
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::CaT: return "CaT";
    case Method::CaT_with_Z: return "CaT_with_Z";
    case Method::IV_ratio: return "IV_ratio";
    case Method::IV_TSLS: return "IV";
    case Method::POA_IV: return "POA_IV";
    case Method::DiD: return "DiD";
    case Method::DiD_with_Z: return "DiD_with_Z";
    case Method::PSM_CaT: return "PSM";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "CaT" || name == "cat") return Method::CaT;
  if (name == "CaT_with_Z" || name == "cat+z") return Method::CaT_with_Z;
  if (name == "IV_ratio" || name == "ratio") return Method::IV_ratio;
  if (name == "IV" || name == "iv" || name == "tsls") return Method::IV_TSLS;
  if (name == "POA_IV" || name == "poa-iv" || name == "poa") return Method::POA_IV;
  if (name == "DiD" || name == "did") return Method::DiD;
  if (name == "DiD_with_Z" || name == "did+z") return Method::DiD_with_Z;
  if (name == "PSM" || name == "psm") return Method::PSM_CaT;
  throw ConfigError("unknown method '" + name + "'");
}

void finalize_result(EstimateResult& r) {
  r.ci_low = r.estimate - z_975 * r.se;
  r.ci_high = r.estimate + z_975 * r.se;
  r.p_value = two_sided_p(r.estimate, r.se);
}

std::vector<std::size_t> bootstrap_indices(std::uint64_t seed, std::uint64_t replicate,
                                           std::size_t n) {
  CounterRng rng = CounterRng(CounterRng::derive(seed, stream_id::bootstrap)).stream(replicate);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i)
    idx[i] = static_cast<std::size_t>(rng.next_below(n));
  return idx;
}

double bootstrap_se(const std::function<double(const Cohort&)>& f, const Cohort& cohort,
                    int B, std::uint64_t seed, double max_fail_frac) {
  if (B < 2) throw ConfigError("bootstrap_se: B must be >= 2");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(B));
  int failed = 0;
  for (int b = 0; b < B; ++b) {
    const Cohort sub =
        cohort.subset(bootstrap_indices(seed, static_cast<std::uint64_t>(b), cohort.size()));
    try {
      values.push_back(f(sub));
    } catch (const Error&) {
      ++failed;
    }
  }
  if (failed > max_fail_frac * B)
    throw TooManyFailedReplicatesError(std::to_string(failed) + " of " + std::to_string(B) +
                                       " bootstrap replicates failed");
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

EstimateResult estimate_cat(const Cohort& cohort, const EstimatorOptions& options) {
  cohort.validate();
  const Columns c = extract(cohort);
  if (options.include_z_as_covariate) require_z(c);
  DesignSpec spec = cat_design(cohort, c, options.include_z_as_covariate);
  GlmFit fit = fit_glm(spec);
  AmeResult ame = average_marginal_effect(fit, spec, "x", /*robust=*/true);

  EstimateResult r;
  r.method = options.include_z_as_covariate ? Method::CaT_with_Z : Method::CaT;
  r.estimate = ame.estimate;
  r.se = ame.se;
  r.n_used = cohort.size();
  r.diagnostics["irls_iterations"] = fit.iterations;
  finalize_result(r);
  return r;
}

EstimateResult estimate_iv_ratio(const Cohort& cohort, const EstimatorOptions&) {
  cohort.validate();
  const Columns c = extract(cohort);
  require_z(c);
  const double est = iv_ratio_point(c);

  // delta method over the four group means, with the within-group
  // covariance of (Y1, X)
  double n1 = 0, n0 = 0;
  double my1 = 0, my0 = 0, mx1 = 0, mx0 = 0;
  for (Eigen::Index i = 0; i < c.y1.size(); ++i) {
    if (c.z[i] == 1.0) {
      ++n1;
      my1 += c.y1[i];
      mx1 += c.x[i];
    } else {
      ++n0;
      my0 += c.y1[i];
      mx0 += c.x[i];
    }
  }
  my1 /= n1; mx1 /= n1; my0 /= n0; mx0 /= n0;
  double vy1 = 0, vx1 = 0, cxy1 = 0, vy0 = 0, vx0 = 0, cxy0 = 0;
  for (Eigen::Index i = 0; i < c.y1.size(); ++i) {
    if (c.z[i] == 1.0) {
      vy1 += (c.y1[i] - my1) * (c.y1[i] - my1);
      vx1 += (c.x[i] - mx1) * (c.x[i] - mx1);
      cxy1 += (c.y1[i] - my1) * (c.x[i] - mx1);
    } else {
      vy0 += (c.y1[i] - my0) * (c.y1[i] - my0);
      vx0 += (c.x[i] - mx0) * (c.x[i] - mx0);
      cxy0 += (c.y1[i] - my0) * (c.x[i] - mx0);
    }
  }
  vy1 /= n1 * (n1 - 1); vx1 /= n1 * (n1 - 1); cxy1 /= n1 * (n1 - 1);
  vy0 /= n0 * (n0 - 1); vx0 /= n0 * (n0 - 1); cxy0 /= n0 * (n0 - 1);
  const double den = mx1 - mx0;
  const double gy = 1.0 / den;
  const double gx = -est / den;
  const double var = gy * gy * (vy1 + vy0) + gx * gx * (vx1 + vx0) +
                     2.0 * gy * gx * (cxy1 + cxy0);

  EstimateResult r;
  r.method = Method::IV_ratio;
  r.estimate = est;
  r.se = std::sqrt(std::max(0.0, var));
  r.n_used = cohort.size();
  r.diagnostics["denominator"] = den;
  finalize_result(r);
  return r;
}

EstimateResult estimate_tsls(const Cohort& cohort, const EstimatorOptions& options) {
  cohort.validate();
  const Columns c = extract(cohort);
  require_z(c);
  const bool plugin = options.se_mode == SeMode::plugin;
  TwoStageFit ts = two_stage(cohort, c, /*poa=*/false, options);

  EstimateResult r;
  r.method = Method::IV_TSLS;
  r.estimate = ts.estimate;
  r.n_used = cohort.size();
  const double f = first_stage_f_statistic(cohort);
  r.diagnostics["first_stage_F"] = f;
  if (f < 10.0) r.diagnostics["weak_instrument"] = 1.0;

  if (plugin) {
    r.se = two_stage_plugin_se(ts, c);
  } else {
    EstimatorOptions point_opt = options;
    r.se = bootstrap_se(
        [&point_opt](const Cohort& sub) {
          const Columns cs = extract(sub);
          return two_stage(sub, cs, false, point_opt).estimate;
        },
        cohort, options.bootstrap_B, options.seed);
  }
  finalize_result(r);
  return r;
}

EstimateResult estimate_poa_iv(const Cohort& cohort, const EstimatorOptions& options) {
  cohort.validate();
  const Columns c = extract(cohort);
  require_z(c);
  const bool plugin = options.se_mode == SeMode::plugin;
  TwoStageFit ts = two_stage(cohort, c, /*poa=*/true, options);

  EstimateResult r;
  r.method = Method::POA_IV;
  r.estimate = ts.estimate;
  r.n_used = cohort.size();
  // partial F of the single interaction column = squared t-statistic
  const double t = ts.stage1.coef("y0:z") / ts.stage1.se("y0:z");
  r.diagnostics["interaction_F"] = t * t;
  if (t * t < 10.0) r.diagnostics["weak_interaction"] = 1.0;

  if (plugin) {
    r.se = two_stage_plugin_se(ts, c);
  } else {
    EstimatorOptions point_opt = options;
    r.se = bootstrap_se(
        [&point_opt](const Cohort& sub) {
          const Columns cs = extract(sub);
          return two_stage(sub, cs, true, point_opt).estimate;
        },
        cohort, options.bootstrap_B, options.seed);
  }
  finalize_result(r);
  return r;
}

EstimateResult estimate_did(const Cohort& cohort, const EstimatorOptions& options) {
  cohort.validate();
  if (options.include_z_as_covariate && !cohort.has_z())
    throw MissingInstrumentError("DiD with Z requires an instrument column");
  PooledDiDView v = pool_for_did(cohort);
  DesignSpec spec = did_design(cohort, v, options.include_z_as_covariate);
  GlmFit fit = fit_glm(spec);

  EstimateResult r;
  r.method = options.include_z_as_covariate ? Method::DiD_with_Z : Method::DiD;
  r.n_used = cohort.size();
  r.diagnostics["irls_iterations"] = fit.iterations;
  if (fit.link == Link::identity) {
    // SE straight from the Hessian of the pooled regression
    r.estimate = fit.coef("p:x_star");
    r.se = fit.se("p:x_star");
  } else {
    AmeResult ame = did_logit_ame(fit, spec, options.se_mode == SeMode::plugin);
    r.estimate = ame.estimate;
    if (options.se_mode == SeMode::plugin) {
      r.se = ame.se;
    } else {
      const bool with_z = options.include_z_as_covariate;
      r.se = bootstrap_se(
          [with_z](const Cohort& sub) { return did_point(sub, with_z); }, cohort,
          options.bootstrap_B, options.seed);
    }
  }
  finalize_result(r);
  return r;
}

EstimateResult estimate_psm_cat(const Cohort& cohort, const MatchResult& match,
                                const EstimatorOptions& options) {
  cohort.validate();
  if (match.pairs.empty()) throw EmptyMatchedSetError("matching produced no pairs");
  std::vector<std::size_t> idx = match.matched_rows;
  if (idx.empty())
    for (std::size_t i = 0; i < cohort.size(); ++i)
      if (match.matched_ids.count(cohort.records[i].patient_id)) idx.push_back(i);
  if (idx.empty()) throw EmptyMatchedSetError("no cohort records in matched set");
  EstimatorOptions cat_opt = options;
  cat_opt.include_z_as_covariate = false;
  EstimateResult r = estimate_cat(cohort.subset(idx), cat_opt);
  r.method = Method::PSM_CaT;
  r.diagnostics["n_pairs"] = static_cast<double>(match.pairs.size());
  return r;
}

double point_estimate(Method m, const Cohort& cohort, const EstimatorOptions& options) {
  const Columns c = extract(cohort);
  switch (m) {
    case Method::CaT:
      return cat_point(cohort, c, false);
    case Method::CaT_with_Z:
      require_z(c);
      return cat_point(cohort, c, true);
    case Method::IV_ratio:
      require_z(c);
      return iv_ratio_point(c);
    case Method::IV_TSLS:
      require_z(c);
      return two_stage(cohort, c, false, options).estimate;
    case Method::POA_IV:
      require_z(c);
      return two_stage(cohort, c, true, options).estimate;
    case Method::DiD:
      return did_point(cohort, false);
    case Method::DiD_with_Z:
      require_z(c);
      return did_point(cohort, true);
    case Method::PSM_CaT:
      return psm_cat_point(cohort, options);
  }
  throw ConfigError("unknown method");
}

EstimateResult estimate(Method m, const Cohort& cohort, const EstimatorOptions& options) {
  EstimatorOptions opt = options;
  switch (m) {
    case Method::CaT:
      opt.include_z_as_covariate = false;
      return estimate_cat(cohort, opt);
    case Method::CaT_with_Z:
      opt.include_z_as_covariate = true;
      return estimate_cat(cohort, opt);
    case Method::IV_ratio:
      return estimate_iv_ratio(cohort, opt);
    case Method::IV_TSLS:
      return estimate_tsls(cohort, opt);
    case Method::POA_IV:
      return estimate_poa_iv(cohort, opt);
    case Method::DiD:
      opt.include_z_as_covariate = false;
      return estimate_did(cohort, opt);
    case Method::DiD_with_Z:
      opt.include_z_as_covariate = true;
      return estimate_did(cohort, opt);
    case Method::PSM_CaT: {
      MatchResult m2 = propensity_match(cohort, opt.psm_covariates.empty()
                                                    ? cohort.w1_names
                                                    : opt.psm_covariates);
      return estimate_psm_cat(cohort, m2, opt);
    }
  }
  throw ConfigError("unknown method");
}

}  // namespace causalcmp
