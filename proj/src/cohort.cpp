#include "causalcmp/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <unordered_map>

#include "causalcmp/csv.hpp"
#include "causalcmp/errors.hpp"
#include "causalcmp/glm.hpp"

namespace causalcmp {

namespace {

// days since 1970-01-01 for a civil date (Hinnant's algorithm)
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 + static_cast<unsigned>(d) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::int64_t parse_date(const std::string& s, std::size_t row, const std::string& column) {
  if (s.find('-') != std::string::npos && s.size() >= 8) {
    int y = 0, m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) == 3 && m >= 1 && m <= 12 &&
        d >= 1 && d <= 31)
      return days_from_civil(y, m, d);
    throw BadValueError(row, column, "bad ISO-8601 date '" + s + "'");
  }
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw BadValueError(row, column, "bad date '" + s + "'");
  return v;
}

void check_outcome(double v, OutcomeKind kind, std::size_t row, const std::string& column) {
  if (kind == OutcomeKind::binary && v != 0.0 && v != 1.0)
    throw BadValueError(row, column, "binary outcome must be 0 or 1");
  if (!std::isfinite(v)) throw BadValueError(row, column, "non-finite value");
}

}  // namespace

bool Cohort::has_z() const {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(),
                     [](const ObservationRecord& r) { return r.z.has_value(); });
}

bool Cohort::has_index_dates() const {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(),
                     [](const ObservationRecord& r) { return r.index_date.has_value(); });
}

void Cohort::validate() const {
  if (records.empty()) throw EmptyCohortError("cohort has no records");
  const Eigen::Index d0 = static_cast<Eigen::Index>(w0_names.size());
  const Eigen::Index d1 = static_cast<Eigen::Index>(w1_names.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.w0.size() != d0) throw BadValueError(i, "w0", "confounder dimension mismatch");
    if (r.w1.size() != d1) throw BadValueError(i, "w1", "confounder dimension mismatch");
    if (r.x != 0 && r.x != 1) throw BadValueError(i, "x", "treatment must be 0 or 1");
    if (r.z && *r.z != 0 && *r.z != 1) throw BadValueError(i, "z", "instrument must be 0 or 1");
    check_outcome(r.y0, outcome_kind, i, "y0");
    check_outcome(r.y1, outcome_kind, i, "y1");
  }
}

Cohort Cohort::subset(const std::vector<std::size_t>& idx) const {
  Cohort out;
  out.outcome_kind = outcome_kind;
  out.w0_names = w0_names;
  out.w1_names = w1_names;
  out.records.reserve(idx.size());
  for (std::size_t i : idx) out.records.push_back(records[i]);
  return out;
}

Cohort load_cohort(const std::string& path, const ColumnSchema& schema,
                   OutcomeKind outcome_kind) {
  const CsvTable t = read_csv(path);
  const std::size_t c_pid = t.column(schema.patient_id);
  const std::size_t c_prac = t.column(schema.practice_id);
  const std::size_t c_x = t.column(schema.x);
  const std::size_t c_y0 = t.column(schema.y0);
  const std::size_t c_y1 = t.column(schema.y1);
  const bool have_z = t.has_column(schema.z);
  const bool have_date = t.has_column(schema.index_date);
  const std::size_t c_z = have_z ? t.column(schema.z) : 0;
  const std::size_t c_date = have_date ? t.column(schema.index_date) : 0;

  Cohort cohort;
  cohort.outcome_kind = outcome_kind;
  std::vector<std::size_t> w0_cols, w1_cols;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    const auto& h = t.header[j];
    if (h.rfind(schema.w0_prefix, 0) == 0) {
      w0_cols.push_back(j);
      cohort.w0_names.push_back(h);
    } else if (h.rfind(schema.w1_prefix, 0) == 0) {
      w1_cols.push_back(j);
      cohort.w1_names.push_back(h);
    }
  }

  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    ObservationRecord r;
    r.patient_id = t.cell(i, c_pid);
    r.cluster_id = t.cell(i, c_prac);
    r.x = parse_binary(t.cell(i, c_x), i, schema.x);
    r.y0 = parse_double(t.cell(i, c_y0), i, schema.y0);
    r.y1 = parse_double(t.cell(i, c_y1), i, schema.y1);
    check_outcome(r.y0, outcome_kind, i, schema.y0);
    check_outcome(r.y1, outcome_kind, i, schema.y1);
    if (have_z && !t.cell(i, c_z).empty())
      r.z = parse_binary(t.cell(i, c_z), i, schema.z);
    if (have_date && !t.cell(i, c_date).empty())
      r.index_date = parse_date(t.cell(i, c_date), i, schema.index_date);
    r.w0.resize(static_cast<Eigen::Index>(w0_cols.size()));
    for (std::size_t k = 0; k < w0_cols.size(); ++k)
      r.w0[static_cast<Eigen::Index>(k)] =
          parse_double(t.cell(i, w0_cols[k]), i, cohort.w0_names[k]);
    r.w1.resize(static_cast<Eigen::Index>(w1_cols.size()));
    for (std::size_t k = 0; k < w1_cols.size(); ++k)
      r.w1[static_cast<Eigen::Index>(k)] =
          parse_double(t.cell(i, w1_cols[k]), i, cohort.w1_names[k]);
    cohort.records.push_back(std::move(r));
  }
  cohort.validate();
  return cohort;
}

void save_cohort(const std::string& path, const Cohort& cohort, const ColumnSchema& schema) {
  std::vector<std::string> header = {schema.patient_id, schema.practice_id, schema.x,
                                     schema.y0, schema.y1};
  const bool have_z = cohort.has_z();
  const bool have_date = cohort.has_index_dates();
  if (have_z) header.push_back(schema.z);
  if (have_date) header.push_back(schema.index_date);
  for (const auto& n : cohort.w0_names) header.push_back(n);
  for (const auto& n : cohort.w1_names) header.push_back(n);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(cohort.size());
  for (const auto& r : cohort.records) {
    std::vector<std::string> row = {r.patient_id, r.cluster_id, std::to_string(r.x),
                                    format_double(r.y0), format_double(r.y1)};
    if (have_z) row.push_back(std::to_string(*r.z));
    if (have_date) row.push_back(std::to_string(*r.index_date));
    for (Eigen::Index k = 0; k < r.w0.size(); ++k) row.push_back(format_double(r.w0[k]));
    for (Eigen::Index k = 0; k < r.w1.size(); ++k) row.push_back(format_double(r.w1[k]));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

PooledDiDView pool_for_did(const Cohort& cohort) {
  cohort.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(cohort.size());
  const Eigen::Index d = static_cast<Eigen::Index>(cohort.w0_names.size());
  if (cohort.w1_names.size() != cohort.w0_names.size())
    throw DimensionMismatchError("pool_for_did needs matching W0/W1 dimensions");

  PooledDiDView v;
  v.y.resize(2 * n);
  v.period.resize(2 * n);
  v.x_star.resize(2 * n);
  v.x_star_by_p.resize(2 * n);
  v.w.resize(2 * n, d);
  v.w_by_p.resize(2 * n, d);
  const bool have_z = cohort.has_z();
  if (have_z) v.z = Eigen::VectorXd(2 * n);
  v.w_names.assign(cohort.w0_names.begin(), cohort.w0_names.end());

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = cohort.records[static_cast<std::size_t>(i)];
    // p = 0 block
    v.y[i] = r.y0;
    v.period[i] = 0.0;
    v.x_star[i] = r.x;
    v.x_star_by_p[i] = 0.0;
    v.w.row(i) = r.w0.transpose();
    v.w_by_p.row(i).setZero();
    // p = 1 block
    v.y[n + i] = r.y1;
    v.period[n + i] = 1.0;
    v.x_star[n + i] = r.x;
    v.x_star_by_p[n + i] = r.x;
    v.w.row(n + i) = r.w1.transpose();
    v.w_by_p.row(n + i) = r.w1.transpose();
    if (have_z) {
      (*v.z)[i] = *r.z;
      (*v.z)[n + i] = *r.z;
    }
  }
  return v;
}

std::vector<PrescriptionEvent> load_prescription_events(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::size_t c_prac = t.column("practice_id");
  const std::size_t c_pid = t.column("patient_id");
  const std::size_t c_date = t.column("date");
  const std::size_t c_drug = t.column("drug");
  std::vector<PrescriptionEvent> events;
  events.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    PrescriptionEvent e;
    e.cluster_id = t.cell(i, c_prac);
    e.patient_id = t.cell(i, c_pid);
    e.date = parse_date(t.cell(i, c_date), i, "date");
    e.drug = parse_binary(t.cell(i, c_drug), i, "drug");
    events.push_back(std::move(e));
  }
  return events;
}

IvBuildResult build_preference_iv(const std::vector<PrescriptionEvent>& events,
                                  const Cohort& cohort, IvMode mode,
                                  std::optional<std::int64_t> burn_in_end) {
  cohort.validate();
  if (!cohort.has_index_dates())
    throw Error("build_preference_iv: every patient needs an index_date");

  // events per cluster, ordered by (date, patient_id); same-date ties break
  // on patient_id for determinism
  std::unordered_map<std::string, std::vector<PrescriptionEvent>> by_cluster;
  for (const auto& e : events) by_cluster[e.cluster_id].push_back(e);
  for (auto& [_, v] : by_cluster)
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      return a.date != b.date ? a.date < b.date : a.patient_id < b.patient_id;
    });

  for (const auto& r : cohort.records)
    if (!by_cluster.count(r.cluster_id))
      throw UnknownClusterError("no prescription history for practice '" + r.cluster_id + "'");

  IvBuildResult out;
  out.cohort.outcome_kind = cohort.outcome_kind;
  out.cohort.w0_names = cohort.w0_names;
  out.cohort.w1_names = cohort.w1_names;

  if (mode == IvMode::dynamic) {
    for (const auto& r : cohort.records) {
      const auto& ev = by_cluster[r.cluster_id];
      const PrescriptionEvent* last = nullptr;
      for (const auto& e : ev) {
        if (e.date < *r.index_date) last = &e;
        else break;
      }
      if (!last) {
        out.excluded_patient_ids.push_back(r.patient_id);
        continue;
      }
      ObservationRecord kept = r;
      kept.z = last->drug;
      out.cohort.records.push_back(std::move(kept));
    }
  } else {
    std::int64_t cutoff;
    if (burn_in_end) {
      cutoff = *burn_in_end;
    } else {
      cutoff = *cohort.records.front().index_date;
      for (const auto& r : cohort.records) cutoff = std::min(cutoff, *r.index_date);
    }
    // one z per practice from the final burn-in event
    std::unordered_map<std::string, int> practice_z;
    std::set<std::string> burn_in_patients;
    for (const auto& [cid, ev] : by_cluster) {
      const PrescriptionEvent* last = nullptr;
      for (const auto& e : ev) {
        if (e.date < cutoff) {
          last = &e;
          burn_in_patients.insert(e.patient_id);
        } else {
          break;
        }
      }
      if (last) practice_z[cid] = last->drug;
    }
    for (const auto& r : cohort.records) {
      auto it = practice_z.find(r.cluster_id);
      if (it == practice_z.end() || burn_in_patients.count(r.patient_id) ||
          *r.index_date < cutoff) {
        out.excluded_patient_ids.push_back(r.patient_id);
        continue;
      }
      ObservationRecord kept = r;
      kept.z = it->second;
      out.cohort.records.push_back(std::move(kept));
    }
  }

  if (out.cohort.records.empty())
    throw EmptyCohortError("build_preference_iv excluded every patient");
  return out;
}

double first_stage_f_statistic(const Cohort& cohort) {
  cohort.validate();
  if (!cohort.has_z()) throw MissingInstrumentError("cohort has no instrument column");
  const Eigen::Index n = static_cast<Eigen::Index>(cohort.size());
  const Eigen::Index d = static_cast<Eigen::Index>(cohort.w1_names.size());

  Eigen::VectorXd x(n);
  Eigen::MatrixXd full(n, d + 2), reduced(n, d + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = cohort.records[static_cast<std::size_t>(i)];
    x[i] = r.x;
    full(i, 0) = 1.0;
    full(i, 1) = *r.z;
    reduced(i, 0) = 1.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      full(i, 2 + k) = r.w1[k];
      reduced(i, 1 + k) = r.w1[k];
    }
  }
  auto rss = [&](const Eigen::MatrixXd& X) {
    Eigen::VectorXd beta = Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(X).solve(x);
    return (x - X * beta).squaredNorm();
  };
  const double rss_full = rss(full);
  const double rss_reduced = rss(reduced);
  const double dof = static_cast<double>(n - (d + 2));
  if (rss_full <= 0.0) return std::numeric_limits<double>::infinity();
  return (rss_reduced - rss_full) / (rss_full / dof);
}

}  // namespace causalcmp
