#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace causalcmp {

enum class OutcomeKind { binary, continuous };

struct ObservationRecord {
  std::string patient_id;
  std::string cluster_id;
  int x = 0;                       // treatment, 0/1
  double y0 = 0.0;                 // prior-period outcome
  double y1 = 0.0;                 // study-period outcome
  Eigen::VectorXd w0;              // prior-period confounders
  Eigen::VectorXd w1;              // study-period confounders
  std::optional<int> z;            // instrument, 0/1
  std::optional<std::int64_t> index_date;
};

struct Cohort {
  std::vector<ObservationRecord> records;
  OutcomeKind outcome_kind = OutcomeKind::binary;
  std::vector<std::string> w0_names;
  std::vector<std::string> w1_names;

  std::size_t size() const { return records.size(); }
  bool has_z() const;
  bool has_index_dates() const;
  void validate() const;
  /// New cohort keeping records at the given indices, in order.
  Cohort subset(const std::vector<std::size_t>& idx) const;
};

/// 2n-row stacked view for the pooled difference-in-differences
/// regression: all p=0 rows in record order, then all p=1 rows.
struct PooledDiDView {
  Eigen::VectorXd y;
  Eigen::VectorXd period;          // p
  Eigen::VectorXd x_star;
  Eigen::VectorXd x_star_by_p;
  Eigen::MatrixXd w;               // stacked W0 / W1
  Eigen::MatrixXd w_by_p;
  std::optional<Eigen::VectorXd> z;
  std::vector<std::string> w_names;
};

struct ColumnSchema {
  std::string patient_id = "patient_id";
  std::string practice_id = "practice_id";
  std::string x = "x";
  std::string y0 = "y0";
  std::string y1 = "y1";
  std::string z = "z";                      // optional column
  std::string index_date = "index_date";    // optional column
  std::string w0_prefix = "w0_";
  std::string w1_prefix = "w1_";
};

Cohort load_cohort(const std::string& path, const ColumnSchema& schema,
                   OutcomeKind outcome_kind);
void save_cohort(const std::string& path, const Cohort& cohort, const ColumnSchema& schema);

PooledDiDView pool_for_did(const Cohort& cohort);

/// Prescription history entry used for the preference instrument.
struct PrescriptionEvent {
  std::string cluster_id;
  std::string patient_id;
  std::int64_t date = 0;
  int drug = 0;  // 0 = treatment_0, 1 = treatment_1
};

std::vector<PrescriptionEvent> load_prescription_events(const std::string& path);

enum class IvMode { static_burn_in, dynamic };

struct IvBuildResult {
  Cohort cohort;                            // retained records with z filled
  std::vector<std::string> excluded_patient_ids;
};

/// Fills z from practice prescribing history.
/// dynamic: z = drug of the most recent event in the patient's practice
///   strictly before their index date; patients with no prior event are
///   excluded.
/// static_burn_in (default rule): one z per practice, from the final event
///   strictly before `burn_in_end`; patients whose own prescription falls in
///   the burn-in window are excluded, as are all patients of practices with
///   no burn-in event.
IvBuildResult build_preference_iv(const std::vector<PrescriptionEvent>& events,
                                  const Cohort& cohort, IvMode mode,
                                  std::optional<std::int64_t> burn_in_end = {});

/// Partial F-statistic for adding Z to the regression of X on W1.
double first_stage_f_statistic(const Cohort& cohort);

}  // namespace causalcmp
