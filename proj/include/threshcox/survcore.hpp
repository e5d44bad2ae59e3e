#pragma once

#include <Eigen/Core>
#include <vector>

#include "threshcox/errors.hpp"

namespace threshcox {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One individual's observed data: entry time T~, follow-up T = min(T0, C),
/// event flag delta, surrogate W, error-free covariates Z, optional stratum.
struct SubjectRecord {
  double entry_time = 0.0;
  double followup_time = 0.0;
  bool event = false;
  double surrogate = 0.0;
  Vec covariates;  // length p, p uniform across the cohort
  int stratum = 0;
};

/// Immutable cohort with per-stratum risk-set machinery.
/// at_risk(i, t) = I(entry_i <= t <= followup_i).
class Cohort {
 public:
  static Cohort build(std::vector<SubjectRecord> records);

  int n() const { return static_cast<int>(subjects_.size()); }
  int p() const { return p_; }
  int n_strata() const { return static_cast<int>(strata_.size()); }
  double max_followup() const { return max_followup_; }

  const SubjectRecord& subject(int i) const { return subjects_[i]; }
  const std::vector<SubjectRecord>& subjects() const { return subjects_; }

  bool at_risk(int i, double t) const {
    const auto& s = subjects_[i];
    return s.entry_time <= t && t <= s.followup_time;
  }

  /// Distinct event times, ascending, within one stratum.
  const std::vector<double>& event_times(int stratum = 0) const {
    return strata_[stratum].distinct_event_times;
  }
  /// Event multiplicity aligned with event_times().
  const std::vector<int>& event_multiplicity(int stratum = 0) const {
    return strata_[stratum].event_multiplicity;
  }

  /// {i : at_risk(i,t), stratum matches}. Empty set is legal.
  std::vector<int> risk_set(double t, int stratum = 0) const;

  /// Internal orderings used by the partial-likelihood sweeps.
  struct StratumIndex {
    std::vector<int> members;            // subject ids in this stratum
    std::vector<int> by_followup_desc;   // members sorted by followup_time desc
    std::vector<int> by_entry_desc;      // members sorted by entry_time desc
    std::vector<int> events_by_time_desc;  // event subjects sorted by time desc
    std::vector<double> distinct_event_times;
    std::vector<int> event_multiplicity;
  };
  const StratumIndex& stratum_index(int stratum) const { return strata_[stratum]; }

  int n_events() const { return n_events_; }

 private:
  std::vector<SubjectRecord> subjects_;
  std::vector<StratumIndex> strata_;
  int p_ = 0;
  int n_events_ = 0;
  double max_followup_ = 0.0;
};

Cohort build_cohort(std::vector<SubjectRecord> records);

}  // namespace threshcox
