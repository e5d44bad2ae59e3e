#include "threshcox/survcore.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace threshcox {

Cohort Cohort::build(std::vector<SubjectRecord> records) {
  if (records.empty()) throw EmptyCohort();

  const int p = static_cast<int>(records.front().covariates.size());
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    const auto& r = records[i];
    if (!std::isfinite(r.entry_time) || !std::isfinite(r.followup_time) ||
        !std::isfinite(r.surrogate) ||
        !r.covariates.allFinite())
      throw MalformedRecord(i, "non-finite value");
    if (r.entry_time < 0.0 || r.followup_time < 0.0)
      throw MalformedRecord(i, "negative time");
    if (r.entry_time > r.followup_time)
      throw MalformedRecord(i, "entry_time > followup_time");
    if (static_cast<int>(r.covariates.size()) != p)
      throw MalformedRecord(i, "covariate length differs from cohort");
  }

  Cohort c;
  c.subjects_ = std::move(records);
  c.p_ = p;

  std::map<int, int> stratum_slot;
  for (const auto& s : c.subjects_)
    stratum_slot.emplace(s.stratum, static_cast<int>(stratum_slot.size()));
  c.strata_.resize(stratum_slot.size());

  for (int i = 0; i < c.n(); ++i) {
    const auto& s = c.subjects_[i];
    c.strata_[stratum_slot[s.stratum]].members.push_back(i);
    c.max_followup_ = std::max(c.max_followup_, s.followup_time);
    if (s.event) ++c.n_events_;
  }

  for (auto& st : c.strata_) {
    st.by_followup_desc = st.members;
    std::sort(st.by_followup_desc.begin(), st.by_followup_desc.end(), [&](int a, int b) {
      return c.subjects_[a].followup_time > c.subjects_[b].followup_time;
    });
    st.by_entry_desc = st.members;
    std::sort(st.by_entry_desc.begin(), st.by_entry_desc.end(), [&](int a, int b) {
      return c.subjects_[a].entry_time > c.subjects_[b].entry_time;
    });
    for (int i : st.members)
      if (c.subjects_[i].event) st.events_by_time_desc.push_back(i);
    std::sort(st.events_by_time_desc.begin(), st.events_by_time_desc.end(), [&](int a, int b) {
      return c.subjects_[a].followup_time > c.subjects_[b].followup_time;
    });
    // ascending distinct times with multiplicities
    for (auto it = st.events_by_time_desc.rbegin(); it != st.events_by_time_desc.rend(); ++it) {
      double t = c.subjects_[*it].followup_time;
      if (st.distinct_event_times.empty() || st.distinct_event_times.back() != t) {
        st.distinct_event_times.push_back(t);
        st.event_multiplicity.push_back(1);
      } else {
        ++st.event_multiplicity.back();
      }
    }
  }
  return c;
}

std::vector<int> Cohort::risk_set(double t, int stratum) const {
  std::vector<int> out;
  for (int i : strata_[stratum].members)
    if (at_risk(i, t)) out.push_back(i);
  return out;
}

Cohort build_cohort(std::vector<SubjectRecord> records) {
  return Cohort::build(std::move(records));
}

}  // namespace threshcox
