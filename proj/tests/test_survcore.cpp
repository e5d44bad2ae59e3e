#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "threshcox/survcore.hpp"

using namespace threshcox;

namespace {
SubjectRecord rec(double entry, double time, bool event, double w, int stratum = 0) {
  SubjectRecord r;
  r.entry_time = entry;
  r.followup_time = time;
  r.event = event;
  r.surrogate = w;
  r.covariates = Vec();
  r.stratum = stratum;
  return r;
}
}  // namespace

TEST_CASE("cohort validation") {
  CHECK_THROWS_AS(Cohort::build({}), EmptyCohort);
  CHECK_THROWS_AS(Cohort::build({rec(0, -1, true, 0)}), MalformedRecord);
  CHECK_THROWS_AS(Cohort::build({rec(2, 1, true, 0)}), MalformedRecord);
  CHECK_THROWS_AS(
      Cohort::build({rec(0, std::numeric_limits<double>::quiet_NaN(), true, 0)}),
      MalformedRecord);

  std::vector<SubjectRecord> mixed = {rec(0, 1, true, 0.0)};
  SubjectRecord bad = rec(0, 1, true, 0.0);
  bad.covariates = Vec::Ones(2);
  mixed.push_back(bad);
  CHECK_THROWS_AS(Cohort::build(mixed), MalformedRecord);
}

TEST_CASE("event times and multiplicities") {
  const Cohort c = Cohort::build({rec(0, 1, true, 0), rec(0, 1, true, 0),
                                  rec(0, 2, false, 0), rec(0, 3, true, 0)});
  REQUIRE(c.event_times().size() == 2);
  CHECK(c.event_times()[0] == 1.0);
  CHECK(c.event_times()[1] == 3.0);
  CHECK(c.event_multiplicity()[0] == 2);
  CHECK(c.event_multiplicity()[1] == 1);
  CHECK(c.n_events() == 3);
}

TEST_CASE("risk_set matches at_risk brute force") {
  std::mt19937_64 rng(7);
  const Cohort c = oracles::random_cohort(60, 1, rng, 2, /*truncation=*/true);
  for (int s = 0; s < c.n_strata(); ++s) {
    for (double t : c.event_times(s)) {
      const auto rs = c.risk_set(t, s);
      int count = 0;
      for (int i = 0; i < c.n(); ++i)
        if (c.subject(i).stratum == s && c.at_risk(i, t)) ++count;
      CHECK(static_cast<int>(rs.size()) == count);
      for (int i : rs) {
        CHECK(c.at_risk(i, t));
        CHECK(c.subject(i).stratum == s);
      }
    }
  }
}

TEST_CASE("left truncation: entry after t excludes subject") {
  const Cohort c = Cohort::build({rec(0.5, 2, true, 0), rec(0, 1, true, 0)});
  const auto rs = c.risk_set(1.0, 0);
  REQUIRE(rs.size() == 2);  // entry 0.5 <= 1 <= 2, and the event itself
  const auto rs2 = Cohort::build({rec(1.5, 2, true, 0), rec(0, 1, true, 0)})
                       .risk_set(1.0, 0);
  CHECK(rs2.size() == 1);
}
