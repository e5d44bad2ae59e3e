#pragma once

// Independent reference implementations used to check the fast engine.
// Everything here is deliberately brute-force.

#include <cmath>
#include <random>
#include <vector>

#include "threshcox/pl_engine.hpp"

namespace oracles {

using threshcox::Cohort;
using threshcox::Mat;
using threshcox::SubjectRecord;
using threshcox::Vec;

// O(n^2) Cox log partial likelihood with Breslow ties, left truncation,
// strata, using Cohort::risk_set directly.
inline double brute_loglik(const Cohort& cohort, const Vec& lin) {
  double ll = 0.0;
  for (int i = 0; i < cohort.n(); ++i) {
    const SubjectRecord& s = cohort.subject(i);
    if (!s.event) continue;
    double denom = 0.0;
    for (int j : cohort.risk_set(s.followup_time, s.stratum))
      denom += std::exp(lin[j]);
    ll += lin[i] - std::log(denom);
  }
  return ll;
}

inline Vec brute_score(const Cohort& cohort, const Vec& lin, const Mat& grad) {
  const int d = static_cast<int>(grad.cols());
  Vec score = Vec::Zero(d);
  for (int i = 0; i < cohort.n(); ++i) {
    const SubjectRecord& s = cohort.subject(i);
    if (!s.event) continue;
    double s0 = 0.0;
    Vec s1 = Vec::Zero(d);
    for (int j : cohort.risk_set(s.followup_time, s.stratum)) {
      const double e = std::exp(lin[j]);
      s0 += e;
      s1 += e * grad.row(j).transpose();
    }
    score += grad.row(i).transpose() - s1 / s0;
  }
  return score;
}

// Central finite difference of a scalar function of a vector.
template <class F>
Vec fd_gradient(F&& f, const Vec& x, double h = 1e-6) {
  Vec g(x.size());
  for (int j = 0; j < x.size(); ++j) {
    Vec up = x, dn = x;
    up[j] += h;
    dn[j] -= h;
    g[j] = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

// Random small cohort with ties, censoring, left truncation, strata.
inline Cohort random_cohort(int n, int p, std::mt19937_64& rng, int n_strata = 1,
                            bool truncation = false) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<SubjectRecord> recs(n);
  for (int i = 0; i < n; ++i) {
    SubjectRecord& r = recs[i];
    // discretized times produce ties
    r.followup_time = 0.1 * (1 + static_cast<int>(unif(rng) * 20));
    r.entry_time = truncation ? r.followup_time * 0.5 * unif(rng) : 0.0;
    r.event = unif(rng) < 0.7;
    r.surrogate = gauss(rng);
    r.covariates = Vec(p);
    for (int k = 0; k < p; ++k) r.covariates[k] = gauss(rng);
    r.stratum = static_cast<int>(unif(rng) * n_strata);
  }
  // make sure each stratum has at least one event
  for (int s = 0; s < n_strata; ++s) {
    recs[s].stratum = s;
    recs[s].event = true;
  }
  return Cohort::build(std::move(recs));
}

}  // namespace oracles
