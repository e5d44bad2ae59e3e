#include "threshcox/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "threshcox/quadrature.hpp"

namespace threshcox {

namespace {

double risk_factor(const ThetaParams& th, double x) {
  return std::exp(th.beta * x + th.omega * std::max(x - th.tau, 0.0));
}

double incidence_at(const SimScenario& sc, double lambda0) {
  const double sx = std::sqrt(sc.sigma_x2());
  return normal_expectation(
      [&](double x) {
        return 1.0 - std::exp(-lambda0 * risk_factor(sc.theta_true, x) *
                              sc.admin_censor_time);
      },
      0.0, sx, 64);
}

}  // namespace

double calibrate_baseline_hazard(const SimScenario& sc) {
  if (!(sc.cumulative_incidence > 0.0 && sc.cumulative_incidence < 1.0))
    throw ConfigError("cumulative_incidence must be in (0,1)");
  double lo = -30.0, hi = 30.0;  // log lambda0
  if (incidence_at(sc, std::exp(lo)) > sc.cumulative_incidence ||
      incidence_at(sc, std::exp(hi)) < sc.cumulative_incidence)
    throw CalibrationFailure(sc.cumulative_incidence);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (incidence_at(sc, std::exp(mid)) < sc.cumulative_incidence ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

GeneratedCohort generate_cohort(const SimScenario& sc, double lambda0,
                                std::uint64_t rep_seed) {
  std::seed_seq seq{static_cast<std::uint64_t>(sc.seed), rep_seed};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::student_t_distribution<double> tdist(sc.t_df);

  const double sx = std::sqrt(sc.sigma_x2());
  const double su = std::sqrt(sc.sigma_u2());
  if (sc.error_law == ErrorLaw::StudentT && sc.t_df <= 2)
    throw ConfigError("StudentT error law needs df > 2 for variance matching");
  // Student t scaled so Var(U) = sigma_u^2
  const double tscale = su * std::sqrt((sc.t_df - 2.0) / std::max(sc.t_df, 3));

  GeneratedCohort out;
  out.true_x.resize(sc.n);
  std::vector<SubjectRecord> records(sc.n);
  for (int i = 0; i < sc.n; ++i) {
    const double x = sx * gauss(rng);
    const double u = su == 0.0 ? 0.0
                     : sc.error_law == ErrorLaw::Normal ? su * gauss(rng)
                                                        : tscale * tdist(rng);
    const double t0 = std::exponential_distribution<double>(1.0)(rng) /
                      (lambda0 * risk_factor(sc.theta_true, x));
    SubjectRecord& r = records[i];
    r.entry_time = 0.0;
    r.event = t0 <= sc.admin_censor_time;
    r.followup_time = r.event ? t0 : sc.admin_censor_time;
    r.surrogate = x + u;
    r.covariates = Vec();
    out.true_x[i] = x;
  }
  out.observed = Cohort::build(std::move(records));

  if (!sc.nuisance_known) {
    ReliabilityStudy rel;
    rel.measurements.resize(sc.reliability_k);
    for (int i = 0; i < sc.reliability_k; ++i) {
      const double x = sx * gauss(rng);
      rel.measurements[i].resize(sc.reliability_m);
      for (int j = 0; j < sc.reliability_m; ++j) {
        const double u = su == 0.0 ? 0.0
                         : sc.error_law == ErrorLaw::Normal ? su * gauss(rng)
                                                            : tscale * tdist(rng);
        rel.measurements[i][j] = x + u;
      }
    }
    out.reliability = std::move(rel);
  }
  return out;
}

double relative_bias(double median, double truth) {
  return truth != 0.0 ? (median - truth) / truth : median - truth;
}

namespace {

struct Accumulator {
  std::vector<double> beta, omega, tau;
  int converged = 0, total = 0;

  void add(const FitResult& fr) {
    ++total;
    if (!fr.converged) return;
    ++converged;
    beta.push_back(fr.theta_hat.beta);
    omega.push_back(fr.theta_hat.omega);
    tau.push_back(fr.theta_hat.tau);
  }
};

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (static_cast<double>(v.size()) - 1.0));
}

BiasCell cell_of(const std::vector<double>& v, double truth) {
  BiasCell c;
  c.median = median_of(v);
  c.rel_bias = relative_bias(c.median, truth);
  c.sd = sd_of(v);
  return c;
}

MethodSummary summarize(const std::string& name, const Accumulator& acc,
                        const ThetaParams& truth) {
  MethodSummary s;
  s.method = name;
  s.converged = acc.converged;
  s.total = acc.total;
  s.beta = cell_of(acc.beta, truth.beta);
  s.omega = cell_of(acc.omega, truth.omega);
  s.tau = cell_of(acc.tau, truth.tau);
  return s;
}

}  // namespace

BiasTable run_scenario(const SimScenario& sc, const RunOptions& opt) {
  if (opt.methods.empty()) throw ConfigError("run_scenario: no methods requested");
  const double lambda0 = calibrate_baseline_hazard(sc);

  std::vector<Accumulator> acc(opt.methods.size());
  Accumulator bench_acc;

  FitConfig fit = opt.fit;
  fit.compute_covariance = false;

  for (int rep = 0; rep < sc.replications; ++rep) {
    if (opt.progress) opt.progress(rep, sc.replications);
    const GeneratedCohort gen =
        generate_cohort(sc, lambda0, static_cast<std::uint64_t>(rep));
    MeasurementModel me(0.0, Vec(), sc.sigma_x2(), sc.sigma_u2());
    if (!sc.nuisance_known) me = estimate_nuisance(*gen.reliability).model;

    FitConfig rep_fit = fit;
    rep_fit.seed = sc.seed ^ (0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(rep));

    for (std::size_t m = 0; m < opt.methods.size(); ++m) {
      try {
        FitResult fr;
        switch (opt.methods[m]) {
          case Method::Naive: fr = fit_naive(gen.observed, rep_fit); break;
          case Method::RC1: fr = fit_rc1(gen.observed, me, rep_fit); break;
          case Method::RC2: fr = fit_rc2(gen.observed, me, rep_fit); break;
          case Method::RR1: fr = fit_rr1(gen.observed, me, rep_fit); break;
          case Method::RR2: fr = fit_rr2(gen.observed, me, rep_fit); break;
          case Method::MPPLE:
            fr = fit_mpple(gen.observed, me, rep_fit, opt.mpple);
            break;
          case Method::SIMEX: {
            SimexPlan plan = opt.simex;
            plan.seed = rep_fit.seed;
            fr = fit_simex(gen.observed, me, plan, rep_fit);
            break;
          }
        }
        acc[m].add(fr);
      } catch (const Error&) {
        ++acc[m].total;  // counted as non-converged
      }
    }

    if (opt.include_benchmark) {
      std::vector<SubjectRecord> records(gen.observed.subjects());
      for (int i = 0; i < gen.observed.n(); ++i)
        records[i].surrogate = gen.true_x[i];
      try {
        bench_acc.add(fit_naive(Cohort::build(std::move(records)), rep_fit));
      } catch (const Error&) {
        ++bench_acc.total;
      }
    }
  }

  BiasTable table;
  table.scenario = sc;
  if (opt.include_benchmark)
    table.rows.push_back(summarize("true-x", bench_acc, sc.theta_true));
  for (std::size_t m = 0; m < opt.methods.size(); ++m)
    table.rows.push_back(
        summarize(method_name(opt.methods[m]), acc[m], sc.theta_true));
  return table;
}

}  // namespace threshcox
