#include "threshcox/estimators.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "threshcox/variance.hpp"

namespace threshcox {

const char* method_name(Method m) {
  switch (m) {
    case Method::Naive: return "naive";
    case Method::RC1: return "rc1";
    case Method::RC2: return "rc2";
    case Method::RR1: return "rr1";
    case Method::RR2: return "rr2";
    case Method::MPPLE: return "mpple";
    case Method::SIMEX: return "simex";
  }
  return "?";
}

Vec FitResult::se() const {
  if (covariance.size() == 0) return Vec::Zero(dim());
  return covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
}

Vec posterior_means(const Cohort& cohort, const MeasurementModel& me) {
  Vec mu(cohort.n());
  for (int i = 0; i < cohort.n(); ++i) {
    const SubjectRecord& s = cohort.subject(i);
    mu[i] = me.cond_mean(s.surrogate, s.covariates);
  }
  return mu;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

PsiObjective make_psi_objective(const Cohort& cohort, const RiskModel& model,
                                double tau) {
  const int p = model.p();
  PsiObjective obj;
  obj.value = [&cohort, &model, tau, p](const Vec& psi) {
    ThetaParams th = ThetaParams::zero(p);
    th.set_psi(psi);
    th.tau = tau;
    return log_partial_likelihood(cohort, th, model);
  };
  obj.eval = [&cohort, &model, tau, p](const Vec& psi, double& v, Vec& sc, Mat& info) {
    ThetaParams th = ThetaParams::zero(p);
    th.set_psi(psi);
    th.tau = tau;
    Vec lin;
    Mat grad;
    model.eval(th, lin, &grad);
    const ScoreInfo si = cox_score_info(cohort, lin, grad, true);
    v = si.loglik;
    sc = si.score.head(p + 2);
    info = si.info.topLeftCorner(p + 2, p + 2);
  };
  return obj;
}

std::vector<double> centered(const Vec& v, double center) {
  std::vector<double> out(v.size());
  for (int i = 0; i < v.size(); ++i) out[i] = v[i] - center;
  return out;
}

}  // namespace

FitResult profile_fit(const Cohort& cohort, const RiskModel& model,
                      const std::vector<double>& bracket_values, double center,
                      const std::vector<double>& kink_values, Method method,
                      const FitConfig& cfg) {
  FitResult res;
  res.method = method;
  const int p = model.p();

  Vec warm = cfg.psi_start.value_or(Vec::Zero(p + 2));
  const auto solve_at = [&](double tau) -> double {
    try {
      NewtonResult nr = newton_psi(make_psi_objective(cohort, model, tau), warm,
                                   cfg.optim);
      if (nr.diverged || !std::isfinite(nr.objective)) return kNegInf;
      warm = nr.psi;
      return nr.objective;
    } catch (const SingularInformation&) {
      return kNegInf;
    } catch (const OverflowError&) {
      return kNegInf;
    } catch (const EmptyRiskSet&) {
      return kNegInf;
    }
  };

  double tau_hat;
  if (cfg.fixed_tau) {
    tau_hat = *cfg.fixed_tau - center;
    res.tau_bracket_used = {*cfg.fixed_tau, *cfg.fixed_tau};
  } else {
    auto [lo, hi] = tau_bracket(bracket_values, cfg.optim.tau_quantile_q);
    if (cfg.tau_bracket_override) {
      lo = cfg.tau_bracket_override->first - center;
      hi = cfg.tau_bracket_override->second - center;
    }
    res.tau_bracket_used = {lo + center, hi + center};
    // kinked profiles (Step-model risks) develop near-tied local maxima, so
    // they get a coarse scan before the golden refine; smooth profiles do not
    OptimConfig ocfg = cfg.optim;
    if (ocfg.tau_scan_points == 0 && !kink_values.empty()) ocfg.tau_scan_points = 500;
    const TauResult tr = profile_tau(solve_at, lo, hi, ocfg);
    tau_hat = tr.tau;
    res.tau_on_boundary = tr.boundary;
    res.tau_evaluations = tr.evaluations;
    if (tr.boundary) res.warnings.emplace_back("TauOnBracketBoundary");
    if (!std::isfinite(tr.objective)) res.warnings.emplace_back("ProfileDegenerate");
  }

  res.theta_hat = ThetaParams::zero(p);
  res.theta_hat.tau = tau_hat;
  try {
    const NewtonResult nr =
        newton_psi(make_psi_objective(cohort, model, tau_hat), warm, cfg.optim);
    res.theta_hat.set_psi(nr.psi);
    res.newton_iterations = nr.iterations;
    res.objective = nr.objective;
    res.converged = nr.converged && !nr.diverged;
    if (nr.diverged)
      res.warnings.emplace_back("PsiDiverged");
    else if (!nr.converged)
      res.warnings.emplace_back("NewtonIterationCap");
  } catch (const Error& e) {
    res.theta_hat.set_psi(warm);
    res.converged = false;
    res.warnings.emplace_back(std::string("FitFailed: ") + e.what());
  }

  res.covariance = Mat::Zero(p + 3, p + 3);
  if (cfg.compute_covariance && res.converged) {
    try {
      if (cfg.fixed_tau)
        res.covariance.topLeftCorner(p + 2, p + 2) =
            sandwich_psi_block(cohort, res.theta_hat, model);
      else if (!kink_values.empty())
        res.covariance =
            sandwich_naive_rc1(cohort, res.theta_hat, model, kink_values);
      else
        res.covariance = sandwich_smooth(cohort, res.theta_hat, model);
    } catch (const Error& e) {
      res.covariance = Mat::Zero(p + 3, p + 3);
      res.warnings.emplace_back(std::string("VarianceFailed: ") + e.what());
    }
  }
  res.theta_hat.tau += center;
  return res;
}

FitResult fit_naive(const Cohort& cohort, const FitConfig& cfg) {
  Vec w(cohort.n());
  for (int i = 0; i < cohort.n(); ++i) w[i] = cohort.subject(i).surrogate;
  const double center = w.mean();
  const Vec g1 = w.array() - center;
  const SubstitutionModel model(cohort, g1, cfg.optim.exponent_cap);
  const std::vector<double> vals = centered(w, center);
  return profile_fit(cohort, model, vals, center, vals, Method::Naive, cfg);
}

FitResult fit_rc1(const Cohort& cohort, const MeasurementModel& me,
                  const FitConfig& cfg) {
  const Vec mu = posterior_means(cohort, me);
  const double center = mu.mean();
  const Vec g1 = mu.array() - center;
  const SubstitutionModel model(cohort, g1, cfg.optim.exponent_cap);
  const std::vector<double> vals = centered(mu, center);
  try {
    return profile_fit(cohort, model, vals, center, vals, Method::RC1, cfg);
  } catch (const DegenerateBracket&) {
    // calibration collapsed (reliability 0): bracket on W instead
    Vec w(cohort.n());
    for (int i = 0; i < cohort.n(); ++i) w[i] = cohort.subject(i).surrogate;
    FitResult res = profile_fit(cohort, model, centered(w, center), center, vals,
                                Method::RC1, cfg);
    res.warnings.emplace_back("DegenerateCalibration");
    return res;
  }
}

FitResult fit_rc2(const Cohort& cohort, const MeasurementModel& me,
                  const FitConfig& cfg) {
  const Vec mu = posterior_means(cohort, me);
  const double center = mu.mean();
  const Vec g1 = mu.array() - center;
  const std::vector<double> vals = centered(mu, center);
  if (me.eta() == 0.0) {
    // no residual uncertainty: the smooth pair degenerates to the step pair
    const SubstitutionModel model(cohort, g1, cfg.optim.exponent_cap);
    FitResult res = profile_fit(cohort, model, vals, center, vals, Method::RC2, cfg);
    return res;
  }
  const SubstitutionModel model(cohort, g1, me.eta(), cfg.optim.exponent_cap);
  return profile_fit(cohort, model, vals, center, {}, Method::RC2, cfg);
}

FitResult fit_rr1(const Cohort& cohort, const MeasurementModel& me,
                  const FitConfig& cfg) {
  const Vec mu = posterior_means(cohort, me);
  const double center = mu.mean();
  const Vec g1 = mu.array() - center;
  const std::vector<double> vals = centered(mu, center);
  if (me.eta() == 0.0) {
    const SubstitutionModel model(cohort, g1, cfg.optim.exponent_cap);
    return profile_fit(cohort, model, vals, center, vals, Method::RR1, cfg);
  }
  const InducedRiskModel model(cohort, g1, me.eta(), cfg.optim.exponent_cap);
  return profile_fit(cohort, model, vals, center, {}, Method::RR1, cfg);
}

FitResult fit_rr2(const Cohort& cohort, const MeasurementModel& me,
                  const FitConfig& cfg) {
  FitResult base = fit_rr1(cohort, me, cfg);
  if (!base.converged) {
    base.method = Method::RR2;
    return base;
  }
  const int n = cohort.n();
  const int d = base.dim();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  FitConfig boot_cfg = cfg;
  boot_cfg.compute_covariance = false;

  std::vector<Vec> draws;
  draws.reserve(cfg.bootstrap_reps);
  int failures = 0;
  for (int b = 0; b < cfg.bootstrap_reps; ++b) {
    std::vector<SubjectRecord> records;
    records.reserve(n);
    for (int i = 0; i < n; ++i) records.push_back(cohort.subject(pick(rng)));
    try {
      const Cohort resampled = Cohort::build(std::move(records));
      const FitResult fr = fit_rr1(resampled, me, boot_cfg);
      if (fr.converged)
        draws.push_back(fr.theta_hat.full());
      else
        ++failures;
    } catch (const Error&) {
      ++failures;
    }
  }
  if (static_cast<int>(draws.size()) < (cfg.bootstrap_reps + 1) / 2)
    throw TooFewBootstrapSuccesses();

  Vec mean = Vec::Zero(d);
  for (const Vec& v : draws) mean += v;
  mean /= static_cast<double>(draws.size());
  Mat cov = Mat::Zero(d, d);
  for (const Vec& v : draws) cov += (v - mean) * (v - mean).transpose();
  cov /= std::max<double>(1.0, static_cast<double>(draws.size()) - 1.0);

  FitResult res = base;
  res.method = Method::RR2;
  res.theta_hat = ThetaParams::from_full(2.0 * base.theta_hat.full() - mean);
  res.covariance = cov;
  if (failures > 0)
    res.warnings.emplace_back("BootstrapFailures: " + std::to_string(failures));
  return res;
}

}  // namespace threshcox
