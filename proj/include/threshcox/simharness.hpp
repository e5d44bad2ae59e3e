#pragma once

#include <functional>
#include <limits>
#include <optional>

#include "threshcox/estimators.hpp"
#include "threshcox/mpple.hpp"
#include "threshcox/simex.hpp"

namespace threshcox {

enum class ErrorLaw { Normal, StudentT };

struct SimScenario {
  int n = 3000;
  double cumulative_incidence = 0.5;
  double rho_xw = 0.8;  // in (0, 1]; sigma_w^2 = 1, sigma_x^2 = rho^2
  ThetaParams theta_true;
  int replications = 200;
  ErrorLaw error_law = ErrorLaw::Normal;
  int t_df = 6;  // StudentT degrees of freedom (variance-matched)
  bool nuisance_known = true;
  int reliability_k = 500;  // external reliability sample, persons
  int reliability_m = 2;    // replicates per person
  std::uint64_t seed = 20240817ull;
  double admin_censor_time = 1.0;

  double sigma_x2() const { return rho_xw * rho_xw; }
  double sigma_u2() const { return 1.0 - sigma_x2(); }
};

struct GeneratedCohort {
  Cohort observed;
  Vec true_x;
  std::optional<ReliabilityStudy> reliability;
};

/// Constant baseline hazard giving P(event by t*) = incidence under the
/// changepoint model with X ~ N(0, sigma_x^2); bisection on log lambda0.
double calibrate_baseline_hazard(const SimScenario& sc);

/// One replication's data. `lambda0` from calibrate_baseline_hazard (cached
/// by the caller across replications).
GeneratedCohort generate_cohort(const SimScenario& sc, double lambda0,
                                std::uint64_t rep_seed);

struct BiasCell {
  double median = std::numeric_limits<double>::quiet_NaN();
  double rel_bias = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
};

struct MethodSummary {
  std::string method;
  int converged = 0;
  int total = 0;
  BiasCell beta, omega, tau;
  double pct() const { return total ? 100.0 * converged / total : 0.0; }
};

struct BiasTable {
  SimScenario scenario;
  std::vector<MethodSummary> rows;
};

/// (median - true)/true, or median - true when the true value is 0 (the tau=0
/// rows, where a ratio is undefined).
double relative_bias(double median, double truth);

struct RunOptions {
  std::vector<Method> methods{Method::Naive, Method::RC1, Method::RC2, Method::RR1};
  bool include_benchmark = true;  // error-free fit on the true X
  FitConfig fit;                  // covariance off by default in the loop
  MppleConfig mpple;
  SimexPlan simex;
  std::function<void(int rep, int total)> progress;  // optional
};

/// Replication loop: generate, estimate nuisance when requested, fit each
/// method, aggregate medians over converged fits.
BiasTable run_scenario(const SimScenario& sc, const RunOptions& opt);

}  // namespace threshcox
