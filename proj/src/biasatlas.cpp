#include "threshcox/biasatlas.hpp"

namespace threshcox {

AtlasCell limit_theta(Method method, const SimScenario& sc, const FitConfig& cfg) {
  AtlasCell cell;
  cell.method = method;
  cell.rho_xw = sc.rho_xw;
  cell.tau_true = sc.theta_true.tau;

  const double lambda0 = calibrate_baseline_hazard(sc);
  const GeneratedCohort gen = generate_cohort(sc, lambda0, /*rep_seed=*/0);
  const MeasurementModel me(0.0, Vec(), sc.sigma_x2(), sc.sigma_u2());

  FitConfig fit = cfg;
  fit.compute_covariance = false;

  FitResult fr;
  try {
    switch (method) {
      case Method::Naive: fr = fit_naive(gen.observed, fit); break;
      case Method::RC1: fr = fit_rc1(gen.observed, me, fit); break;
      case Method::RC2: fr = fit_rc2(gen.observed, me, fit); break;
      case Method::RR1: fr = fit_rr1(gen.observed, me, fit); break;
      default:
        throw ConfigError("limit_theta supports naive/rc1/rc2/rr1 only");
    }
  } catch (const Error&) {
    cell.converged = false;
    return cell;
  }
  cell.theta_star = fr.theta_hat;
  cell.converged = fr.converged;
  cell.bias_beta = fr.theta_hat.beta - sc.theta_true.beta;
  cell.bias_omega = fr.theta_hat.omega - sc.theta_true.omega;
  cell.bias_tau = fr.theta_hat.tau - sc.theta_true.tau;
  return cell;
}

std::vector<AtlasCell> atlas_grid(const std::vector<Method>& methods,
                                  const std::vector<double>& rhos,
                                  const std::vector<double>& taus,
                                  const SimScenario& base, const FitConfig& cfg) {
  std::vector<AtlasCell> cells;
  for (double rho : rhos)
    for (double tau : taus)
      for (Method m : methods) {
        SimScenario sc = base;
        sc.rho_xw = rho;
        sc.theta_true.tau = tau;
        cells.push_back(limit_theta(m, sc, cfg));
      }
  return cells;
}

}  // namespace threshcox
