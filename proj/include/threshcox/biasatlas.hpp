#pragma once

#include "threshcox/simharness.hpp"

namespace threshcox {

/// One grid cell of the asymptotic-bias atlas: the limiting value theta*
/// approximated by fitting one very large cohort (common random numbers),
/// its bias against the truth, and optionally DELTA against a supplied
/// empirical (simulation) value.
struct AtlasCell {
  Method method = Method::Naive;
  double rho_xw = 0.0;
  double tau_true = 0.0;
  ThetaParams theta_star;
  bool converged = false;
  double bias_beta = 0.0, bias_omega = 0.0, bias_tau = 0.0;
  std::optional<ThetaParams> empirical;  // filled by the caller when known
  double delta_beta() const { return empirical ? theta_star.beta - empirical->beta : 0.0; }
  double delta_omega() const {
    return empirical ? theta_star.omega - empirical->omega : 0.0;
  }
};

/// Solve the limit score = 0 for one method by fitting a single cohort of
/// size sc.n (default 50,000; exposed as a knob) generated under `sc`.
AtlasCell limit_theta(Method method, const SimScenario& sc, const FitConfig& cfg = {});

/// Grid over rho and tau values (other scenario fields from `base`).
std::vector<AtlasCell> atlas_grid(const std::vector<Method>& methods,
                                  const std::vector<double>& rhos,
                                  const std::vector<double>& taus,
                                  const SimScenario& base, const FitConfig& cfg = {});

}  // namespace threshcox
