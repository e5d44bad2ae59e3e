#pragma once

#include <functional>
#include <utility>

#include "threshcox/pl_engine.hpp"

namespace threshcox {

struct OptimConfig {
  double psi_tol = 1e-8;         // score norm stopping rule
  int max_newton_iter = 100;     // Newton iteration cap
  double tau_tol = 1e-4;         // bracket width stopping rule
  double tau_quantile_q = 0.05;  // bracket quantiles
  int tau_scan_points = 0;       // optional coarse scan before the golden refine
                                 // (0 = plain golden section, assumes unimodality)
  int step_halving_max = 20;
  double exponent_cap = 20.0;
  double psi_divergence = 50.0;  // ||psi||_inf beyond this is divergence
};

/// Objective family at fixed tau: value, psi-score and psi-information.
struct PsiObjective {
  /// value only (used by step-halving)
  std::function<double(const Vec& psi)> value;
  /// value + score + information, all in psi coordinates
  std::function<void(const Vec& psi, double& value, Vec& score, Mat& info)> eval;
};

struct NewtonResult {
  Vec psi;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  double objective = 0.0;
};

/// Maximize via damped Newton with step-halving; never returns an iterate
/// with objective below the start. Throws SingularInformation on a flat
/// direction.
NewtonResult newton_psi(const PsiObjective& objective, Vec psi0, const OptimConfig& cfg);

struct TauResult {
  double tau = 0.0;
  double objective = 0.0;
  bool boundary = false;  // optimum at a bracket endpoint
  int evaluations = 0;
};

/// Golden-section maximization of the profiled objective over [tau_min,
/// tau_max] to tau_tol; boundary optimum is flagged, not an error.
TauResult profile_tau(const std::function<double(double)>& profiled, double tau_min,
                      double tau_max, const OptimConfig& cfg);

/// Empirical q and 1-q quantiles (type-7 linear interpolation).
/// Throws DegenerateBracket when all values are equal.
std::pair<double, double> tau_bracket(std::vector<double> values, double q);

/// Type-7 quantile of a sequence (exposed for tests).
double quantile_type7(std::vector<double> values, double q);

}  // namespace threshcox
