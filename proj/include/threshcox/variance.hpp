#pragma once

#include "threshcox/pl_engine.hpp"

namespace threshcox {

/// Per-subject influence rows H_i (n x dim): counting-process term minus the
/// compensator sum over event times,
///   H_i = delta_i [u_i - e(T_i)] - sum_k (m_k exp(lin_i)/S0(t_k)) [u_i - e(t_k)]
/// over event times t_k in [entry_i, T_i], e = S1/S0. Rows sum to the score.
Mat influence_matrix(const Cohort& cohort, const Vec& lin, const Mat& grad);

struct SandwichDiagnostics {
  bool tau_step_shrunk = false;  // kink within the tau finite-difference step
  double fd_step_tau = 0.0;
};

/// Huber sandwich for the step-type (naive/RC1) score: Lambda^ by central
/// finite differences of the score (one-sided / shrunk steps for the tau
/// row near the kink set {g1_i}), C^ = n^{-1} sum H_i H_i', covariance
/// n^{-1} Lambda^{-1} C^ Lambda^{-T}.
Mat sandwich_naive_rc1(const Cohort& cohort, const ThetaParams& theta_hat,
                       const RiskModel& model, const std::vector<double>& kink_values,
                       SandwichDiagnostics* diag = nullptr);

/// Omega estimator for smooth fits (RC2, and the same pattern for RR1/MPPLE):
/// information bread, H_i influence meat:
///   cov(theta^) = (I/n)^{-1} A^ (I/n)^{-1} / n,  A^ = n^{-1} sum H_i H_i'.
Mat sandwich_smooth(const Cohort& cohort, const ThetaParams& theta_hat,
                    const RiskModel& model);

/// Sandwich restricted to the psi = (gamma, beta, omega) block, for fits with
/// tau held fixed (tau is then not an estimated parameter).
Mat sandwich_psi_block(const Cohort& cohort, const ThetaParams& theta_hat,
                       const RiskModel& model);

}  // namespace threshcox
