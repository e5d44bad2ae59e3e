#pragma once

#include "threshcox/estimators.hpp"

namespace threshcox {

struct MppleConfig {
  int outer_max_iter = 25;
  double outer_tol = 1e-6;   // max-norm change of psi between outer iterations
  int quad_nodes = 24;       // Gauss-Legendre nodes per side of tau
  double tail_width = 8.0;   // integration range mu +- tail_width * eta
  int c_levels = 12;         // interpolation grid for Lambda0(t) within risk sets
};

/// Induced log hazard ratio with a plugged-in cumulative baseline hazard:
///   lin_i = log E[psi_i(X) e^{-c_i Psi_i(X)}] - log E[e^{-c_i Psi_i(X)}],
/// expectation over X | W_i, Z_i ~ N(mu_i, eta^2), with the full risk
/// psi_i(x) = exp(gamma' z_i + beta x + omega (x - tau)_+), Psi_i = psi_i,
/// and c_i = Lambda0(T_i) held fixed during the inner maximization.
/// Integrals split at tau so each panel is smooth; the tau boundary terms
/// cancel because psi is continuous at the changepoint.
class MppleModel : public RiskModel {
 public:
  MppleModel(const Cohort& cohort, Vec mu, double eta, Vec c, const MppleConfig& mcfg,
             double exponent_cap);
  int p() const override { return p_; }
  void eval(const ThetaParams& theta, Vec& lin, Mat* grad) const override;

 private:
  const Cohort* cohort_;
  Vec mu_, c_;
  double eta_;
  MppleConfig mcfg_;
  double cap_;
  int p_;
};

/// Breslow baseline: Lambda0(T_i) for each subject, per stratum, with subject
/// risks exp(lin).
Vec breslow_cumhaz_at_followup(const Cohort& cohort, const Vec& lin);

/// Pseudo partial likelihood with per-event-time plug-in c_k = Lambda0(t_k-):
/// every member of the risk set at t_k is damped by the same c_k. Subject
/// phi-tilde values are tabulated on an equally spaced grid of c levels and
/// risk-set sums are interpolated linearly in c, which keeps one evaluation
/// at O(n * levels * nodes) instead of O(events * n * nodes). Interpolation
/// weights are fixed given Lambda0, so the objective stays smooth in theta
/// with exactly consistent analytic derivatives.
class MpplePseudoLik {
 public:
  /// c_event: per stratum, Lambda0 just before each distinct event time
  /// (ascending, matching Cohort::event_times).
  MpplePseudoLik(const Cohort& cohort, Vec mu, double eta,
                 std::vector<std::vector<double>> c_event, const MppleConfig& mcfg,
                 double exponent_cap);

  int p() const { return p_; }
  int dim() const { return p_ + 3; }

  double value(const ThetaParams& theta) const;
  /// loglik, psi-block score and Gauss-Newton information (for newton_psi).
  void eval_psi(const ThetaParams& theta, double& loglik, Vec& score, Mat& info) const;
  /// Updated per-stratum c arrays from the Breslow estimator at theta.
  std::vector<std::vector<double>> breslow(const ThetaParams& theta) const;
  /// Full-dimension sandwich covariance at theta (tau included).
  Mat sandwich(const ThetaParams& theta) const;

 private:
  struct Tables;
  void tabulate(const ThetaParams& theta, bool want_grad, Tables& t) const;

  const Cohort* cohort_;
  Vec mu_;
  double eta_;
  std::vector<std::vector<double>> c_event_;
  Vec levels_;
  double level_step_;
  MppleConfig mcfg_;
  double cap_;
  int p_;
};

/// Outer plug-in loop: alternate (theta given Lambda0) profile fits and
/// Breslow updates, starting from Lambda0 = 0 (so the first pass is RR1 in
/// phi-tilde form).
FitResult fit_mpple(const Cohort& cohort, const MeasurementModel& me,
                    const FitConfig& cfg = {}, const MppleConfig& mcfg = {});

}  // namespace threshcox
