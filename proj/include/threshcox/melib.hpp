#pragma once

#include <Eigen/Core>
#include <vector>

#include "threshcox/errors.hpp"

namespace threshcox {

/// Additive normal error model W = X + U with X|Z ~ N(mu_x(z), sigma_x^2),
/// U ~ N(0, sigma_u^2), mu_x(z) = alpha0 + alpha1' z.
/// Posterior X|W,Z is N(mu(w,z), eta^2) with
///   mu(w,z) = mu_x(z) + lambda (w - mu_x(z)),  lambda = sigma_x^2 / sigma_w^2,
///   eta^2   = sigma_x^2 sigma_u^2 / sigma_w^2.
class MeasurementModel {
 public:
  MeasurementModel(double alpha0, Eigen::VectorXd alpha1, double sigma_x2, double sigma_u2);

  /// Error-free model (sigma_u^2 = 0).
  static MeasurementModel error_free(double alpha0 = 0.0);

  /// From a regression-calibration line E(X|W) = a + b W, Var(X|W) = v
  /// (no Z). Requires 0 < b < 1 when v > 0.
  static MeasurementModel from_calibration_line(double a, double b, double v);

  double alpha0() const { return alpha0_; }
  const Eigen::VectorXd& alpha1() const { return alpha1_; }
  double sigma_x2() const { return sigma_x2_; }
  double sigma_u2() const { return sigma_u2_; }
  double sigma_w2() const { return sigma_w2_; }
  double reliability() const { return lambda_; }  // sigma_x^2 / sigma_w^2 in [0,1]
  double eta() const { return eta_; }             // posterior residual sd

  double mu_x(const Eigen::VectorXd& z) const {
    return alpha0_ + (alpha1_.size() ? alpha1_.dot(z) : 0.0);
  }

  /// mu(w,z) = E[X | W=w, Z=z].
  double cond_mean(double w, const Eigen::VectorXd& z) const;

  /// E[(X - tau)_+ | W=w, Z=z] = (mu-tau) Phi((mu-tau)/eta) + eta phi((mu-tau)/eta).
  double cond_expect_plus(double w, const Eigen::VectorXd& z, double tau) const;

  /// d/dtau E[(X - tau)_+ | W, Z] = -Phi((mu-tau)/eta). Requires eta > 0.
  double cond_expect_plus_dtau(double w, const Eigen::VectorXd& z, double tau) const;

 private:
  double alpha0_;
  Eigen::VectorXd alpha1_;
  double sigma_x2_, sigma_u2_, sigma_w2_, lambda_, eta_;
};

/// Standard normal cdf / pdf.
double norm_cdf(double x);
double norm_pdf(double x);

/// Closed-form moments of the changepoint risk factor given the posterior
/// N(mu, eta^2). These are what the RC2 / RR / MPPLE machinery consumes;
/// they are checked against Gauss-Hermite quadrature in the tests.
namespace posterior {

double expect_plus(double mu, double eta, double tau);
double expect_plus_dtau(double mu, double eta, double tau);

/// E[exp(beta X + omega (X - tau)_+)] for X ~ N(mu, eta^2):
///   exp(beta mu + beta^2 eta^2/2) Phi((tau - mu - beta eta^2)/eta)
///   + exp(-omega tau + (beta+omega) mu + (beta+omega)^2 eta^2/2)
///     (1 - Phi((tau - mu - (beta+omega) eta^2)/eta)).
/// Throws OverflowError when an exponent exceeds `cap`.
double induced_risk(double mu, double eta, double beta, double omega, double tau,
                    double cap = 20.0);

/// (value, d/dbeta, d/domega, d/dtau) of log induced_risk.
struct InducedRiskLog {
  double log_value;
  double dbeta, domega, dtau;
};
InducedRiskLog induced_risk_log_grad(double mu, double eta, double beta, double omega,
                                     double tau, double cap = 20.0);

}  // namespace posterior

/// Replicate surrogate readings: k persons, ragged rows allowed.
struct ReliabilityStudy {
  std::vector<std::vector<double>> measurements;
  /// Optional per-person covariates (k x p) for the alpha1 regression.
  Eigen::MatrixXd covariates;  // 0 x 0 when absent
};

struct NuisanceEstimate {
  MeasurementModel model;
  bool sigma_x2_clamped = false;  // between MS < within MS
};

/// One-way random-effects ANOVA estimate of (alpha0, alpha1, sigma_x^2, sigma_u^2).
NuisanceEstimate estimate_nuisance(const ReliabilityStudy& study);

}  // namespace threshcox
