#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "threshcox/melib.hpp"
#include "threshcox/survcore.hpp"

namespace threshcox {

/// Full parameter vector theta = (gamma, beta, omega, tau); psi = (gamma, beta, omega).
struct ThetaParams {
  Vec gamma;  // length p
  double beta = 0.0;
  double omega = 0.0;
  double tau = 0.0;

  int p() const { return static_cast<int>(gamma.size()); }
  int dim() const { return p() + 3; }

  Vec psi() const {
    Vec v(p() + 2);
    v.head(p()) = gamma;
    v[p()] = beta;
    v[p() + 1] = omega;
    return v;
  }
  void set_psi(const Vec& v) {
    gamma = v.head(p());
    beta = v[p()];
    omega = v[p() + 1];
  }

  Vec full() const {
    Vec v(dim());
    v.head(p() + 2) = psi();
    v[p() + 2] = tau;
    return v;
  }
  static ThetaParams from_full(const Vec& v) {
    ThetaParams t;
    const int p = static_cast<int>(v.size()) - 3;
    t.gamma = v.head(p);
    t.beta = v[p];
    t.omega = v[p + 1];
    t.tau = v[p + 2];
    return t;
  }
  static ThetaParams zero(int p) {
    ThetaParams t;
    t.gamma = Vec::Zero(p);
    return t;
  }
};

/// Per-subject log relative risk and its full-theta gradient at a given theta.
/// For the substitution methods lin_i = psi' V_i(g(tau)) and the gradient is
/// xi_i = [Z_i, g1, g2, omega dg2/dtau]; for RR1/MPPLE lin is nonlinear in
/// theta and the gradient is analytic.
class RiskModel {
 public:
  virtual ~RiskModel() = default;
  virtual int p() const = 0;
  int dim() const { return p() + 3; }
  /// Fills lin (length n); fills grad (n x dim) when non-null.
  /// Throws OverflowError when |lin_i| exceeds the exponent cap.
  virtual void eval(const ThetaParams& theta, Vec& lin, Mat* grad) const = 0;
};

/// Substitution pair g = (g1, g2): naive g1=w, RC1 g1=mu(w,z), both with
/// g2 = (g1 - tau)_+ and step-type dg2/dtau = -I{g1 > tau}; RC2 uses the
/// smooth g2 = E[(X - tau)_+ | W, Z] with its analytic tau-derivative.
class SubstitutionModel : public RiskModel {
 public:
  enum class Kind { Step, Smooth };

  /// Step form over precomputed g1 values (naive: W_i; RC1: mu_i).
  SubstitutionModel(const Cohort& cohort, Vec g1, double exponent_cap);
  /// Smooth RC2 form: g1 = mu_i, g2 from the posterior N(mu_i, eta^2).
  SubstitutionModel(const Cohort& cohort, Vec mu, double eta, double exponent_cap);

  int p() const override { return p_; }
  void eval(const ThetaParams& theta, Vec& lin, Mat* grad) const override;

  Kind kind() const { return kind_; }
  const Vec& g1() const { return g1_; }

 private:
  const Cohort* cohort_;
  Kind kind_;
  Vec g1_;
  double eta_ = 0.0;
  double cap_;
  int p_;
};

/// Induced relative risk (RR1): lin_i = gamma' z_i + log E[exp(beta X + omega
/// (X-tau)_+) | W_i, Z_i] under the posterior N(mu_i, eta^2).
class InducedRiskModel : public RiskModel {
 public:
  InducedRiskModel(const Cohort& cohort, Vec mu, double eta, double exponent_cap);
  int p() const override { return p_; }
  void eval(const ThetaParams& theta, Vec& lin, Mat* grad) const override;

  const Vec& mu() const { return mu_; }
  double eta() const { return eta_; }

 private:
  const Cohort* cohort_;
  Vec mu_;
  double eta_;
  double cap_;
  int p_;
};

/// Objective / score / information of the Cox partial likelihood over a
/// risk model evaluation. S^(j) sums run over per-stratum risk sets with
/// left truncation; ties handled by the Breslow approximation.
double cox_loglik(const Cohort& cohort, const Vec& lin);

struct ScoreInfo {
  double loglik = 0.0;
  Vec score;  // length dim
  Mat info;   // dim x dim, only when requested
};
ScoreInfo cox_score_info(const Cohort& cohort, const Vec& lin, const Mat& grad,
                         bool want_info);

/// Convenience wrappers evaluating the model first.
double log_partial_likelihood(const Cohort& cohort, const ThetaParams& theta,
                              const RiskModel& model);
Vec score(const Cohort& cohort, const ThetaParams& theta, const RiskModel& model);
Mat information(const Cohort& cohort, const ThetaParams& theta, const RiskModel& model);

}  // namespace threshcox
