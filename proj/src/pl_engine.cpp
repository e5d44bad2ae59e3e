#include "threshcox/pl_engine.hpp"

#include <cmath>

namespace threshcox {

SubstitutionModel::SubstitutionModel(const Cohort& cohort, Vec g1, double exponent_cap)
    : cohort_(&cohort), kind_(Kind::Step), g1_(std::move(g1)), cap_(exponent_cap),
      p_(cohort.p()) {}

SubstitutionModel::SubstitutionModel(const Cohort& cohort, Vec mu, double eta,
                                     double exponent_cap)
    : cohort_(&cohort), kind_(Kind::Smooth), g1_(std::move(mu)), eta_(eta),
      cap_(exponent_cap), p_(cohort.p()) {
  if (eta_ <= 0.0) throw DegenerateEta();
}

void SubstitutionModel::eval(const ThetaParams& theta, Vec& lin, Mat* grad) const {
  const int n = cohort_->n();
  lin.resize(n);
  if (grad) grad->resize(n, dim());
  for (int i = 0; i < n; ++i) {
    const auto& s = cohort_->subject(i);
    const double g1 = g1_[i];
    double g2, dg2;
    if (kind_ == Kind::Step) {
      g2 = std::max(g1 - theta.tau, 0.0);
      dg2 = g1 > theta.tau ? -1.0 : 0.0;  // strict inequality, as in xi
    } else {
      g2 = posterior::expect_plus(g1, eta_, theta.tau);
      dg2 = posterior::expect_plus_dtau(g1, eta_, theta.tau);
    }
    double v = theta.beta * g1 + theta.omega * g2;
    if (p_ > 0) v += theta.gamma.dot(s.covariates);
    if (std::abs(v) > cap_) throw OverflowError(v);
    lin[i] = v;
    if (grad) {
      if (p_ > 0) grad->row(i).head(p_) = s.covariates.transpose();
      (*grad)(i, p_) = g1;
      (*grad)(i, p_ + 1) = g2;
      (*grad)(i, p_ + 2) = theta.omega * dg2;
    }
  }
}

InducedRiskModel::InducedRiskModel(const Cohort& cohort, Vec mu, double eta,
                                   double exponent_cap)
    : cohort_(&cohort), mu_(std::move(mu)), eta_(eta), cap_(exponent_cap),
      p_(cohort.p()) {}

void InducedRiskModel::eval(const ThetaParams& theta, Vec& lin, Mat* grad) const {
  const int n = cohort_->n();
  lin.resize(n);
  if (grad) grad->resize(n, dim());
  for (int i = 0; i < n; ++i) {
    const auto& s = cohort_->subject(i);
    const double zpart = p_ > 0 ? theta.gamma.dot(s.covariates) : 0.0;
    if (grad) {
      auto g = posterior::induced_risk_log_grad(mu_[i], eta_, theta.beta, theta.omega,
                                                theta.tau, cap_);
      double v = zpart + g.log_value;
      if (std::abs(v) > cap_) throw OverflowError(v);
      lin[i] = v;
      if (p_ > 0) grad->row(i).head(p_) = s.covariates.transpose();
      (*grad)(i, p_) = g.dbeta;
      (*grad)(i, p_ + 1) = g.domega;
      (*grad)(i, p_ + 2) = g.dtau;
    } else {
      double v = zpart + std::log(posterior::induced_risk(mu_[i], eta_, theta.beta,
                                                          theta.omega, theta.tau, cap_));
      if (std::abs(v) > cap_) throw OverflowError(v);
      lin[i] = v;
    }
  }
}

namespace {

// One reverse sweep per stratum over time-sorted subjects. A-accumulators
// hold sums over {followup >= t}; B-accumulators over {entry > t}; the
// risk-set sum at t is A - B. O(n log n) once for the sorts (cached in
// Cohort), O(n dim^2) per evaluation.
template <class PerEvent>
void sweep(const Cohort& cohort, const Vec& lin, PerEvent&& per_event,
           double* a0_out, Vec* a1_out, Mat* a2_out, const Mat* grad) {
  const int d = grad ? static_cast<int>(grad->cols()) : 0;
  for (int st = 0; st < cohort.n_strata(); ++st) {
    const auto& idx = cohort.stratum_index(st);
    double A0 = 0.0, B0 = 0.0;
    Vec A1, B1;
    Mat A2, B2;
    if (grad) {
      A1 = Vec::Zero(d);
      B1 = Vec::Zero(d);
      if (a2_out) {
        A2 = Mat::Zero(d, d);
        B2 = Mat::Zero(d, d);
      }
    }
    size_t fp = 0, ep = 0;
    const auto add = [&](int j, double& S0, Vec& S1, Mat& S2, bool with_mats) {
      const double e = std::exp(lin[j]);
      S0 += e;
      if (grad) {
        S1.noalias() += e * grad->row(j).transpose();
        if (with_mats && a2_out)
          S2.noalias() += e * grad->row(j).transpose() * grad->row(j);
      }
    };
    // event subjects sorted by time descending; ties share one risk set
    size_t k = 0;
    while (k < idx.events_by_time_desc.size()) {
      const double t = cohort.subject(idx.events_by_time_desc[k]).followup_time;
      while (fp < idx.by_followup_desc.size() &&
             cohort.subject(idx.by_followup_desc[fp]).followup_time >= t) {
        add(idx.by_followup_desc[fp], A0, A1, A2, true);
        ++fp;
      }
      while (ep < idx.by_entry_desc.size() &&
             cohort.subject(idx.by_entry_desc[ep]).entry_time > t) {
        add(idx.by_entry_desc[ep], B0, B1, B2, true);
        ++ep;
      }
      const double S0 = A0 - B0;
      if (S0 <= 0.0) throw EmptyRiskSet(t);
      if (a0_out) *a0_out = S0;
      if (a1_out) *a1_out = A1 - B1;
      if (a2_out) *a2_out = A2 - B2;
      // all events tied at t
      while (k < idx.events_by_time_desc.size() &&
             cohort.subject(idx.events_by_time_desc[k]).followup_time == t) {
        per_event(idx.events_by_time_desc[k], S0, a1_out, a2_out);
        ++k;
      }
    }
  }
}

}  // namespace

double cox_loglik(const Cohort& cohort, const Vec& lin) {
  double ll = 0.0;
  double s0 = 0.0;
  sweep(
      cohort, lin,
      [&](int i, double S0, Vec*, Mat*) { ll += lin[i] - std::log(S0); }, &s0, nullptr,
      nullptr, nullptr);
  return ll;
}

ScoreInfo cox_score_info(const Cohort& cohort, const Vec& lin, const Mat& grad,
                         bool want_info) {
  const int d = static_cast<int>(grad.cols());
  ScoreInfo out;
  out.score = Vec::Zero(d);
  if (want_info) out.info = Mat::Zero(d, d);
  double s0 = 0.0;
  Vec s1(d);
  Mat s2;
  if (want_info) s2.resize(d, d);
  sweep(
      cohort, lin,
      [&](int i, double S0, Vec* S1, Mat* S2) {
        out.loglik += lin[i] - std::log(S0);
        const Vec e = *S1 / S0;
        out.score += grad.row(i).transpose() - e;
        if (want_info) out.info += *S2 / S0 - e * e.transpose();
      },
      &s0, &s1, want_info ? &s2 : nullptr, &grad);
  if (want_info) out.info = 0.5 * (out.info + out.info.transpose());
  return out;
}

double log_partial_likelihood(const Cohort& cohort, const ThetaParams& theta,
                              const RiskModel& model) {
  Vec lin;
  model.eval(theta, lin, nullptr);
  return cox_loglik(cohort, lin);
}

Vec score(const Cohort& cohort, const ThetaParams& theta, const RiskModel& model) {
  Vec lin;
  Mat grad;
  model.eval(theta, lin, &grad);
  return cox_score_info(cohort, lin, grad, false).score;
}

Mat information(const Cohort& cohort, const ThetaParams& theta, const RiskModel& model) {
  Vec lin;
  Mat grad;
  model.eval(theta, lin, &grad);
  return cox_score_info(cohort, lin, grad, true).info;
}

}  // namespace threshcox
