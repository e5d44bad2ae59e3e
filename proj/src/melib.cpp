#include "threshcox/melib.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace threshcox {

double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }
double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

MeasurementModel::MeasurementModel(double alpha0, Eigen::VectorXd alpha1, double sigma_x2,
                                   double sigma_u2)
    : alpha0_(alpha0), alpha1_(std::move(alpha1)), sigma_x2_(sigma_x2), sigma_u2_(sigma_u2) {
  if (sigma_x2_ < 0.0 || sigma_u2_ < 0.0)
    throw ConfigError("variance components must be non-negative");
  sigma_w2_ = sigma_x2_ + sigma_u2_;
  lambda_ = sigma_w2_ > 0.0 ? sigma_x2_ / sigma_w2_ : 0.0;
  eta_ = sigma_w2_ > 0.0 ? std::sqrt(sigma_x2_ * sigma_u2_ / sigma_w2_) : 0.0;
}

MeasurementModel MeasurementModel::error_free(double alpha0) {
  return MeasurementModel(alpha0, Eigen::VectorXd(), 1.0, 0.0);
}

MeasurementModel MeasurementModel::from_calibration_line(double a, double b, double v) {
  if (v < 0.0) throw ConfigError("Var(X|W) must be non-negative");
  if (v == 0.0) {
    if (b != 1.0 || a != 0.0) throw ConfigError("Var(X|W)=0 requires E(X|W)=W");
    return error_free();
  }
  if (b <= 0.0 || b >= 1.0)
    throw ConfigError("calibration slope must lie in (0,1) when Var(X|W) > 0");
  // lambda = b, eta^2 = v  =>  sigma_w^2 = v / (b (1-b)).
  const double sigma_w2 = v / (b * (1.0 - b));
  const double sigma_x2 = b * sigma_w2;
  const double mu_x = a / (1.0 - b);
  return MeasurementModel(mu_x, Eigen::VectorXd(), sigma_x2, sigma_w2 - sigma_x2);
}

double MeasurementModel::cond_mean(double w, const Eigen::VectorXd& z) const {
  const double m = mu_x(z);
  return m + lambda_ * (w - m);
}

double MeasurementModel::cond_expect_plus(double w, const Eigen::VectorXd& z,
                                          double tau) const {
  return posterior::expect_plus(cond_mean(w, z), eta_, tau);
}

double MeasurementModel::cond_expect_plus_dtau(double w, const Eigen::VectorXd& z,
                                               double tau) const {
  if (eta_ == 0.0) throw DegenerateEta();
  return posterior::expect_plus_dtau(cond_mean(w, z), eta_, tau);
}

namespace posterior {

double expect_plus(double mu, double eta, double tau) {
  if (eta == 0.0) return std::max(mu - tau, 0.0);
  const double d = (mu - tau) / eta;
  return (mu - tau) * norm_cdf(d) + eta * norm_pdf(d);
}

double expect_plus_dtau(double mu, double eta, double tau) {
  return -norm_cdf((mu - tau) / eta);
}

namespace {
inline double checked_exp(double x, double cap) {
  if (x > cap) throw OverflowError(x);
  return std::exp(x);
}
}  // namespace

double induced_risk(double mu, double eta, double beta, double omega, double tau,
                    double cap) {
  if (eta == 0.0)
    return checked_exp(beta * mu + omega * std::max(mu - tau, 0.0), cap);
  const double e2 = eta * eta;
  const double bo = beta + omega;
  const double a = beta * mu + 0.5 * beta * beta * e2;
  const double b = -omega * tau + bo * mu + 0.5 * bo * bo * e2;
  const double za = (tau - mu - beta * e2) / eta;
  const double zb = (tau - mu - bo * e2) / eta;
  return checked_exp(a, cap) * norm_cdf(za) + checked_exp(b, cap) * (1.0 - norm_cdf(zb));
}

InducedRiskLog induced_risk_log_grad(double mu, double eta, double beta, double omega,
                                     double tau, double cap) {
  InducedRiskLog out;
  if (eta == 0.0) {
    const double plus = std::max(mu - tau, 0.0);
    out.log_value = beta * mu + omega * plus;
    if (out.log_value > cap) throw OverflowError(out.log_value);
    out.dbeta = mu;
    out.domega = plus;
    out.dtau = mu > tau ? -omega : 0.0;
    return out;
  }
  const double e2 = eta * eta;
  const double bo = beta + omega;
  const double ea = beta * mu + 0.5 * beta * beta * e2;
  const double eb = -omega * tau + bo * mu + 0.5 * bo * bo * e2;
  if (ea > cap) throw OverflowError(ea);
  if (eb > cap) throw OverflowError(eb);
  const double za = (tau - mu - beta * e2) / eta;
  const double zb = (tau - mu - bo * e2) / eta;
  const double A = std::exp(ea) * norm_cdf(za);
  const double B = std::exp(eb) * (1.0 - norm_cdf(zb));
  const double R = A + B;
  // The phi boundary terms of dA/dtau and dB/dtau cancel exactly:
  // exp(ea) phi(za) = exp(eb) phi(zb) = exp(beta tau) phi((tau-mu)/eta).
  const double dA_dbeta = (mu + beta * e2) * A - eta * std::exp(ea) * norm_pdf(za);
  const double dB_dbeta = (mu + bo * e2) * B + eta * std::exp(eb) * norm_pdf(zb);
  const double dB_domega = (mu - tau + bo * e2) * B + eta * std::exp(eb) * norm_pdf(zb);
  out.log_value = std::log(R);
  out.dbeta = (dA_dbeta + dB_dbeta) / R;
  out.domega = dB_domega / R;
  out.dtau = -omega * B / R;
  return out;
}

}  // namespace posterior

NuisanceEstimate estimate_nuisance(const ReliabilityStudy& study) {
  const auto& y = study.measurements;
  const int k = static_cast<int>(y.size());
  int N = 0;
  bool any_replicated = false;
  for (const auto& row : y) {
    if (row.empty()) throw ConfigError("reliability study has an empty row");
    N += static_cast<int>(row.size());
    if (row.size() >= 2) any_replicated = true;
  }
  if (!any_replicated || k < 2) throw Unidentifiable();

  double grand = 0.0;
  std::vector<double> row_mean(k);
  for (int i = 0; i < k; ++i) {
    double s = 0.0;
    for (double v : y[i]) s += v;
    row_mean[i] = s / y[i].size();
    grand += s;
  }
  grand /= N;

  double ss_within = 0.0, ss_between = 0.0, sum_n2 = 0.0;
  for (int i = 0; i < k; ++i) {
    const double ni = static_cast<double>(y[i].size());
    for (double v : y[i]) ss_within += (v - row_mean[i]) * (v - row_mean[i]);
    ss_between += ni * (row_mean[i] - grand) * (row_mean[i] - grand);
    sum_n2 += ni * ni;
  }
  const double ms_within = ss_within / (N - k);
  const double ms_between = ss_between / (k - 1);
  const double m0 = (N - sum_n2 / N) / (k - 1);  // effective replicate count

  const double sigma_u2 = ms_within;
  const double raw_x2 = (ms_between - ms_within) / m0;
  const bool clamped = raw_x2 < 0.0;
  const double sigma_x2 = clamped ? 0.0 : raw_x2;

  double alpha0 = grand;
  Eigen::VectorXd alpha1;
  if (study.covariates.size() > 0) {
    // least squares of person means on covariates, intercept included
    const int p = static_cast<int>(study.covariates.cols());
    Eigen::MatrixXd X(k, p + 1);
    X.col(0).setOnes();
    X.rightCols(p) = study.covariates;
    Eigen::VectorXd m = Eigen::Map<Eigen::VectorXd>(row_mean.data(), k);
    Eigen::VectorXd coef = X.colPivHouseholderQr().solve(m);
    alpha0 = coef[0];
    alpha1 = coef.tail(p);
  }

  NuisanceEstimate est{MeasurementModel(alpha0, alpha1, sigma_x2, sigma_u2), clamped};
  return est;
}

}  // namespace threshcox
