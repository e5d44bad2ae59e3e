#include <doctest.h>

#include <cmath>
#include <random>

#include "threshcox/melib.hpp"
#include "threshcox/quadrature.hpp"
#include "threshcox/survcore.hpp"

using namespace threshcox;

namespace {

// Gauss-Legendre split at the kink tau: the integrand is smooth on each
// panel, so 64 nodes per side reach machine precision (plain Gauss-Hermite
// does not, because of the kink).
template <typename F>
double split_normal_expectation(F f, double mu, double eta, double tau) {
  const QuadRule& gl = gauss_legendre(64);
  const double lo = mu - 10.0 * eta, hi = mu + 10.0 * eta;
  const double mid = std::min(std::max(tau, lo), hi);
  double acc = 0.0;
  for (const auto& panel : {std::pair{lo, mid}, std::pair{mid, hi}}) {
    const double half = 0.5 * (panel.second - panel.first);
    const double cen = 0.5 * (panel.second + panel.first);
    if (half <= 0.0) continue;
    for (int k = 0; k < gl.nodes.size(); ++k) {
      const double x = cen + half * gl.nodes[k];
      acc += half * gl.weights[k] * f(x) * norm_pdf((x - mu) / eta) / eta;
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("posterior moments: closed forms vs 64-node quadrature") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_plus = 0.0, worst_risk = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const double mu = -2.0 + 4.0 * u(rng);
    const double eta = 0.05 + 1.5 * u(rng);
    const double tau = -2.0 + 4.0 * u(rng);
    const double beta = -1.0 + 2.0 * u(rng);
    const double omega = -1.0 + 2.0 * u(rng);

    const double plus_cf = posterior::expect_plus(mu, eta, tau);
    const double plus_q = split_normal_expectation(
        [&](double x) { return std::max(x - tau, 0.0); }, mu, eta, tau);
    if (plus_q > 1e-8)
      worst_plus = std::max(worst_plus, std::abs(plus_cf - plus_q) / plus_q);

    const double risk_cf = posterior::induced_risk(mu, eta, beta, omega, tau);
    const double risk_q = split_normal_expectation(
        [&](double x) {
          return std::exp(beta * x + omega * std::max(x - tau, 0.0));
        },
        mu, eta, tau);
    worst_risk = std::max(worst_risk, std::abs(risk_cf - risk_q) / risk_q);
  }
  CHECK(worst_plus < 1e-8);
  CHECK(worst_risk < 1e-8);
}

TEST_CASE("induced risk log-gradient vs finite differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-6;
  for (int it = 0; it < 200; ++it) {
    const double mu = -1.5 + 3.0 * u(rng);
    const double eta = 0.1 + u(rng);
    const double tau = -1.5 + 3.0 * u(rng);
    const double beta = -0.8 + 1.6 * u(rng);
    const double omega = -0.8 + 1.6 * u(rng);
    const auto g = posterior::induced_risk_log_grad(mu, eta, beta, omega, tau);
    const auto lr = [&](double b, double o, double t) {
      return std::log(posterior::induced_risk(mu, eta, b, o, t));
    };
    CHECK(g.log_value == doctest::Approx(lr(beta, omega, tau)).epsilon(1e-12));
    CHECK(g.dbeta ==
          doctest::Approx((lr(beta + h, omega, tau) - lr(beta - h, omega, tau)) /
                          (2 * h))
              .epsilon(1e-5));
    CHECK(g.domega ==
          doctest::Approx((lr(beta, omega + h, tau) - lr(beta, omega - h, tau)) /
                          (2 * h))
              .epsilon(1e-5));
    CHECK(g.dtau ==
          doctest::Approx((lr(beta, omega, tau + h) - lr(beta, omega, tau - h)) /
                          (2 * h))
              .scale(1.0)
              .epsilon(1e-4));
  }
}

TEST_CASE("expect_plus tau-derivative and eta=0 limits") {
  CHECK(posterior::expect_plus_dtau(0.5, 0.3, 0.1) ==
        doctest::Approx(-norm_cdf((0.5 - 0.1) / 0.3)));
  CHECK(posterior::expect_plus(0.7, 0.0, 0.2) == doctest::Approx(0.5));
  CHECK(posterior::expect_plus(0.1, 0.0, 0.2) == doctest::Approx(0.0));
  CHECK(posterior::induced_risk(0.4, 0.0, 1.0, 2.0, 0.1) ==
        doctest::Approx(std::exp(0.4 + 2.0 * 0.3)));
  CHECK_THROWS_AS(posterior::induced_risk(0.0, 1.0, 7.0, 0.0, 0.0), OverflowError);
}

TEST_CASE("measurement model posterior") {
  const MeasurementModel me(0.0, Vec(), 0.64, 0.36);  // rho = 0.8, sigma_w2 = 1
  CHECK(me.sigma_w2() == doctest::Approx(1.0));
  CHECK(me.reliability() == doctest::Approx(0.64));
  CHECK(me.eta() == doctest::Approx(std::sqrt(0.64 * 0.36)));
  CHECK(me.cond_mean(1.0, Vec()) == doctest::Approx(0.64));

  const MeasurementModel cal = MeasurementModel::from_calibration_line(
      0.9737, 0.6349, 0.5817);
  CHECK(cal.reliability() == doctest::Approx(0.6349));
  CHECK(cal.eta() * cal.eta() == doctest::Approx(0.5817));
  CHECK(cal.cond_mean(2.0, Vec()) == doctest::Approx(0.9737 + 0.6349 * 2.0));
}

TEST_CASE("ANOVA nuisance estimation") {
  // k persons, m replicates, known generating values
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sx = 0.8, su = 0.6;
  ReliabilityStudy study;
  study.measurements.resize(2000);
  for (auto& row : study.measurements) {
    const double x = 1.5 + sx * gauss(rng);
    row = {x + su * gauss(rng), x + su * gauss(rng)};
  }
  const NuisanceEstimate est = estimate_nuisance(study);
  CHECK_FALSE(est.sigma_x2_clamped);
  CHECK(est.model.sigma_u2() == doctest::Approx(su * su).epsilon(0.08));
  CHECK(est.model.sigma_x2() == doctest::Approx(sx * sx).epsilon(0.12));
  CHECK(est.model.alpha0() == doctest::Approx(1.5).epsilon(0.05));

  // clamping: pure noise, no between-person variance
  ReliabilityStudy noise;
  noise.measurements.resize(500);
  std::mt19937_64 rng2(3);
  for (auto& row : noise.measurements)
    row = {10.0 * gauss(rng2), 10.0 * gauss(rng2)};
  const NuisanceEstimate clamped = estimate_nuisance(noise);
  CHECK(clamped.model.sigma_x2() >= 0.0);
}
