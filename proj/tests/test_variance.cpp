#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "threshcox/estimators.hpp"
#include "threshcox/simharness.hpp"
#include "threshcox/variance.hpp"

using namespace threshcox;

namespace {

Cohort sim_cohort(int n, double rho, double omega, std::uint64_t seed) {
  SimScenario sc;
  sc.n = n;
  sc.rho_xw = rho;
  sc.cumulative_incidence = 0.5;
  sc.theta_true = ThetaParams::zero(0);
  sc.theta_true.beta = std::log(1.5);
  sc.theta_true.omega = omega;
  sc.theta_true.tau = 0.0;
  sc.seed = seed;
  return generate_cohort(sc, calibrate_baseline_hazard(sc), 0).observed;
}

}  // namespace

TEST_CASE("influence rows sum to the score (~0 at the fit)") {
  const Cohort c = sim_cohort(500, 0.8, std::log(2.0), 31);
  const MeasurementModel me(0.0, Vec(), 0.64, 0.36);
  FitConfig cfg;
  cfg.compute_covariance = false;
  const FitResult fr = fit_rc2(c, me, cfg);
  REQUIRE(fr.converged);

  const Vec mu = posterior_means(c, me);
  const double center = mu.mean();
  const SubstitutionModel model(c, Vec(mu.array() - center), me.eta(), 20.0);
  ThetaParams th = fr.theta_hat;
  th.tau -= center;
  Vec lin;
  Mat grad;
  model.eval(th, lin, &grad);
  const Mat H = influence_matrix(c, lin, grad);
  const Vec colsum = H.colwise().sum().transpose();
  const Vec sc_vec = cox_score_info(c, lin, grad, false).score;
  CHECK((colsum - sc_vec).lpNorm<Eigen::Infinity>() < 1e-8);
  // psi block of the score vanishes at the fit
  CHECK(colsum.head(2).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("sandwich estimators are symmetric PSD and 1/n-scaled") {
  const MeasurementModel me(0.0, Vec(), 0.64, 0.36);
  double prev_var = 0.0;
  for (int n : {400, 1600}) {
    const Cohort c = sim_cohort(n, 0.8, std::log(2.0), 13);
    const FitResult fr = fit_rc2(c, me, FitConfig{});
    REQUIRE(fr.converged);
    CHECK((fr.covariance - fr.covariance.transpose()).lpNorm<Eigen::Infinity>() <
          1e-12);
    const Eigen::SelfAdjointEigenSolver<Mat> es(fr.covariance);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
    const double var_beta = fr.covariance(0, 0);
    if (prev_var > 0.0) CHECK(var_beta < prev_var);  // larger n, smaller variance
    prev_var = var_beta;
  }
}

TEST_CASE("sandwich matches inverse information on error-free data") {
  // omega = 0 truth, tau fixed at its true value, no measurement error:
  // correctly specified model, sandwich ~ model-based variance.
  const Cohort c = sim_cohort(5000, 1.0, 0.0, 7);
  FitConfig cfg;
  cfg.fixed_tau = 0.0;
  const FitResult fr = fit_naive(c, cfg);
  REQUIRE(fr.converged);

  Vec w(c.n());
  for (int i = 0; i < c.n(); ++i) w[i] = c.subject(i).surrogate;
  const double center = w.mean();
  const SubstitutionModel model(c, Vec(w.array() - center), 20.0);
  ThetaParams th = fr.theta_hat;
  th.tau -= center;
  const Mat info = information(c, th, model);
  const Mat inv_info = info.topLeftCorner(2, 2).inverse();
  CHECK(fr.covariance(0, 0) ==
        doctest::Approx(inv_info(0, 0)).epsilon(0.10));
}

TEST_CASE("smooth and step sandwiches agree on the same smooth fit") {
  const Cohort c = sim_cohort(2000, 0.8, std::log(2.0), 19);
  const MeasurementModel me(0.0, Vec(), 0.64, 0.36);
  FitConfig cfg;
  cfg.compute_covariance = false;
  const FitResult fr = fit_rc2(c, me, cfg);
  REQUIRE(fr.converged);

  const Vec mu = posterior_means(c, me);
  const double center = mu.mean();
  const SubstitutionModel model(c, Vec(mu.array() - center), me.eta(), 20.0);
  ThetaParams th = fr.theta_hat;
  th.tau -= center;
  const Mat omega_cov = sandwich_smooth(c, th, model);
  // smooth model has no kinks: the FD-Lambda sandwich applies too
  const Mat fd_cov = sandwich_naive_rc1(c, th, model, {});
  for (int j = 0; j < 2; ++j)
    CHECK(fd_cov(j, j) == doctest::Approx(omega_cov(j, j)).epsilon(0.05));
}
