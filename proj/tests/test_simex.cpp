#include <doctest.h>

#include <cmath>

#include "threshcox/simex.hpp"
#include "threshcox/simharness.hpp"

using namespace threshcox;

namespace {

Cohort sim_cohort(int n, double rho, std::uint64_t seed) {
  SimScenario sc;
  sc.n = n;
  sc.rho_xw = rho;
  sc.theta_true = ThetaParams::zero(0);
  sc.theta_true.beta = std::log(1.5);
  sc.theta_true.omega = std::log(2.0);
  sc.seed = seed;
  return generate_cohort(sc, calibrate_baseline_hazard(sc), 0).observed;
}

}  // namespace

TEST_CASE("linear extrapolation is exact on affine points") {
  std::vector<double> ls{0.0, 0.5, 1.0, 2.0};
  std::vector<double> ys;
  for (double l : ls) ys.push_back(3.0 - 0.7 * l);
  CHECK(extrapolate(ls, ys, Extrapolant::Linear) == doctest::Approx(3.7).epsilon(1e-10));
}

TEST_CASE("quadratic and cubic extrapolation are exact on matching polynomials") {
  std::vector<double> ls{0.0, 0.5, 1.0, 1.5, 2.0};
  std::vector<double> yq, yc;
  for (double l : ls) {
    yq.push_back(1.0 + 2.0 * l - 0.5 * l * l);
    yc.push_back(0.5 - l + 0.25 * l * l + 0.1 * l * l * l);
  }
  CHECK(extrapolate(ls, yq, Extrapolant::Quadratic)
        == doctest::Approx(1.0 - 2.0 - 0.5).epsilon(1e-9));
  CHECK(extrapolate(ls, yc, Extrapolant::Cubic)
        == doctest::Approx(0.5 + 1.0 + 0.25 - 0.1).epsilon(1e-8));
}

TEST_CASE("rational-linear extrapolation recovers a + b/(c + lambda)") {
  const double a = 0.4, b = 1.3, c = 2.5;
  std::vector<double> ls{0.0, 0.5, 1.0, 1.5, 2.0};
  std::vector<double> ys;
  for (double l : ls) ys.push_back(a + b / (c + l));
  CHECK(extrapolate(ls, ys, Extrapolant::RationalLinear)
        == doctest::Approx(a + b / (c - 1.0)).epsilon(1e-6));
}

TEST_CASE("extrapolation failure on too few points") {
  CHECK_THROWS_AS(extrapolate({1.0}, {2.0}, Extrapolant::Linear), ExtrapolationFailure);
  CHECK_THROWS_AS(extrapolate({0.0, 1.0}, {1.0, 2.0}, Extrapolant::Quadratic),
                  ExtrapolationFailure);
}

TEST_CASE("simex with zero error variance reduces to the naive fit") {
  const Cohort c = sim_cohort(400, 1.0, 11);
  const MeasurementModel me(0.0, Vec(), 1.0, 0.0);
  FitConfig cfg;
  cfg.compute_covariance = false;
  SimexPlan plan;
  plan.b_per_lambda = 5;
  const FitResult sx = fit_simex(c, me, plan, cfg);
  const FitResult nv = fit_naive(c, cfg);
  REQUIRE(sx.converged);
  CHECK((sx.theta_hat.full() - nv.theta_hat.full()).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("simex is deterministic under a fixed seed and moves toward truth") {
  const Cohort c = sim_cohort(600, 0.8, 13);
  const MeasurementModel me(0.0, Vec(), 0.64, 0.36);
  FitConfig cfg;
  cfg.compute_covariance = false;
  SimexPlan plan;
  plan.b_per_lambda = 20;
  plan.seed = 7;
  const FitResult a = fit_simex(c, me, plan, cfg);
  const FitResult b = fit_simex(c, me, plan, cfg);
  REQUIRE(a.converged);
  CHECK((a.theta_hat.full() - b.theta_hat.full()).lpNorm<Eigen::Infinity>() == 0.0);

  const FitResult nv = fit_naive(c, cfg);
  // extrapolation should pull beta away from the attenuated naive value
  CHECK(std::abs(a.theta_hat.beta - nv.theta_hat.beta) > 1e-3);
}
