#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "threshcox/pl_engine.hpp"

using namespace threshcox;

namespace {

ThetaParams random_theta(int p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  ThetaParams th = ThetaParams::zero(p);
  for (int k = 0; k < p; ++k) th.gamma[k] = u(rng);
  th.beta = u(rng);
  th.omega = u(rng);
  th.tau = 0.3 * u(rng);
  return th;
}

}  // namespace

TEST_CASE("engine loglik/score match brute force across cohort shapes") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 12; ++rep) {
    const int p = rep % 3;
    const int strata = 1 + rep % 2;
    const Cohort c = oracles::random_cohort(50 + rep * 7, p, rng, strata,
                                            /*truncation=*/rep % 2 == 1);
    const ThetaParams th = random_theta(p, rng);
    const SubstitutionModel model(
        c, [&] {
          Vec g1(c.n());
          for (int i = 0; i < c.n(); ++i) g1[i] = c.subject(i).surrogate;
          return g1;
        }(), 20.0);
    Vec lin;
    Mat grad;
    model.eval(th, lin, &grad);
    CHECK(cox_loglik(c, lin) ==
          doctest::Approx(oracles::brute_loglik(c, lin)).epsilon(1e-10));
    const Vec s_fast = cox_score_info(c, lin, grad, false).score;
    const Vec s_brute = oracles::brute_score(c, lin, grad);
    CHECK((s_fast - s_brute).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("analytic scores vs finite differences of the objective") {
  std::mt19937_64 rng(123);
  const int p = 1;
  const Cohort c = oracles::random_cohort(80, p, rng);
  Vec w(c.n());
  for (int i = 0; i < c.n(); ++i) w[i] = c.subject(i).surrogate;

  const auto check_model = [&](const RiskModel& model, bool skip_tau) {
    const ThetaParams th = random_theta(p, rng);
    Vec lin;
    Mat grad;
    model.eval(th, lin, &grad);
    const Vec sc = cox_score_info(c, lin, grad, false).score;
    const Vec fd = oracles::fd_gradient(
        [&](const Vec& full) {
          return log_partial_likelihood(c, ThetaParams::from_full(full), model);
        },
        th.full());
    const int d = model.dim();
    for (int j = 0; j < d - (skip_tau ? 1 : 0); ++j)
      CHECK(sc[j] == doctest::Approx(fd[j]).epsilon(1e-6).scale(1.0));
    if (!skip_tau)
      CHECK(sc[d - 1] == doctest::Approx(fd[d - 1]).epsilon(1e-5).scale(1.0));
  };

  // step model: tau component is a one-sided derivative; check psi block only
  check_model(SubstitutionModel(c, w, 20.0), /*skip_tau=*/true);
  check_model(SubstitutionModel(c, w, 0.4, 20.0), /*skip_tau=*/false);
  check_model(InducedRiskModel(c, w, 0.4, 20.0), /*skip_tau=*/false);
}

TEST_CASE("information matches FD of score in the psi block") {
  std::mt19937_64 rng(321);
  const Cohort c = oracles::random_cohort(60, 0, rng);
  Vec w(c.n());
  for (int i = 0; i < c.n(); ++i) w[i] = c.subject(i).surrogate;
  const SubstitutionModel model(c, w, 20.0);
  const ThetaParams th = random_theta(0, rng);

  Vec lin;
  Mat grad;
  model.eval(th, lin, &grad);
  const Mat info = cox_score_info(c, lin, grad, true).info;

  // psi-linear model: info = -Hessian of loglik in (beta, omega)
  const double h = 1e-5;
  const auto score_at = [&](double dbeta, double domega) {
    ThetaParams t = th;
    t.beta += dbeta;
    t.omega += domega;
    Vec l2;
    Mat g2;
    model.eval(t, l2, &g2);
    return cox_score_info(c, l2, g2, false).score;
  };
  const Vec d_beta = (score_at(h, 0) - score_at(-h, 0)) / (2 * h);
  const Vec d_omega = (score_at(0, h) - score_at(0, -h)) / (2 * h);
  for (int b = 0; b < 2; ++b) {
    CHECK(-d_beta[b] == doctest::Approx(info(0, b)).epsilon(1e-4).scale(1.0));
    CHECK(-d_omega[b] == doctest::Approx(info(1, b)).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("overflow cap enforced") {
  std::mt19937_64 rng(9);
  const Cohort c = oracles::random_cohort(10, 0, rng);
  Vec g1 = Vec::Constant(c.n(), 30.0);
  const SubstitutionModel model(c, g1, 20.0);
  ThetaParams th = ThetaParams::zero(0);
  th.beta = 1.0;
  Vec lin;
  CHECK_THROWS_AS(model.eval(th, lin, nullptr), OverflowError);
}
