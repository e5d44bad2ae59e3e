#include <doctest.h>

#include <cmath>

#include "threshcox/quadrature.hpp"

using namespace threshcox;

TEST_CASE("gauss-hermite normal moments") {
  // E[X^k] for X ~ N(mu, eta^2)
  const double mu = 0.7, eta = 1.3;
  CHECK(normal_expectation([](double) { return 1.0; }, mu, eta) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normal_expectation([](double x) { return x; }, mu, eta) ==
        doctest::Approx(mu).epsilon(1e-12));
  CHECK(normal_expectation([&](double x) { return (x - mu) * (x - mu); }, mu, eta) ==
        doctest::Approx(eta * eta).epsilon(1e-12));
  // E[e^X] = exp(mu + eta^2/2)
  CHECK(normal_expectation([](double x) { return std::exp(x); }, mu, eta) ==
        doctest::Approx(std::exp(mu + 0.5 * eta * eta)).epsilon(1e-10));
}

TEST_CASE("gauss-legendre polynomial exactness") {
  const QuadRule& q = gauss_legendre(8);
  // integrates x^k exactly on [-1,1] for k <= 15
  for (int k = 0; k <= 15; ++k) {
    double acc = 0.0;
    for (int i = 0; i < 8; ++i) acc += q.weights[i] * std::pow(q.nodes[i], k);
    const double exact = k % 2 ? 0.0 : 2.0 / (k + 1);
    CHECK(acc == doctest::Approx(exact).epsilon(1e-12));
  }
  // weights sum to 2
  CHECK(q.weights.sum() == doctest::Approx(2.0).epsilon(1e-13));
}
