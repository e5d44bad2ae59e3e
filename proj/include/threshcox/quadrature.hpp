#pragma once

#include <Eigen/Core>
#include <vector>

namespace threshcox {

/// Nodes and weights of a quadrature rule.
struct QuadRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Gauss-Hermite rule for weight exp(-x^2) on (-inf, inf), via Golub-Welsch.
/// For X ~ N(mu, eta^2): E[f(X)] = pi^{-1/2} sum_k w_k f(mu + sqrt(2) eta x_k).
const QuadRule& gauss_hermite(int n);

/// Gauss-Legendre rule on [-1, 1], via Golub-Welsch.
const QuadRule& gauss_legendre(int n);

/// E[f(X)] for X ~ N(mu, eta^2) by n-node Gauss-Hermite.
template <class F>
double normal_expectation(F&& f, double mu, double eta, int n = 64) {
  const QuadRule& q = gauss_hermite(n);
  const double s = 1.4142135623730951 * eta;
  double acc = 0.0;
  for (int k = 0; k < n; ++k) acc += q.weights[k] * f(mu + s * q.nodes[k]);
  return acc / 1.7724538509055160273;  // sqrt(pi)
}

}  // namespace threshcox
