#include "threshcox/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>

namespace threshcox {

namespace {

// Golub-Welsch: eigen-decompose the Jacobi matrix of the three-term recurrence.
// diag = a_k, offdiag = b_k; weights = mu0 * (first eigenvector component)^2.
QuadRule golub_welsch(const Eigen::VectorXd& offdiag, double mu0) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) J(k, k + 1) = J(k + 1, k) = offdiag[k];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  QuadRule r;
  r.nodes = es.eigenvalues();
  r.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    double v0 = es.eigenvectors()(0, k);
    r.weights[k] = mu0 * v0 * v0;
  }
  return r;
}

std::mutex cache_mutex;

}  // namespace

const QuadRule& gauss_hermite(int n) {
  static std::map<int, QuadRule> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Eigen::VectorXd b(n - 1);
  for (int k = 1; k < n; ++k) b[k - 1] = std::sqrt(k / 2.0);
  return cache.emplace(n, golub_welsch(b, std::sqrt(M_PI))).first->second;
}

const QuadRule& gauss_legendre(int n) {
  static std::map<int, QuadRule> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Eigen::VectorXd b(n - 1);
  for (int k = 1; k < n; ++k) b[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  return cache.emplace(n, golub_welsch(b, 2.0)).first->second;
}

}  // namespace threshcox
