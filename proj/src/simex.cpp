#include "threshcox/simex.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

namespace threshcox {

namespace {

double polyfit_at(const std::vector<double>& xs, const std::vector<double>& ys,
                  int degree, double x0) {
  const int n = static_cast<int>(xs.size());
  if (n < degree + 1) throw ExtrapolationFailure();
  Mat V(n, degree + 1);
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    double pw = 1.0;
    for (int j = 0; j <= degree; ++j) {
      V(i, j) = pw;
      pw *= xs[i];
    }
    y[i] = ys[i];
  }
  const Vec coef = V.colPivHouseholderQr().solve(y);
  double acc = 0.0, pw = 1.0;
  for (int j = 0; j <= degree; ++j) {
    acc += coef[j] * pw;
    pw *= x0;
  }
  return acc;
}

// y = a + b / (c + lambda), Gauss-Newton from the exact 3-point solution.
double rational_at(const std::vector<double>& xs, const std::vector<double>& ys,
                   double x0) {
  const int n = static_cast<int>(xs.size());
  if (n < 3) throw ExtrapolationFailure();
  // exact solve through first, middle, last point
  const auto exact3 = [&](double& a, double& b, double& c) -> bool {
    const double x1 = xs[0], x2 = xs[n / 2], x3 = xs[n - 1];
    const double y1 = ys[0], y2 = ys[n / 2], y3 = ys[n - 1];
    const double d21 = y2 - y1, d32 = y3 - y2;
    if (d21 == 0.0 || d32 == 0.0) return false;
    const double r = (d32 / d21) * ((x2 - x1) / (x3 - x2));
    // (c+x1)(c+x2) r = (c+x2)(c+x3)  =>  quadratic-free linear in c
    const double denom = 1.0 - r;
    if (denom == 0.0) return false;
    c = (r * x3 - x1) / denom;
    if (c + x1 == 0.0 || c + x2 == 0.0) return false;
    b = d21 / (1.0 / (c + x2) - 1.0 / (c + x1));
    a = y1 - b / (c + x1);
    return true;
  };
  double a, b, c;
  if (!exact3(a, b, c)) throw ExtrapolationFailure();
  for (int it = 0; it < 50; ++it) {
    Mat J(n, 3);
    Vec r(n);
    for (int i = 0; i < n; ++i) {
      const double den = c + xs[i];
      if (den == 0.0) throw ExtrapolationFailure();
      r[i] = ys[i] - (a + b / den);
      J(i, 0) = 1.0;
      J(i, 1) = 1.0 / den;
      J(i, 2) = -b / (den * den);
    }
    const Vec step = (J.transpose() * J + 1e-12 * Mat::Identity(3, 3))
                         .ldlt()
                         .solve(J.transpose() * r);
    a += step[0];
    b += step[1];
    c += step[2];
    if (step.lpNorm<Eigen::Infinity>() < 1e-12) break;
  }
  if (c + x0 == 0.0 || !std::isfinite(a + b / (c + x0))) throw ExtrapolationFailure();
  return a + b / (c + x0);
}

}  // namespace

double extrapolate(const std::vector<double>& lambdas, const std::vector<double>& ys,
                   Extrapolant kind) {
  if (lambdas.size() != ys.size() || lambdas.size() < 2) throw ExtrapolationFailure();
  switch (kind) {
    case Extrapolant::Linear: return polyfit_at(lambdas, ys, 1, -1.0);
    case Extrapolant::Quadratic: return polyfit_at(lambdas, ys, 2, -1.0);
    case Extrapolant::Cubic: return polyfit_at(lambdas, ys, 3, -1.0);
    case Extrapolant::RationalLinear: return rational_at(lambdas, ys, -1.0);
  }
  throw ExtrapolationFailure();
}

FitResult fit_simex(const Cohort& cohort, const MeasurementModel& me,
                    const SimexPlan& plan, const FitConfig& cfg) {
  if (plan.lambda_grid.empty() || plan.b_per_lambda < 2)
    throw ConfigError("fit_simex: need a non-empty lambda grid and B >= 2");
  for (double l : plan.lambda_grid)
    if (!(l > 0.0)) throw ConfigError("fit_simex: lambda grid must be positive");

  FitResult base = fit_naive(cohort, cfg);
  base.method = Method::SIMEX;
  if (!base.converged) return base;

  const double sigma_u = std::sqrt(me.sigma_u2());
  if (sigma_u == 0.0) {
    base.warnings.emplace_back("SimexZeroErrorVariance");
    return base;
  }

  const int n = cohort.n();
  const int d = base.dim();

  std::vector<double> lambdas{0.0};
  std::vector<Vec> means{base.theta_hat.full()};
  std::vector<Mat> covs{base.covariance};
  int nonconverged = 0;

  for (std::size_t g = 0; g < plan.lambda_grid.size(); ++g) {
    const double lam = plan.lambda_grid[g];
    const double noise_sd = std::sqrt(lam) * sigma_u;
    Vec mean_acc = Vec::Zero(d);
    Mat cov_acc = Mat::Zero(d, d);
    int ok = 0;
    for (int b = 0; b < plan.b_per_lambda; ++b) {
      std::seed_seq seq{static_cast<std::uint64_t>(plan.seed),
                        static_cast<std::uint64_t>(g + 1),
                        static_cast<std::uint64_t>(b)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::vector<SubjectRecord> records(cohort.subjects());
      for (int i = 0; i < n; ++i) records[i].surrogate += noise_sd * gauss(rng);
      try {
        const FitResult fr = fit_naive(Cohort::build(std::move(records)), cfg);
        if (fr.converged) {
          mean_acc += fr.theta_hat.full();
          cov_acc += fr.covariance;
          ++ok;
        } else {
          ++nonconverged;
        }
      } catch (const Error&) {
        ++nonconverged;
      }
    }
    if (ok > 0) {
      lambdas.push_back(lam);
      means.push_back(mean_acc / ok);
      covs.push_back(cov_acc / ok);
    }
  }
  if (lambdas.size() < 2) throw ExtrapolationFailure();

  FitResult res = base;
  Vec theta(d);
  Mat cov(d, d);
  for (int j = 0; j < d; ++j) {
    std::vector<double> ys(lambdas.size());
    for (std::size_t k = 0; k < lambdas.size(); ++k) ys[k] = means[k][j];
    theta[j] = extrapolate(lambdas, ys, plan.extrapolant);
  }
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) {
      std::vector<double> ys(lambdas.size());
      for (std::size_t m = 0; m < lambdas.size(); ++m) ys[m] = covs[m](j, k);
      cov(j, k) = extrapolate(lambdas, ys, plan.extrapolant);
    }
  res.theta_hat = ThetaParams::from_full(theta);
  res.covariance = 0.5 * (cov + cov.transpose());
  res.warnings.emplace_back("SimexVarianceApproximate");
  if (nonconverged > 0)
    res.warnings.emplace_back("SimexNonconvergedFits: " + std::to_string(nonconverged));
  return res;
}

}  // namespace threshcox
