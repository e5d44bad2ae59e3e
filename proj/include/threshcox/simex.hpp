#pragma once

#include "threshcox/estimators.hpp"

namespace threshcox {

enum class Extrapolant { Linear, Quadratic, Cubic, RationalLinear };

struct SimexPlan {
  std::vector<double> lambda_grid{0.5, 1.0, 1.5, 2.0};  // all > 0; 0 is the naive fit
  int b_per_lambda = 200;
  Extrapolant extrapolant = Extrapolant::Linear;
  std::uint64_t seed = 20240817ull;
};

/// Least-squares extrapolation of (lambda, y) points to lambda = -1.
/// Throws ExtrapolationFailure when the points cannot pin down the curve.
double extrapolate(const std::vector<double>& lambdas, const std::vector<double>& ys,
                   Extrapolant kind);

/// Simulation-extrapolation: remeasure W_ib = W_i + sqrt(lambda) sigma_u eps,
/// refit naive per pseudo-dataset, average within lambda, extrapolate each
/// theta component to lambda = -1. Covariance is the component-wise
/// extrapolation of the averaged sandwich covariances (approximate; warned).
FitResult fit_simex(const Cohort& cohort, const MeasurementModel& me,
                    const SimexPlan& plan, const FitConfig& cfg = {});

}  // namespace threshcox
