#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "threshcox/melib.hpp"
#include "threshcox/optimize.hpp"
#include "threshcox/pl_engine.hpp"

namespace threshcox {

enum class Method { Naive, RC1, RC2, RR1, RR2, MPPLE, SIMEX };

const char* method_name(Method m);

struct FitResult {
  Method method = Method::Naive;
  ThetaParams theta_hat;
  Mat covariance;  // dim x dim; zero matrix when not computed
  bool converged = false;
  bool tau_on_boundary = false;
  int newton_iterations = 0;
  int tau_evaluations = 0;
  double objective = 0.0;
  std::pair<double, double> tau_bracket_used{0.0, 0.0};
  std::vector<std::string> warnings;

  int p() const { return theta_hat.p(); }
  int dim() const { return theta_hat.dim(); }
  Vec se() const;  // sqrt of covariance diagonal
};

struct FitConfig {
  OptimConfig optim;
  std::optional<double> fixed_tau;  // skip the tau profile when set
  bool compute_covariance = true;
  int bootstrap_reps = 50;      // RR2 resamples
  std::uint64_t seed = 20240817ull;
  /// Warm starts (original scale), used by the MPPLE outer loop and bootstrap.
  std::optional<Vec> psi_start;
  std::optional<std::pair<double, double>> tau_bracket_override;
};

/// Naive partial likelihood treating W as X.
FitResult fit_naive(const Cohort& cohort, const FitConfig& cfg = {});

/// Regression calibration, step form: substitute mu(W,Z) for X everywhere.
FitResult fit_rc1(const Cohort& cohort, const MeasurementModel& me,
                  const FitConfig& cfg = {});

/// Improved regression calibration: g2 = E[(X - tau)_+ | W, Z].
FitResult fit_rc2(const Cohort& cohort, const MeasurementModel& me,
                  const FitConfig& cfg = {});

/// Induced relative risk, first stage.
FitResult fit_rr1(const Cohort& cohort, const MeasurementModel& me,
                  const FitConfig& cfg = {});

/// Bootstrap-debiased induced relative risk: 2 theta^_RR1 - mean of RR1 over
/// subject resamples; covariance from the resample spread.
FitResult fit_rr2(const Cohort& cohort, const MeasurementModel& me,
                  const FitConfig& cfg = {});

/// Shared profile driver (exposed for MPPLE and tests): golden-section over
/// tau with warm-started Newton in psi. `kink_values` selects the step-type
/// sandwich; empty means the smooth Omega form. `center` is the location that
/// was subtracted from g1/mu before building `model`; tau is reported back on
/// the original scale.
FitResult profile_fit(const Cohort& cohort, const RiskModel& model,
                      const std::vector<double>& bracket_values, double center,
                      const std::vector<double>& kink_values, Method method,
                      const FitConfig& cfg);

/// Per-subject posterior means mu(W_i, Z_i).
Vec posterior_means(const Cohort& cohort, const MeasurementModel& me);

}  // namespace threshcox
