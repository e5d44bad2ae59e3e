#include "threshcox/optimize.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace threshcox {

namespace {
constexpr double kGolden = 0.6180339887498949;  // 1/phi

double safe_value(const PsiObjective& obj, const Vec& psi) {
  try {
    return obj.value(psi);
  } catch (const OverflowError&) {
    return -std::numeric_limits<double>::infinity();
  }
}
}  // namespace

NewtonResult newton_psi(const PsiObjective& objective, Vec psi0, const OptimConfig& cfg) {
  NewtonResult res;
  res.psi = std::move(psi0);
  const int d = static_cast<int>(res.psi.size());
  double value;
  Vec sc(d);
  Mat info(d, d);
  objective.eval(res.psi, value, sc, info);
  res.objective = value;

  for (res.iterations = 0; res.iterations < cfg.max_newton_iter; ++res.iterations) {
    if (sc.norm() < cfg.psi_tol) {
      res.converged = true;
      return res;
    }
    Eigen::LDLT<Mat> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw SingularInformation();
    Vec step = ldlt.solve(sc);
    if (!step.allFinite()) throw SingularInformation();

    // full Newton step first: a single eval gives the acceptance value and,
    // when accepted (the common case), next iteration's score and information
    const double floor = res.objective - 1e-12 * std::abs(res.objective);
    bool accepted = false, have_derivs = false;
    {
      const Vec cand = res.psi + step;
      double v;
      Vec sc_new(d);
      Mat info_new(d, d);
      bool ok = false;
      try {
        objective.eval(cand, v, sc_new, info_new);
        ok = std::isfinite(v);
      } catch (const OverflowError&) {
      }
      if (ok && v >= floor) {
        res.psi = cand;
        res.objective = v;
        sc = sc_new;
        info = info_new;
        accepted = have_derivs = true;
      }
    }
    // step-halving fallback: never accept a decrease of the objective
    double scale = 0.5;
    for (int h = 1; !accepted && h <= cfg.step_halving_max; ++h, scale *= 0.5) {
      Vec cand = res.psi + scale * step;
      const double v = safe_value(objective, cand);
      if (v >= floor) {
        res.psi = std::move(cand);
        accepted = true;
      }
    }
    if (!accepted) {
      // flat to machine precision along the Newton direction
      res.converged = sc.norm() < std::sqrt(cfg.psi_tol);
      return res;
    }
    if (res.psi.lpNorm<Eigen::Infinity>() > cfg.psi_divergence) {
      res.diverged = true;
      return res;
    }
    if (!have_derivs) {
      objective.eval(res.psi, value, sc, info);
      res.objective = value;
    }
  }
  res.converged = sc.norm() < cfg.psi_tol;
  return res;
}

TauResult profile_tau(const std::function<double(double)>& profiled, double tau_min,
                      double tau_max, const OptimConfig& cfg) {
  TauResult res;

  // optional coarse scan: at small n the profile can be multimodal in tau,
  // where golden section alone only locates a local maximum
  const int S = cfg.tau_scan_points > 0 ? std::max(2, cfg.tau_scan_points) : 1;
  const double scan_step = (tau_max - tau_min) / std::max(1, S - 1);
  std::vector<double> fs(S, std::numeric_limits<double>::infinity());
  if (S > 1) {
    for (int g = 0; g < S; ++g) {
      fs[g] = profiled(tau_min + g * scan_step);
      ++res.evaluations;
    }
  }

  const auto golden = [&](double a, double b, double& tau, double& obj) {
    double x1 = b - kGolden * (b - a);
    double x2 = a + kGolden * (b - a);
    double f1 = profiled(x1), f2 = profiled(x2);
    res.evaluations += 2;
    while (b - a > cfg.tau_tol) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + kGolden * (b - a);
        f2 = profiled(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - kGolden * (b - a);
        f1 = profiled(x1);
      }
      ++res.evaluations;
    }
    tau = f1 >= f2 ? x1 : x2;
    obj = std::max(f1, f2);
  };

  res.tau = tau_min;
  res.objective = -std::numeric_limits<double>::infinity();
  if (S == 1) {
    golden(tau_min, tau_max, res.tau, res.objective);
  } else {
    // refine around the scan argmax only: with near-tied local modes the
    // lattice winner is the canonical answer, and refining a rival mode can
    // return a tau far from it for a negligible objective gain
    int best = 0;
    for (int g = 1; g < S; ++g)
      if (std::isfinite(fs[g]) && fs[g] > fs[best]) best = g;
    if (std::isfinite(fs[best])) {
      golden(tau_min + std::max(0, best - 1) * scan_step,
             tau_min + std::min(S - 1, best + 1) * scan_step, res.tau, res.objective);
      if (fs[best] > res.objective) {
        res.tau = tau_min + best * scan_step;
        res.objective = fs[best];
      }
    }
  }

  // monotone-likelihood guard: compare against the bracket endpoints
  const double fa = profiled(tau_min), fb = profiled(tau_max);
  res.evaluations += 2;
  if (fa > res.objective) {
    res.tau = tau_min;
    res.objective = fa;
    res.boundary = true;
  }
  if (fb > res.objective) {
    res.tau = tau_max;
    res.objective = fb;
    res.boundary = true;
  }
  return res;
}

double quantile_type7(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const int n = static_cast<int>(values.size());
  if (n == 1) return values[0];
  const double h = (n - 1) * q;
  const int lo = static_cast<int>(std::floor(h));
  const int hi = std::min(lo + 1, n - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

std::pair<double, double> tau_bracket(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("tau_bracket: empty values");
  if (!(q > 0.0 && q < 0.5)) throw ConfigError("tau_bracket: q must be in (0, 0.5)");
  const double lo = quantile_type7(values, q);
  const double hi = quantile_type7(std::move(values), 1.0 - q);
  if (lo == hi) throw DegenerateBracket();
  return {lo, hi};
}

}  // namespace threshcox
