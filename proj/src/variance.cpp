#include "threshcox/variance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "threshcox/errors.hpp"

namespace threshcox {

Mat influence_matrix(const Cohort& cohort, const Vec& lin, const Mat& grad) {
  const int n = cohort.n();
  const int d = static_cast<int>(grad.cols());
  Mat H = Mat::Zero(n, d);

  for (int st = 0; st < cohort.n_strata(); ++st) {
    const Cohort::StratumIndex& idx = cohort.stratum_index(st);
    const std::vector<double>& times = idx.distinct_event_times;  // ascending
    const std::size_t K = times.size();
    if (K == 0) continue;

    // S0 and e = S1/S0 at each event time, via one descending-time pass with
    // the A-minus-B accumulators (A over {followup >= t}, B over {entry > t}).
    std::vector<double> s0(K);
    std::vector<Vec> e(K);
    {
      double a0 = 0.0, b0 = 0.0;
      Vec a1 = Vec::Zero(d), b1 = Vec::Zero(d);
      std::size_t ai = 0, bi = 0;
      for (std::size_t kk = K; kk-- > 0;) {
        const double t = times[kk];
        while (ai < idx.by_followup_desc.size()) {
          const int i = idx.by_followup_desc[ai];
          if (cohort.subject(i).followup_time < t) break;
          const double r = std::exp(lin[i]);
          a0 += r;
          a1.noalias() += r * grad.row(i).transpose();
          ++ai;
        }
        while (bi < idx.by_entry_desc.size()) {
          const int i = idx.by_entry_desc[bi];
          if (cohort.subject(i).entry_time <= t) break;
          const double r = std::exp(lin[i]);
          b0 += r;
          b1.noalias() += r * grad.row(i).transpose();
          ++bi;
        }
        s0[kk] = a0 - b0;
        if (s0[kk] <= 0.0) throw EmptyRiskSet(t);
        e[kk] = (a1 - b1) / s0[kk];
      }
    }

    // Prefix sums over ascending event times:
    //   csum(j) = sum_{k<j} c_k,  dsum(j) = sum_{k<j} c_k e_k,
    // with the compensator weight c_k = m_k / S0(t_k).
    std::vector<double> csum(K + 1, 0.0);
    std::vector<Vec> dsum(K + 1, Vec::Zero(d));
    for (std::size_t k = 0; k < K; ++k) {
      const double c = idx.event_multiplicity[k] / s0[k];
      csum[k + 1] = csum[k] + c;
      dsum[k + 1] = dsum[k] + c * e[k];
    }

    for (int i : idx.members) {
      const SubjectRecord& rec = cohort.subject(i);
      const Vec ui = grad.row(i).transpose();
      Vec h = Vec::Zero(d);
      if (rec.event) {
        const std::size_t k = static_cast<std::size_t>(
            std::lower_bound(times.begin(), times.end(), rec.followup_time) -
            times.begin());
        h += ui - e[k];
      }
      // event times with entry_i <= t_k <= followup_i
      const std::size_t lo = static_cast<std::size_t>(
          std::lower_bound(times.begin(), times.end(), rec.entry_time) - times.begin());
      const std::size_t hi = static_cast<std::size_t>(
          std::upper_bound(times.begin(), times.end(), rec.followup_time) -
          times.begin());
      if (hi > lo) {
        const double P = csum[hi] - csum[lo];
        const Vec Q = dsum[hi] - dsum[lo];
        h -= std::exp(lin[i]) * (P * ui - Q);
      }
      H.row(i) = h.transpose();
    }
  }
  return H;
}

namespace {

Vec score_at(const Cohort& cohort, const RiskModel& model, const ThetaParams& theta) {
  Vec lin;
  Mat grad;
  model.eval(theta, lin, &grad);
  return cox_score_info(cohort, lin, grad, false).score;
}

Mat meat_matrix(const Cohort& cohort, const Vec& lin, const Mat& grad) {
  const Mat H = influence_matrix(cohort, lin, grad);
  return H.transpose() * H / static_cast<double>(cohort.n());
}

}  // namespace

Mat sandwich_naive_rc1(const Cohort& cohort, const ThetaParams& theta_hat,
                       const RiskModel& model, const std::vector<double>& kink_values,
                       SandwichDiagnostics* diag) {
  const int n = cohort.n();
  const int d = model.dim();
  const int p = model.p();

  Vec lin;
  Mat grad;
  model.eval(theta_hat, lin, &grad);
  const Mat C = meat_matrix(cohort, lin, grad);

  // Finite-difference Jacobian of score/n. Psi components use a central
  // step; the tau column must not cross a kink at any g1_i, so shrink the
  // step toward the nearest kink and fall back to a one-sided difference
  // when tau_hat sits on (or straddles) a kink.
  const Vec full = theta_hat.full();
  const double hpsi = 1e-5 * std::max(1.0, full.head(p + 2).cwiseAbs().maxCoeff());
  Mat L(d, d);
  for (int j = 0; j < p + 2; ++j) {
    Vec up = full, dn = full;
    up[j] += hpsi;
    dn[j] -= hpsi;
    L.col(j) = (score_at(cohort, model, ThetaParams::from_full(up)) -
                score_at(cohort, model, ThetaParams::from_full(dn))) /
               (2.0 * hpsi * n);
  }
  {
    const double tau = theta_hat.tau;
    const double htau = 1e-5 * std::max(1.0, std::abs(tau));
    double gap_up = htau, gap_dn = htau;
    for (double g : kink_values) {
      const double dgap = g - tau;
      if (dgap > 0.0) gap_up = std::min(gap_up, dgap);
      if (dgap < 0.0) gap_dn = std::min(gap_dn, -dgap);
      if (dgap == 0.0) gap_up = gap_dn = 0.0;
    }
    const double floor_step = 1e-9 * std::max(1.0, std::abs(tau));
    double hu = 0.5 * gap_up;
    double hd = 0.5 * gap_dn;
    bool shrunk = false;
    if (hu < floor_step && hd < floor_step) {
      hu = htau;  // tau on a dense kink cluster: plain central step
      hd = htau;
    } else if (hu < floor_step) {
      hu = 0.0;  // one-sided from below
      shrunk = true;
    } else if (hd < floor_step) {
      hd = 0.0;
      shrunk = true;
    } else {
      shrunk = (hu < 0.5 * htau) || (hd < 0.5 * htau);
    }
    Vec up = full, dn = full;
    up[d - 1] += hu;
    dn[d - 1] -= hd;
    L.col(d - 1) = (score_at(cohort, model, ThetaParams::from_full(up)) -
                    score_at(cohort, model, ThetaParams::from_full(dn))) /
                   ((hu + hd) * n);
    if (diag != nullptr) {
      diag->tau_step_shrunk = shrunk;
      diag->fd_step_tau = hu + hd;
    }
  }

  Eigen::FullPivLU<Mat> lu(L);
  if (!lu.isInvertible()) throw SingularLambda();
  const Mat Linv = lu.inverse();
  return Linv * C * Linv.transpose() / static_cast<double>(n);
}

Mat sandwich_smooth(const Cohort& cohort, const ThetaParams& theta_hat,
                    const RiskModel& model) {
  const int n = cohort.n();
  Vec lin;
  Mat grad;
  model.eval(theta_hat, lin, &grad);
  const ScoreInfo si = cox_score_info(cohort, lin, grad, true);
  const Mat A = meat_matrix(cohort, lin, grad);
  const Mat Ibar = si.info / static_cast<double>(n);
  Eigen::FullPivLU<Mat> lu(Ibar);
  if (!lu.isInvertible()) throw SingularInformation();
  const Mat Iinv = lu.inverse();
  return Iinv * A * Iinv.transpose() / static_cast<double>(n);
}

Mat sandwich_psi_block(const Cohort& cohort, const ThetaParams& theta_hat,
                       const RiskModel& model) {
  const int n = cohort.n();
  const int q = model.p() + 2;
  Vec lin;
  Mat grad;
  model.eval(theta_hat, lin, &grad);
  const ScoreInfo si = cox_score_info(cohort, lin, grad, true);
  const Mat H = influence_matrix(cohort, lin, grad).leftCols(q);
  const Mat A = H.transpose() * H / static_cast<double>(n);
  const Mat Ibar = si.info.topLeftCorner(q, q) / static_cast<double>(n);
  Eigen::FullPivLU<Mat> lu(Ibar);
  if (!lu.isInvertible()) throw SingularInformation();
  const Mat Iinv = lu.inverse();
  return Iinv * A * Iinv.transpose() / static_cast<double>(n);
}

}  // namespace threshcox
