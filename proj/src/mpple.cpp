#include "threshcox/mpple.hpp"
#include <cstdio>
#include <cstdlib>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "threshcox/optimize.hpp"
#include "threshcox/quadrature.hpp"
#include "threshcox/variance.hpp"

namespace threshcox {

MppleModel::MppleModel(const Cohort& cohort, Vec mu, double eta, Vec c,
                       const MppleConfig& mcfg, double exponent_cap)
    : cohort_(&cohort), mu_(std::move(mu)), c_(std::move(c)), eta_(eta), mcfg_(mcfg),
      cap_(exponent_cap), p_(cohort.p()) {
  if (eta_ <= 0.0) throw DegenerateEta();
}

void MppleModel::eval(const ThetaParams& theta, Vec& lin, Mat* grad) const {
  const int n = cohort_->n();
  const int d = dim();
  lin.resize(n);
  if (grad) grad->resize(n, d);
  const QuadRule& gl = gauss_legendre(mcfg_.quad_nodes);
  const int m = mcfg_.quad_nodes;

  for (int i = 0; i < n; ++i) {
    const SubjectRecord& s = cohort_->subject(i);
    const double mu = mu_[i];
    const double c = c_[i];
    const double zpart = p_ > 0 ? theta.gamma.dot(s.covariates) : 0.0;
    const double lo = mu - mcfg_.tail_width * eta_;
    const double hi = mu + mcfg_.tail_width * eta_;

    double I = 0.0, II = 0.0;
    Vec dI, dII;
    if (grad) {
      dI = Vec::Zero(d);
      dII = Vec::Zero(d);
    }

    const auto panel = [&](double a, double b, bool above_tau) {
      if (b <= a) return;
      const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
      for (int k = 0; k < m; ++k) {
        const double x = mid + half * gl.nodes[k];
        const double expo =
            zpart + theta.beta * x + (above_tau ? theta.omega * (x - theta.tau) : 0.0);
        if (expo > cap_) throw OverflowError(expo);
        const double psi = std::exp(expo);
        const double f = norm_pdf((x - mu) / eta_) / eta_;
        const double r = half * gl.weights[k] * f * std::exp(-c * psi);
        const double rpsi = r * psi;
        I += rpsi;
        II += r;
        if (grad) {
          const double t1 = rpsi * (1.0 - c * psi);  // d(I)/d xi per unit m
          const double t2 = -rpsi * c;               // d(II)/d xi per unit m
          for (int j = 0; j < p_; ++j) {
            dI[j] += t1 * s.covariates[j];
            dII[j] += t2 * s.covariates[j];
          }
          dI[p_] += t1 * x;
          dII[p_] += t2 * x;
          if (above_tau) {
            const double g2 = x - theta.tau;
            dI[p_ + 1] += t1 * g2;
            dII[p_ + 1] += t2 * g2;
            dI[p_ + 2] += t1 * -theta.omega;
            dII[p_ + 2] += t2 * -theta.omega;
          }
        }
      }
    };

    if (theta.tau <= lo) {
      panel(lo, hi, true);
    } else if (theta.tau >= hi) {
      panel(lo, hi, false);
    } else {
      panel(lo, theta.tau, false);
      panel(theta.tau, hi, true);
    }

    if (!(I > 0.0) || !(II > 0.0) || !std::isfinite(I) || !std::isfinite(II))
      throw QuadratureFailure();
    const double v = std::log(I) - std::log(II);
    if (std::abs(v) > cap_) throw OverflowError(v);
    lin[i] = v;
    if (grad) grad->row(i) = (dI / I - dII / II).transpose();
  }
}

Vec breslow_cumhaz_at_followup(const Cohort& cohort, const Vec& lin) {
  Vec out = Vec::Zero(cohort.n());
  for (int st = 0; st < cohort.n_strata(); ++st) {
    const Cohort::StratumIndex& idx = cohort.stratum_index(st);
    const std::vector<double>& times = idx.distinct_event_times;  // ascending
    const std::size_t K = times.size();
    std::vector<double> cum(K + 1, 0.0);
    if (K > 0) {
      std::vector<double> s0(K);
      double a0 = 0.0, b0 = 0.0;
      std::size_t ai = 0, bi = 0;
      for (std::size_t kk = K; kk-- > 0;) {
        const double t = times[kk];
        while (ai < idx.by_followup_desc.size() &&
               cohort.subject(idx.by_followup_desc[ai]).followup_time >= t) {
          a0 += std::exp(lin[idx.by_followup_desc[ai]]);
          ++ai;
        }
        while (bi < idx.by_entry_desc.size() &&
               cohort.subject(idx.by_entry_desc[bi]).entry_time > t) {
          b0 += std::exp(lin[idx.by_entry_desc[bi]]);
          ++bi;
        }
        s0[kk] = a0 - b0;
        if (s0[kk] <= 0.0) throw EmptyRiskSet(t);
      }
      for (std::size_t k = 0; k < K; ++k)
        cum[k + 1] = cum[k] + idx.event_multiplicity[k] / s0[k];
    }
    for (int i : idx.members) {
      const std::size_t j = static_cast<std::size_t>(
          std::upper_bound(times.begin(), times.end(),
                           cohort.subject(i).followup_time) -
          times.begin());
      out[i] = cum[j];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// MpplePseudoLik

struct MpplePseudoLik::Tables {
  Mat lin;                // n x L
  Mat r;                  // n x L, exp(lin)
  std::vector<Mat> grad;  // per level, n x dim (empty unless want_grad)
};

MpplePseudoLik::MpplePseudoLik(const Cohort& cohort, Vec mu, double eta,
                               std::vector<std::vector<double>> c_event,
                               const MppleConfig& mcfg, double exponent_cap)
    : cohort_(&cohort), mu_(std::move(mu)), eta_(eta), c_event_(std::move(c_event)),
      mcfg_(mcfg), cap_(exponent_cap), p_(cohort.p()) {
  if (eta_ <= 0.0) throw DegenerateEta();
  double cmax = 0.0;
  for (const auto& cs : c_event_)
    for (double c : cs) cmax = std::max(cmax, c);
  const int L = cmax > 0.0 ? std::max(2, mcfg_.c_levels) : 1;
  levels_ = Vec::LinSpaced(L, 0.0, cmax);
  level_step_ = L > 1 ? cmax / (L - 1) : 0.0;
}

namespace {

// clamped linear interpolation position on the level grid
inline void interp_pos(double c, double step, int L, int& lev, double& w) {
  if (L == 1 || step <= 0.0) {
    lev = 0;
    w = 0.0;
    return;
  }
  lev = std::min(L - 2, std::max(0, static_cast<int>(c / step)));
  w = std::min(1.0, std::max(0.0, (c - lev * step) / step));
}

}  // namespace

void MpplePseudoLik::tabulate(const ThetaParams& theta, bool want_grad,
                              Tables& t) const {
  const int n = cohort_->n();
  const int d = dim();
  const int L = static_cast<int>(levels_.size());
  const QuadRule& gl = gauss_legendre(mcfg_.quad_nodes);
  const int m = mcfg_.quad_nodes;

  t.lin.resize(n, L);
  t.r.resize(n, L);
  t.grad.clear();
  if (want_grad) t.grad.assign(L, Mat(n, d));

  using Arr = Eigen::ArrayXd;
  const int max_nodes = 2 * m;
  Arr nx(max_nodes), na(max_nodes), ng2(max_nodes), nab(max_nodes);
  Arr bexpo(max_nodes), bpsi(max_nodes), bsd(max_nodes), bdamp(max_nodes);
  Arr brr(max_nodes), brpsi(max_nodes), bt1(max_nodes), bt2(max_nodes);
  Vec dI(d), dII(d);

  for (int i = 0; i < n; ++i) {
    const SubjectRecord& s = cohort_->subject(i);
    const double mu = mu_[i];
    const double zpart = p_ > 0 ? theta.gamma.dot(s.covariates) : 0.0;
    const double lo = mu - mcfg_.tail_width * eta_;
    const double hi = mu + mcfg_.tail_width * eta_;

    int nn = 0;
    const auto panel = [&](double a, double b, bool above_tau) {
      if (b <= a) return;
      const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
      for (int k = 0; k < m; ++k) {
        const double x = mid + half * gl.nodes[k];
        nx[nn] = x;
        na[nn] = half * gl.weights[k] * norm_pdf((x - mu) / eta_) / eta_;
        ng2[nn] = above_tau ? x - theta.tau : 0.0;
        nab[nn] = above_tau ? 1.0 : 0.0;
        ++nn;
      }
    };
    if (theta.tau <= lo) {
      panel(lo, hi, true);
    } else if (theta.tau >= hi) {
      panel(lo, hi, false);
    } else {
      panel(lo, theta.tau, false);
      panel(theta.tau, hi, true);
    }

    const auto x = nx.head(nn);
    const auto ab = nab.head(nn);
    const auto g2 = ng2.head(nn);
    const auto abase = na.head(nn);
    auto expo = bexpo.head(nn);
    auto psi = bpsi.head(nn);
    auto step_damp = bsd.head(nn);
    auto damp = bdamp.head(nn);
    auto rr = brr.head(nn);
    auto rpsi = brpsi.head(nn);
    auto t1 = bt1.head(nn);
    auto t2 = bt2.head(nn);

    expo = zpart + theta.beta * x + theta.omega * g2;
    if ((expo > cap_).any()) throw OverflowError(expo.maxCoeff());
    psi = expo.exp();
    // damping cascades multiplicatively across the equally spaced levels, so
    // only two exp sweeps per subject are needed regardless of L
    step_damp = (-level_step_ * psi).exp();
    damp.setOnes();

    for (int l = 0; l < L; ++l) {
      const double c = levels_[l];
      rr = abase * damp;
      rpsi = rr * psi;
      const double I = rpsi.sum();
      const double II = rr.sum();
      if (!(I > 0.0) || !(II > 0.0) || !std::isfinite(I) || !std::isfinite(II))
        throw QuadratureFailure();
      const double v = std::log(I) - std::log(II);
      if (std::abs(v) > cap_) throw OverflowError(v);
      t.lin(i, l) = v;
      t.r(i, l) = std::exp(v);
      if (want_grad) {
        t1 = rpsi * (1.0 - c * psi);
        t2 = -c * rpsi;
        const double t1s = t1.sum(), t2s = t2.sum();
        for (int j = 0; j < p_; ++j) {
          dI[j] = t1s * s.covariates[j];
          dII[j] = t2s * s.covariates[j];
        }
        dI[p_] = (t1 * x).sum();
        dII[p_] = (t2 * x).sum();
        dI[p_ + 1] = (t1 * g2).sum();
        dII[p_ + 1] = (t2 * g2).sum();
        dI[p_ + 2] = -theta.omega * (t1 * ab).sum();
        dII[p_ + 2] = -theta.omega * (t2 * ab).sum();
        t.grad[l].row(i) = (dI / I - dII / II).transpose();
      }
      if (l + 1 < L) damp *= step_damp;
    }
  }
}

namespace {

// descending-time risk-set sums for one stratum at one c level:
// s0[k] = sum_{j in R(t_k)} r_j, s1.col(k) = sum r_j u_j (q leading gradient
// components), s2.col(k) = vec(sum r_j u_j u_j') (when s2 non-null).
void level_sums(const Cohort& cohort, int st, const Mat& r_tab, int level,
                const Mat* grad, int q, Vec& s0, Mat* s1, Mat* s2) {
  const Cohort::StratumIndex& idx = cohort.stratum_index(st);
  const std::vector<double>& times = idx.distinct_event_times;
  const Eigen::Index K = static_cast<Eigen::Index>(times.size());
  s0.setZero(K);
  if (s1) s1->setZero(q, K);
  if (s2) s2->setZero(q * q, K);

  double a0 = 0.0, b0 = 0.0;
  Vec a1 = Vec::Zero(q), b1 = Vec::Zero(q);
  Mat a2 = Mat::Zero(q, q), b2 = Mat::Zero(q, q), d2(q, q);
  std::size_t ai = 0, bi = 0;
  for (Eigen::Index kk = K; kk-- > 0;) {
    const double t = times[kk];
    while (ai < idx.by_followup_desc.size()) {
      const int i = idx.by_followup_desc[ai];
      if (cohort.subject(i).followup_time < t) break;
      const double r = r_tab(i, level);
      a0 += r;
      if (s1) {
        const auto u = grad->row(i).head(q);
        a1.noalias() += r * u.transpose();
        if (s2) a2.noalias() += r * u.transpose() * u;
      }
      ++ai;
    }
    while (bi < idx.by_entry_desc.size()) {
      const int i = idx.by_entry_desc[bi];
      if (cohort.subject(i).entry_time <= t) break;
      const double r = r_tab(i, level);
      b0 += r;
      if (s1) {
        const auto u = grad->row(i).head(q);
        b1.noalias() += r * u.transpose();
        if (s2) b2.noalias() += r * u.transpose() * u;
      }
      ++bi;
    }
    s0[kk] = a0 - b0;
    if (s0[kk] <= 0.0) throw EmptyRiskSet(t);
    if (s1) s1->col(kk) = a1 - b1;
    if (s2) {
      d2 = a2 - b2;
      s2->col(kk) = Eigen::Map<const Vec>(d2.data(), q * q);
    }
  }
}

}  // namespace

double MpplePseudoLik::value(const ThetaParams& theta) const {
  Tables t;
  tabulate(theta, false, t);
  const int L = static_cast<int>(levels_.size());
  double loglik = 0.0;

  for (int st = 0; st < cohort_->n_strata(); ++st) {
    const Cohort::StratumIndex& idx = cohort_->stratum_index(st);
    const std::vector<double>& times = idx.distinct_event_times;
    const std::size_t K = times.size();
    if (K == 0) continue;
    std::vector<Vec> s0(L);
    for (int l = 0; l < L; ++l)
      level_sums(*cohort_, st, t.r, l, nullptr, 0, s0[l], nullptr, nullptr);

    for (std::size_t k = 0; k < K; ++k) {
      int lev;
      double w;
      interp_pos(c_event_[st][k], level_step_, L, lev, w);
      const double S0 =
          (1.0 - w) * s0[lev][k] + (L > 1 ? w * s0[lev + 1][k] : 0.0);
      if (S0 <= 0.0) throw EmptyRiskSet(times[k]);
      loglik -= idx.event_multiplicity[k] * std::log(S0);
    }
    for (int i : idx.members) {
      const SubjectRecord& s = cohort_->subject(i);
      if (!s.event) continue;
      const std::size_t k = static_cast<std::size_t>(
          std::lower_bound(times.begin(), times.end(), s.followup_time) -
          times.begin());
      int lev;
      double w;
      interp_pos(c_event_[st][k], level_step_, L, lev, w);
      loglik += (1.0 - w) * t.lin(i, lev) + (L > 1 ? w * t.lin(i, lev + 1) : 0.0);
    }
  }
  return loglik;
}

void MpplePseudoLik::eval_psi(const ThetaParams& theta, double& loglik, Vec& score,
                              Mat& info) const {
  Tables t;
  tabulate(theta, true, t);
  const int L = static_cast<int>(levels_.size());
  const int q = p_ + 2;
  loglik = 0.0;
  score = Vec::Zero(q);
  info = Mat::Zero(q, q);

  for (int st = 0; st < cohort_->n_strata(); ++st) {
    const Cohort::StratumIndex& idx = cohort_->stratum_index(st);
    const std::vector<double>& times = idx.distinct_event_times;
    const std::size_t K = times.size();
    if (K == 0) continue;
    std::vector<Vec> s0(L);
    std::vector<Mat> s1(L), s2(L);
    for (int l = 0; l < L; ++l)
      level_sums(*cohort_, st, t.r, l, &t.grad[l], q, s0[l], &s1[l], &s2[l]);

    Vec S1(q), e(q);
    Mat S2(q, q);
    for (std::size_t k = 0; k < K; ++k) {
      int lev;
      double w;
      interp_pos(c_event_[st][k], level_step_, L, lev, w);
      const int hi = L > 1 ? lev + 1 : lev;
      const double S0 = (1.0 - w) * s0[lev][k] + (hi != lev ? w * s0[hi][k] : 0.0);
      if (S0 <= 0.0) throw EmptyRiskSet(times[k]);
      S1 = (1.0 - w) * s1[lev].col(k);
      S2 = Eigen::Map<const Mat>(s2[lev].col(k).data(), q, q) * (1.0 - w);
      if (hi != lev) {
        S1.noalias() += w * s1[hi].col(k);
        S2 += w * Eigen::Map<const Mat>(s2[hi].col(k).data(), q, q);
      }
      const double m = idx.event_multiplicity[k];
      e = S1 / S0;
      loglik -= m * std::log(S0);
      score -= m * e;
      info += m * (S2 / S0 - e * e.transpose());
    }
    for (int i : idx.members) {
      const SubjectRecord& s = cohort_->subject(i);
      if (!s.event) continue;
      const std::size_t k = static_cast<std::size_t>(
          std::lower_bound(times.begin(), times.end(), s.followup_time) -
          times.begin());
      int lev;
      double w;
      interp_pos(c_event_[st][k], level_step_, L, lev, w);
      const int hi = L > 1 ? lev + 1 : lev;
      loglik += (1.0 - w) * t.lin(i, lev) + (hi != lev ? w * t.lin(i, hi) : 0.0);
      score += (1.0 - w) * t.grad[lev].row(i).head(q).transpose();
      if (hi != lev) score += w * t.grad[hi].row(i).head(q).transpose();
    }
  }
}

std::vector<std::vector<double>> MpplePseudoLik::breslow(const ThetaParams& theta) const {
  Tables t;
  tabulate(theta, false, t);
  const int L = static_cast<int>(levels_.size());
  std::vector<std::vector<double>> out(cohort_->n_strata());

  for (int st = 0; st < cohort_->n_strata(); ++st) {
    const Cohort::StratumIndex& idx = cohort_->stratum_index(st);
    const std::vector<double>& times = idx.distinct_event_times;
    const std::size_t K = times.size();
    out[st].assign(K, 0.0);
    if (K == 0) continue;
    std::vector<Vec> s0(L);
    for (int l = 0; l < L; ++l)
      level_sums(*cohort_, st, t.r, l, nullptr, 0, s0[l], nullptr, nullptr);

    double cum = 0.0;  // Lambda0 just before each event time
    for (std::size_t k = 0; k < K; ++k) {
      out[st][k] = cum;
      int lev;
      double w;
      interp_pos(c_event_[st][k], level_step_, L, lev, w);
      const double S0 =
          (1.0 - w) * s0[lev][k] + (L > 1 ? w * s0[lev + 1][k] : 0.0);
      if (S0 <= 0.0) throw EmptyRiskSet(times[k]);
      cum += idx.event_multiplicity[k] / S0;
    }
  }
  return out;
}

Mat MpplePseudoLik::sandwich(const ThetaParams& theta) const {
  Tables t;
  tabulate(theta, true, t);
  const int L = static_cast<int>(levels_.size());
  const int d = dim();
  const int n = cohort_->n();
  Mat H = Mat::Zero(n, d);
  Mat info = Mat::Zero(d, d);

  for (int st = 0; st < cohort_->n_strata(); ++st) {
    const Cohort::StratumIndex& idx = cohort_->stratum_index(st);
    const std::vector<double>& times = idx.distinct_event_times;
    const std::size_t K = times.size();
    if (K == 0) continue;
    std::vector<Vec> s0(L);
    std::vector<Mat> s1(L), s2(L);
    for (int l = 0; l < L; ++l)
      level_sums(*cohort_, st, t.r, l, &t.grad[l], d, s0[l], &s1[l], &s2[l]);

    // interpolated per-event-time quantities
    std::vector<double> S0(K), cwk(K), wk(K);
    std::vector<int> lk(K);
    Mat e(d, K);
    Vec S1(d);
    Mat S2(d, d);
    for (std::size_t k = 0; k < K; ++k) {
      int lev;
      double w;
      interp_pos(c_event_[st][k], level_step_, L, lev, w);
      const int hi = L > 1 ? lev + 1 : lev;
      lk[k] = lev;
      wk[k] = w;
      S0[k] = (1.0 - w) * s0[lev][k] + (hi != lev ? w * s0[hi][k] : 0.0);
      if (S0[k] <= 0.0) throw EmptyRiskSet(times[k]);
      S1 = (1.0 - w) * s1[lev].col(k);
      S2 = Eigen::Map<const Mat>(s2[lev].col(k).data(), d, d) * (1.0 - w);
      if (hi != lev) {
        S1.noalias() += w * s1[hi].col(k);
        S2 += w * Eigen::Map<const Mat>(s2[hi].col(k).data(), d, d);
      }
      e.col(k) = S1 / S0[k];
      cwk[k] = idx.event_multiplicity[k] / S0[k];
      info += idx.event_multiplicity[k] *
              (S2 / S0[k] - e.col(k) * e.col(k).transpose());
    }

    Vec h(d), ui(d);
    for (int i : idx.members) {
      const SubjectRecord& rec = cohort_->subject(i);
      h.setZero();
      const std::size_t klo = static_cast<std::size_t>(
          std::lower_bound(times.begin(), times.end(), rec.entry_time) - times.begin());
      const std::size_t khi = static_cast<std::size_t>(
          std::upper_bound(times.begin(), times.end(), rec.followup_time) -
          times.begin());
      const auto interp_u = [&](std::size_t k) {
        const int hi = L > 1 ? lk[k] + 1 : lk[k];
        ui = (1.0 - wk[k]) * t.grad[lk[k]].row(i).transpose();
        if (hi != lk[k]) ui.noalias() += wk[k] * t.grad[hi].row(i).transpose();
      };
      for (std::size_t k = klo; k < khi; ++k) {
        const int hi = L > 1 ? lk[k] + 1 : lk[k];
        const double ri =
            (1.0 - wk[k]) * t.r(i, lk[k]) + (hi != lk[k] ? wk[k] * t.r(i, hi) : 0.0);
        interp_u(k);
        h -= cwk[k] * ri * (ui - e.col(k));
      }
      if (rec.event) {
        const std::size_t k = static_cast<std::size_t>(
            std::lower_bound(times.begin(), times.end(), rec.followup_time) -
            times.begin());
        interp_u(k);
        h += ui - e.col(k);
      }
      H.row(i) = h.transpose();
    }
  }

  const Mat A = H.transpose() * H / static_cast<double>(n);
  const Mat Ibar = info / static_cast<double>(n);
  Eigen::FullPivLU<Mat> lu(Ibar);
  if (!lu.isInvertible()) throw SingularInformation();
  const Mat Iinv = lu.inverse();
  return Iinv * A * Iinv.transpose() / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// fit_mpple

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

FitResult pseudo_profile_fit(const Cohort& cohort, const MpplePseudoLik& pl,
                             const std::vector<double>& bracket_values, double center,
                             const FitConfig& cfg) {
  FitResult res;
  res.method = Method::MPPLE;
  const int p = pl.p();

  PsiObjective base;
  double tau_current = 0.0;
  base.value = [&](const Vec& psi) {
    ThetaParams th = ThetaParams::zero(p);
    th.set_psi(psi);
    th.tau = tau_current;
    return pl.value(th);
  };
  base.eval = [&](const Vec& psi, double& v, Vec& sc, Mat& info) {
    ThetaParams th = ThetaParams::zero(p);
    th.set_psi(psi);
    th.tau = tau_current;
    pl.eval_psi(th, v, sc, info);
  };

  // mid-profile solves only need psi accurate enough to rank the profiled
  // objective; the Gauss-Newton information converges linearly, so a strict
  // score tolerance there burns iterations. The final solve is strict.
  OptimConfig loose = cfg.optim;
  loose.psi_tol = std::max(cfg.optim.psi_tol, 1e-3);

  Vec warm = cfg.psi_start.value_or(Vec::Zero(p + 2));
  const auto solve_at = [&](double tau) -> double {
    tau_current = tau;
    try {
      NewtonResult nr = newton_psi(base, warm, loose);
      if (nr.diverged || !std::isfinite(nr.objective)) return kNegInf;
      warm = nr.psi;
      return nr.objective;
    } catch (const SingularInformation&) {
      return kNegInf;
    } catch (const OverflowError&) {
      return kNegInf;
    } catch (const EmptyRiskSet&) {
      return kNegInf;
    } catch (const QuadratureFailure&) {
      return kNegInf;
    }
  };

  double tau_hat;
  if (cfg.fixed_tau) {
    tau_hat = *cfg.fixed_tau - center;
    res.tau_bracket_used = {*cfg.fixed_tau, *cfg.fixed_tau};
  } else {
    auto [lo, hi] = tau_bracket(bracket_values, cfg.optim.tau_quantile_q);
    if (cfg.tau_bracket_override) {
      lo = cfg.tau_bracket_override->first - center;
      hi = cfg.tau_bracket_override->second - center;
    }
    res.tau_bracket_used = {lo + center, hi + center};
    const TauResult tr = profile_tau(solve_at, lo, hi, cfg.optim);
    tau_hat = tr.tau;
    res.tau_on_boundary = tr.boundary;
    res.tau_evaluations = tr.evaluations;
    if (tr.boundary) res.warnings.emplace_back("TauOnBracketBoundary");
    if (!std::isfinite(tr.objective)) res.warnings.emplace_back("ProfileDegenerate");
  }

  res.theta_hat = ThetaParams::zero(p);
  res.theta_hat.tau = tau_hat;
  try {
    tau_current = tau_hat;
    const NewtonResult nr = newton_psi(base, warm, cfg.optim);
    res.theta_hat.set_psi(nr.psi);
    res.newton_iterations = nr.iterations;
    res.objective = nr.objective;
    res.converged = nr.converged && !nr.diverged;
    if (nr.diverged)
      res.warnings.emplace_back("PsiDiverged");
    else if (!nr.converged)
      res.warnings.emplace_back("NewtonIterationCap");
  } catch (const Error& e) {
    res.theta_hat.set_psi(warm);
    res.converged = false;
    res.warnings.emplace_back(std::string("FitFailed: ") + e.what());
  }

  res.covariance = Mat::Zero(p + 3, p + 3);
  res.theta_hat.tau += center;
  return res;
}

}  // namespace

FitResult fit_mpple(const Cohort& cohort, const MeasurementModel& me,
                    const FitConfig& cfg, const MppleConfig& mcfg) {
  const Vec mu = posterior_means(cohort, me);
  const double center = mu.mean();
  const Vec g1c = mu.array() - center;
  std::vector<double> vals(g1c.data(), g1c.data() + g1c.size());

  if (me.eta() == 0.0) {
    // X recovered exactly: phi-tilde is the plain changepoint log risk
    const SubstitutionModel model(cohort, g1c, cfg.optim.exponent_cap);
    return profile_fit(cohort, model, vals, center, vals, Method::MPPLE, cfg);
  }

  std::vector<std::vector<double>> c_event(cohort.n_strata());
  for (int st = 0; st < cohort.n_strata(); ++st)
    c_event[st].assign(cohort.event_times(st).size(), 0.0);

  FitConfig inner = cfg;
  inner.compute_covariance = false;

  const auto make_pl = [&]() {
    return MpplePseudoLik(cohort, g1c, me.eta(), c_event, mcfg,
                          cfg.optim.exponent_cap);
  };
  const auto update_c = [&](const MpplePseudoLik& pl, const ThetaParams& th) {
    ThetaParams tc = th;
    tc.tau -= center;
    c_event = pl.breslow(tc);
  };
  const bool trace = std::getenv("THRESHCOX_MPPLE_TRACE") != nullptr;

  // first pass: profile with c = 0 (single level: RR1 in phi-tilde form)
  std::vector<std::vector<double>> c_final = c_event;
  FitResult res;
  {
    const MpplePseudoLik pl = make_pl();
    res = pseudo_profile_fit(cohort, pl, vals, center, inner);
    if (res.converged) update_c(pl, res.theta_hat);
  }
  const std::pair<double, double> full_bracket = res.tau_bracket_used;
  bool settled = false;

  for (int cycle = 0; res.converged && !settled && cycle < mcfg.outer_max_iter;
       ++cycle) {
    // (a) hold tau fixed and alternate psi updates with Breslow updates until
    // the plug-in baseline and psi agree; these steps are cheap
    FitConfig fcfg = inner;
    fcfg.fixed_tau = res.theta_hat.tau;
    fcfg.psi_start = res.theta_hat.psi();
    if (!cfg.fixed_tau) fcfg.optim.psi_tol = std::max(cfg.optim.psi_tol, 1e-5);
    bool psi_settled = false;
    for (int it = 0; it < mcfg.outer_max_iter; ++it) {
      const MpplePseudoLik pl = make_pl();
      c_final = c_event;
      const FitResult r = pseudo_profile_fit(cohort, pl, vals, center, fcfg);
      if (!r.converged) {
        res = r;
        break;
      }
      const double dpsi =
          (r.theta_hat.psi() - *fcfg.psi_start).lpNorm<Eigen::Infinity>();
      fcfg.psi_start = r.theta_hat.psi();
      update_c(pl, r.theta_hat);
      res.theta_hat = r.theta_hat;
      res.objective = r.objective;
      if (trace)
        std::fprintf(stderr, "cycle %d psi-step %d: beta=%.6f omega=%.6f dpsi=%.2e\n",
                     cycle, it, r.theta_hat.beta, r.theta_hat.omega, dpsi);
      if (dpsi < (cfg.fixed_tau ? mcfg.outer_tol : 10.0 * mcfg.outer_tol)) {
        psi_settled = true;
        break;
      }
    }
    if (!res.converged || cfg.fixed_tau) {
      settled = res.converged && psi_settled;
      break;
    }

    // (b) re-profile tau with the settled baseline; the window stays fixed
    // across cycles so the golden-section lattice (and hence tau-hat's
    // sub-tolerance placement) is reproducible
    if (!inner.tau_bracket_override) {
      const double w =
          std::max(0.1 * (full_bracket.second - full_bracket.first),
                   100.0 * cfg.optim.tau_tol);
      inner.tau_bracket_override = {
          std::max(full_bracket.first, res.theta_hat.tau - w),
          std::min(full_bracket.second, res.theta_hat.tau + w)};
    }
    inner.psi_start = res.theta_hat.psi();
    const MpplePseudoLik pl = make_pl();
    c_final = c_event;
    FitResult prof = pseudo_profile_fit(cohort, pl, vals, center, inner);
    if (prof.tau_on_boundary && inner.tau_bracket_override) {
      // the narrowed window pinched the profile: redo over the full bracket
      inner.tau_bracket_override.reset();
      prof = pseudo_profile_fit(cohort, pl, vals, center, inner);
    }
    if (trace)
      std::fprintf(stderr, "cycle %d profile: beta=%.6f omega=%.6f tau=%.6f obj=%.6f\n",
                   cycle, prof.theta_hat.beta, prof.theta_hat.omega,
                   prof.theta_hat.tau, prof.objective);
    if (!prof.converged) {
      res = prof;
      break;
    }
    const double dtau = std::abs(prof.theta_hat.tau - res.theta_hat.tau);
    const double dpsi =
        (prof.theta_hat.psi() - res.theta_hat.psi()).lpNorm<Eigen::Infinity>();
    update_c(pl, prof.theta_hat);
    res = prof;
    // tau is only located to the golden-section resolution, so the whole
    // settle test is tied to tau_tol rather than outer_tol
    if (dtau <= 10.0 * cfg.optim.tau_tol && dpsi <= 10.0 * cfg.optim.tau_tol)
      settled = true;
  }

  if (!settled && res.converged) {
    res.converged = false;
    res.warnings.emplace_back("MppleOuterIterationCap");
  }
  res.tau_bracket_used = full_bracket;

  if (cfg.compute_covariance && res.converged) {
    const MpplePseudoLik pl(cohort, g1c, me.eta(), c_final, mcfg,
                            cfg.optim.exponent_cap);
    ThetaParams theta_c = res.theta_hat;
    theta_c.tau -= center;
    try {
      res.covariance = pl.sandwich(theta_c);
    } catch (const Error& e) {
      res.warnings.emplace_back(std::string("VarianceFailed: ") + e.what());
    }
  }
  return res;
}

}  // namespace threshcox
