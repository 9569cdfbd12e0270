#pragma once

// Consensus ADMM for the transmit-beamformer step of WMMSE:
//
//   min_v  sum_k w_k eps_k(v)
//   s.t.   sum_{l at BS j} p~_l ||v_l||^2        <= P_j
//          sum_{l at BS j} Rhat_l rho_l ||v_l||^2 <= B_j
//
// With cross terms X_kl = sqrt(w_k) f_k^H G(k, bs_l) v_l the objective reads
//   sum_k |sqrt(w_k) - sum_{l in own(k)} sqrt(p~_l) X_kl|^2
//       + sum_{l not in own(k)} p~_l |X_kl|^2 + const,
// and the splitting v = x, X_kl = g_kl^H v_l separates it into per-link
// v-updates, per-UE X-updates and per-BS projections for x.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mecopt/beamforming.hpp"

namespace mecopt {

struct AdmmProblem {
  int num_ue = 0;
  int num_links = 0;
  int nt = 1;
  std::vector<CVector> g;               // [k * L + l] = sqrt(w_k) G(k, bs_l)^H f_k
  RVector sqrt_w;                       // per UE
  RVector amp;                          // sqrt(p~_l)
  RVector ptilde;                       // p~_l
  std::vector<int> link_ue;
  std::vector<std::vector<int>> own;    // UE -> its links
  std::vector<std::vector<int>> bs_links;
  RVector power_budget;                 // per BS
  RVector backhaul_budget;              // per BS
  RVector backhaul_weight;              // per link, Rhat * rho
  double constant = 0.0;                // sum_k w_k ||f_k||^2

  const CVector& gv(int k, int l) const { return g[static_cast<std::size_t>(k) * num_links + l]; }
  bool is_own(int k, int l) const { return link_ue[l] == k; }
};

/// Assembles the ADMM data for fixed receivers and backhaul reweighting.
inline AdmmProblem make_admm_problem(const DeliveryProblem& p, const ReceiverState& rx, const RVector& backhaul_weight) {
  AdmmProblem a;
  a.num_ue = p.num_ue;
  a.num_links = p.num_links();
  a.nt = p.nt;
  a.sqrt_w = rx.w.cwiseSqrt();
  a.amp.resize(a.num_links);
  a.ptilde.resize(a.num_links);
  for (int l = 0; l < a.num_links; ++l) {
    a.ptilde(l) = p.links[l].ptilde;
    a.amp(l) = std::sqrt(p.links[l].ptilde);
    a.link_ue.push_back(p.links[l].ue);
  }
  a.own = p.ue_links;
  a.bs_links = p.bs_links;
  a.power_budget = p.power_budget;
  a.backhaul_budget = p.backhaul_budget;
  a.backhaul_weight = backhaul_weight;
  a.g.reserve(static_cast<std::size_t>(a.num_ue) * a.num_links);
  for (int k = 0; k < a.num_ue; ++k) {
    const CVector f = rx.filter(k);
    a.constant += rx.w(k) * f.squaredNorm();
    for (int l = 0; l < a.num_links; ++l)
      a.g.push_back(a.sqrt_w(k) * (p.G(k, p.links[l].bs).adjoint() * f));
  }
  return a;
}

/// The split objective evaluated at v.
inline double admm_objective(const AdmmProblem& a, const Beamformers& v) {
  double s = a.constant;
  for (int k = 0; k < a.num_ue; ++k) {
    cd own = a.sqrt_w(k);
    for (int l = 0; l < a.num_links; ++l) {
      const cd x = a.gv(k, l).dot(v[l]);
      if (a.is_own(k, l)) own -= a.amp(l) * x;
      else s += a.ptilde(l) * std::norm(x);
    }
    s += std::norm(own);
  }
  return s;
}

struct AdmmState {
  Beamformers v;
  Beamformers x;
  Beamformers z;    // dual of v = x
  CMatrix X;        // num_ue x num_links cross terms
  CMatrix lambda;   // dual of X = g^H v
  double rho = 1.0;
};

inline AdmmState init_admm_state(const AdmmProblem& a, const Beamformers& v0, double rho) {
  require(rho > 0.0, "admm: rho must be > 0");
  AdmmState s;
  s.v = v0;
  s.x = v0;
  s.z.assign(a.num_links, CVector::Zero(a.nt));
  s.X.resize(a.num_ue, a.num_links);
  for (int k = 0; k < a.num_ue; ++k)
    for (int l = 0; l < a.num_links; ++l) s.X(k, l) = a.gv(k, l).dot(v0[l]);
  s.lambda = CMatrix::Zero(a.num_ue, a.num_links);
  s.rho = rho;
  return s;
}

/// Per-link factorizations of (sum_k g g^H + I); the v-update matrix is rho times this.
inline std::vector<Eigen::LLT<CMatrix>> admm_v_factors(const AdmmProblem& a) {
  std::vector<Eigen::LLT<CMatrix>> out;
  out.reserve(a.num_links);
  for (int l = 0; l < a.num_links; ++l) {
    CMatrix m = CMatrix::Identity(a.nt, a.nt);
    for (int k = 0; k < a.num_ue; ++k) m.noalias() += a.gv(k, l) * a.gv(k, l).adjoint();
    out.emplace_back(m);
  }
  return out;
}

/// v_l = argmin sum_k [Re(conj(lambda_kl)(g^H v - X_kl)) + rho/2 |g^H v - X_kl|^2]
///       + Re(z^H (v - x)) + rho/2 ||v - x||^2.
inline void admm_v_update(const AdmmProblem& a, AdmmState& s, const std::vector<Eigen::LLT<CMatrix>>& factors) {
  for (int l = 0; l < a.num_links; ++l) {
    CVector rhs = s.rho * s.x[l] - s.z[l];
    for (int k = 0; k < a.num_ue; ++k) rhs += a.gv(k, l) * (s.rho * s.X(k, l) - s.lambda(k, l));
    s.v[l] = factors[l].solve(rhs / s.rho);
  }
}

inline void admm_v_update(const AdmmProblem& a, AdmmState& s) { admm_v_update(a, s, admm_v_factors(a)); }

/// Closed-form X minimization. Own terms solve (a a^T + rho/2 I) X = a sqrt(w) + rho/2 t
/// by Sherman-Morrison; interferer terms give X = rho t / (2 p~ + rho), t = g^H v + lambda / rho.
inline void admm_X_update(const AdmmProblem& a, AdmmState& s) {
  const double h = 0.5 * s.rho;
  for (int k = 0; k < a.num_ue; ++k) {
    for (int l = 0; l < a.num_links; ++l) {
      if (a.is_own(k, l)) continue;
      const cd t = a.gv(k, l).dot(s.v[l]) + s.lambda(k, l) / s.rho;
      s.X(k, l) = s.rho * t / (2.0 * a.ptilde(l) + s.rho);
    }
    const auto& own = a.own[k];
    if (own.empty()) continue;
    double aa = 0.0;
    cd ay = 0.0;
    std::vector<cd> y(own.size());
    for (std::size_t m = 0; m < own.size(); ++m) {
      const int l = own[m];
      const cd t = a.gv(k, l).dot(s.v[l]) + s.lambda(k, l) / s.rho;
      y[m] = a.amp(l) * a.sqrt_w(k) + h * t;
      aa += a.amp(l) * a.amp(l);
      ay += a.amp(l) * y[m];
    }
    const cd c = ay / (h + aa);
    for (std::size_t m = 0; m < own.size(); ++m) s.X(k, own[m]) = (y[m] - a.amp(own[m]) * c) / h;
  }
}

namespace detail {

/// Projection of targets t_l onto {sum c1_l ||x_l||^2 <= r1, sum c2_l ||x_l||^2 <= r2}.
/// KKT gives x_l = t_l / (1 + m1 c1_l + m2 c2_l); the multipliers are found by
/// bisection, nested when both constraints are active.
class TwoBallProjector {
 public:
  TwoBallProjector(std::vector<double> tn2, std::vector<double> c1, std::vector<double> c2, double r1, double r2)
      : tn2_(std::move(tn2)), c1_(std::move(c1)), c2_(std::move(c2)), r1_(r1), r2_(r2) {
    require(r1_ >= 0.0 && r2_ >= 0.0, "admm_x_update: negative power or backhaul budget");
    // A zero budget pins every entry it weighs to zero.
    zeroed_.assign(tn2_.size(), false);
    for (std::size_t i = 0; i < tn2_.size(); ++i)
      if ((r1_ == 0.0 && c1_[i] > 0.0) || (r2_ == 0.0 && c2_[i] > 0.0)) {
        zeroed_[i] = true;
        tn2_[i] = 0.0;
      }
  }

  /// Returns per-entry scale factors 1 / (1 + m1 c1 + m2 c2).
  std::vector<double> scales() const {
    const std::size_t n = tn2_.size();
    std::vector<double> out(n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      if (zeroed_[i]) out[i] = 0.0;
    double m1 = 0.0, m2 = 0.0;
    if (g(c1_, 0, 0) <= r1_ && g(c2_, 0, 0) <= r2_) return out;
    m1 = solve_single(tn2_, c1_, r1_);
    if (g(c2_, m1, 0) > r2_) {
      m2 = solve_single(tn2_, c2_, r2_);
      m1 = 0.0;
      if (g(c1_, 0, m2) > r1_) nested(m1, m2);
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!zeroed_[i]) out[i] = 1.0 / (1.0 + m1 * c1_[i] + m2 * c2_[i]);
    return out;
  }

 private:
  double g(const std::vector<double>& c, double m1, double m2) const {
    double s = 0.0;
    for (std::size_t i = 0; i < tn2_.size(); ++i) {
      const double d = 1.0 + m1 * c1_[i] + m2 * c2_[i];
      s += c[i] * tn2_[i] / (d * d);
    }
    return s;
  }

  /// Smallest m >= 0 with sum c tn2 / (1 + m c)^2 <= r (upper end of the final bracket).
  static double solve_single(const std::vector<double>& tn2, const std::vector<double>& c, double r) {
    auto f = [&](double m) {
      double s = 0.0;
      for (std::size_t i = 0; i < tn2.size(); ++i) {
        const double d = 1.0 + m * c[i];
        s += c[i] * tn2[i] / (d * d);
      }
      return s;
    };
    if (f(0.0) <= r) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (f(hi) > r) {
      lo = hi;
      hi *= 2.0;
    }
    return bisect(f, r, lo, hi);
  }

  template <typename F>
  static double bisect(F f, double r, double lo, double hi) {
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) > r ? lo : hi) = mid;
    }
    return hi;
  }

  // m2*(m1) makes constraint 2 tight (or 0); g1(m1, m2*(m1)) is non-increasing in m1.
  double m2_given(double m1) const {
    auto f = [&](double m2) { return g(c2_, m1, m2); };
    if (f(0.0) <= r2_) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (f(hi) > r2_) {
      lo = hi;
      hi *= 2.0;
    }
    return bisect(f, r2_, lo, hi);
  }

  void nested(double& m1, double& m2) const {
    auto f = [&](double m) { return g(c1_, m, m2_given(m)); };
    double lo = 0.0, hi = 1.0;
    while (f(hi) > r1_) {
      lo = hi;
      hi *= 2.0;
    }
    m1 = bisect(f, r1_, lo, hi);
    m2 = m2_given(m1);
  }

  std::vector<double> tn2_, c1_, c2_;
  std::vector<bool> zeroed_;
  double r1_, r2_;
};

}  // namespace detail

/// x = per-BS projection of v + z / rho onto the power and backhaul balls.
inline void admm_x_update(const AdmmProblem& a, AdmmState& s) {
  for (std::size_t j = 0; j < a.bs_links.size(); ++j) {
    const auto& ls = a.bs_links[j];
    if (ls.empty()) continue;
    std::vector<CVector> t;
    std::vector<double> tn2, c1, c2;
    for (int l : ls) {
      t.push_back(s.v[l] + s.z[l] / s.rho);
      tn2.push_back(t.back().squaredNorm());
      c1.push_back(a.ptilde(l));
      c2.push_back(a.backhaul_weight(l));
    }
    const auto sc = detail::TwoBallProjector(tn2, c1, c2, a.power_budget(j), a.backhaul_budget(j)).scales();
    for (std::size_t m = 0; m < ls.size(); ++m) s.x[ls[m]] = sc[m] * t[m];
  }
}

/// z += rho (v - x), lambda += rho (g^H v - X).
inline void admm_dual_update(const AdmmProblem& a, AdmmState& s) {
  for (int l = 0; l < a.num_links; ++l) s.z[l] += s.rho * (s.v[l] - s.x[l]);
  for (int k = 0; k < a.num_ue; ++k)
    for (int l = 0; l < a.num_links; ++l) s.lambda(k, l) += s.rho * (a.gv(k, l).dot(s.v[l]) - s.X(k, l));
}

struct AdmmOptions {
  double rho = 1.0;
  double tol = 1e-4;
  int max_iter = 5000;
  bool adapt_rho = true;   // residual balancing
};

struct AdmmResult {
  Beamformers x;                 // feasible copy
  int iterations = 0;
  bool converged = false;
  double primal_residual = 0.0;  // max(||v - x||_inf, max |g^H v - X|)
  double dual_residual = 0.0;
  double objective = 0.0;        // at x
  std::vector<double> residual_trace;
};

inline double admm_primal_residual(const AdmmProblem& a, const AdmmState& s) {
  double r = 0.0;
  for (int l = 0; l < a.num_links; ++l) r = std::max(r, (s.v[l] - s.x[l]).cwiseAbs().maxCoeff());
  for (int k = 0; k < a.num_ue; ++k)
    for (int l = 0; l < a.num_links; ++l) r = std::max(r, std::abs(a.gv(k, l).dot(s.v[l]) - s.X(k, l)));
  return r;
}

/// Cycles v, (x, X), dual updates until primal and dual residuals fall below tol.
inline AdmmResult admm_solve(const AdmmProblem& a, const Beamformers& v0, const AdmmOptions& opt) {
  AdmmResult res;
  AdmmState s = init_admm_state(a, v0, opt.rho);
  if (a.num_links == 0) {
    res.converged = true;
    res.objective = admm_objective(a, s.x);
    return res;
  }
  // The v-update matrix is rho * (sum g g^H + I), so the factors survive rho changes.
  const auto factors = admm_v_factors(a);
  admm_x_update(a, s);
  for (int it = 1; it <= opt.max_iter; ++it) {
    const Beamformers x_prev = s.x;
    const CMatrix X_prev = s.X;
    admm_v_update(a, s, factors);
    admm_x_update(a, s);
    admm_X_update(a, s);
    admm_dual_update(a, s);
    const double r = admm_primal_residual(a, s);
    double d = 0.0;
    for (int l = 0; l < a.num_links; ++l) d = std::max(d, (s.x[l] - x_prev[l]).cwiseAbs().maxCoeff());
    d = std::max(d, (s.X - X_prev).cwiseAbs().maxCoeff());
    d *= s.rho;
    res.iterations = it;
    res.primal_residual = r;
    res.dual_residual = d;
    res.residual_trace.push_back(r);
    if (r < opt.tol && d < opt.tol) {
      res.converged = true;
      break;
    }
    if (opt.adapt_rho && it % 10 == 0) {
      if (r > 10.0 * d) s.rho *= 2.0;
      else if (d > 10.0 * r) s.rho /= 2.0;
    }
  }
  res.x = s.x;
  res.objective = admm_objective(a, s.x);
  return res;
}

/// Per-BS slacks P_j - sum p~ ||x||^2 and B_j - sum w ||x||^2 (minimum of the two).
inline double admm_min_slack(const AdmmProblem& a, const Beamformers& x) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < a.bs_links.size(); ++j) {
    double pw = 0.0, bh = 0.0;
    for (int l : a.bs_links[j]) {
      pw += a.ptilde(l) * x[l].squaredNorm();
      bh += a.backhaul_weight(l) * x[l].squaredNorm();
    }
    m = std::min({m, a.power_budget(j) - pw, a.backhaul_budget(j) - bh});
  }
  return m;
}

}  // namespace mecopt
