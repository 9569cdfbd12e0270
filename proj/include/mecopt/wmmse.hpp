#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "mecopt/admm.hpp"
#include "mecopt/beamforming.hpp"
#include "mecopt/io.hpp"
#include "mecopt/rng.hpp"

namespace mecopt {

struct WmmseOptions {
  double tol = 1e-2;        // on |throughput change|, bits/s/Hz
  int max_outer = 200;
  double delta = 1e-6;      // regularizer in rho_l = 1 / (||v_l||^2 + delta)
  AdmmOptions admm;
  std::uint64_t seed = 1;   // random feasible start
  std::uint64_t draw = 0;   // separates starts of different realizations
  bool budget_scaling = true;  // try scaling v onto the budgets after each v-step
};

struct WmmseIteration {
  int iter = 0;
  double surrogate = 0.0;
  double throughput = 0.0;
  double max_residual = 0.0;
  int admm_iterations = 0;
  bool kept_previous = false;
  bool scaled = false;
};

struct DeliverySolution {
  Beamformers v;
  ReceiverState rx;
  RVector rates;            // per UE, bits/s/Hz
  RVector power_use;        // per BS, watts
  RVector backhaul_use;     // per BS
  double throughput = 0.0;
  int outer_iterations = 0;
  bool converged = false;
  int weight_clamps = 0;
  bool admm_all_converged = true;
  std::vector<WmmseIteration> trace;
};

/// Random directions, scaled so every BS spends exactly P^max split equally
/// over its active links. Starting on the power boundary matters: when the
/// power constraint is slack, WMMSE raises power by only about 1/SNR per step.
inline Beamformers random_feasible_start(const DeliveryProblem& p, std::uint64_t seed, std::uint64_t draw) {
  Beamformers v;
  for (const auto& l : p.links) {
    auto rng = make_stream(seed, Stream::kBeamInit,
                           {draw, static_cast<std::uint64_t>(l.ue), static_cast<std::uint64_t>(l.bs)});
    CVector x = draw_cn_matrix(rng, p.nt, 1).col(0);
    v.push_back(x / x.norm());
  }
  for (int j = 0; j < p.num_bs; ++j) {
    const double share = p.power_budget(j) / static_cast<double>(p.bs_links[j].size());
    for (int l : p.bs_links[j]) v[l] *= std::sqrt(share / p.links[l].ptilde);
  }
  return v;
}

/// Per-link backhaul weights Rhat_ue / (||v_l||^2 + delta).
inline RVector backhaul_weights(const DeliveryProblem& p, const Beamformers& v, const RVector& rates, double delta) {
  RVector c(p.num_links());
  for (int l = 0; l < p.num_links(); ++l) c(l) = rates(p.links[l].ue) / (v[l].squaredNorm() + delta);
  return c;
}

/// Projects each v_l onto span{g_kl : k}. Components outside it reach no
/// receiver, so the weighted MSE is unchanged while every norm shrinks. Without
/// this the v-step keeps stale directions from its warm start and the outer
/// loop crawls.
inline void drop_unseen_components(const AdmmProblem& a, Beamformers& v) {
  for (int l = 0; l < a.num_links; ++l) {
    CMatrix g(a.nt, a.num_ue);
    for (int k = 0; k < a.num_ue; ++k) g.col(k) = a.gv(k, l);
    const Eigen::JacobiSVD<CMatrix> svd(g, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    int rank = 0;
    while (rank < sv.size() && sv(rank) > 1e-12 * sv(0)) ++rank;
    if (rank == 0) {
      v[l].setZero();
      continue;
    }
    const CMatrix u = svd.matrixU().leftCols(rank);
    v[l] = u * (u.adjoint() * v[l]);
  }
}

/// Scales every BS onto its tighter budget, power or backhaul at the given
/// weights. Returns false when no BS has room to grow.
inline bool scale_to_budgets(const DeliveryProblem& p, Beamformers& v, const RVector& bh_weight) {
  bool grew = false;
  for (int j = 0; j < p.num_bs; ++j) {
    double pw = 0.0, bh = 0.0;
    for (int l : p.bs_links[j]) {
      pw += p.links[l].ptilde * v[l].squaredNorm();
      bh += bh_weight(l) * v[l].squaredNorm();
    }
    if (pw <= 0.0) continue;
    double s2 = p.power_budget(j) / pw;
    if (bh > 0.0) s2 = std::min(s2, p.backhaul_budget(j) / bh);
    s2 *= 1.0 - 1e-12;
    if (s2 <= 1.0) continue;
    for (int l : p.bs_links[j]) v[l] *= std::sqrt(s2);
    grew = true;
  }
  return grew;
}

inline bool satisfies_budgets(const DeliveryProblem& p, const Beamformers& v, const RVector& bh_weight) {
  for (int j = 0; j < p.num_bs; ++j) {
    double pw = 0.0, bh = 0.0;
    for (int l : p.bs_links[j]) {
      pw += p.links[l].ptilde * v[l].squaredNorm();
      bh += bh_weight(l) * v[l].squaredNorm();
    }
    if (pw > p.power_budget(j) || bh > p.backhaul_budget(j)) return false;
  }
  return true;
}

/// Served-user rate sums within every BS's backhaul budget.
inline bool backhaul_feasible(const DeliveryProblem& p, const RVector& rates) {
  const RVector use = bs_backhaul_use(p, rates);
  for (int j = 0; j < p.num_bs; ++j)
    if (use(j) > p.backhaul_budget(j)) return false;
  return true;
}

inline Beamformers scaled(Beamformers v, double s) {
  for (auto& x : v) x *= s;
  return v;
}

/// Block coordinate ascent over (u, w, v): MMSE receivers, weights, then an
/// ADMM solve for v. Every accepted iterate keeps the served rates within the
/// backhaul budgets, so it stays feasible under the next reweighting and the
/// surrogate never decreases. Stops when the sum rate moves by less than tol.
inline DeliverySolution wmmse_solve(const DeliveryProblem& p, const WmmseOptions& opt) {
  DeliverySolution sol;
  Beamformers v = random_feasible_start(p, opt.seed, opt.draw);
  if (!backhaul_feasible(p, user_rates(p, v))) {
    // Rates grow with a common scale, so bisect for the largest feasible one.
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (backhaul_feasible(p, user_rates(p, scaled(v, mid))) ? lo : hi) = mid;
    }
    v = scaled(v, lo);
  }
  RVector rates = user_rates(p, v);
  ReceiverState rx = update_receivers(p, v);
  sol.weight_clamps += rx.clamped;
  double throughput = rates.sum();
  sol.trace.push_back({0, wmmse_surrogate(p, v, rx), throughput, 0.0, 0, false, false});

  for (int t = 1; t <= opt.max_outer; ++t) {
    const RVector bh_weight = backhaul_weights(p, v, rates, opt.delta);
    const AdmmProblem a = make_admm_problem(p, rx, bh_weight);
    AdmmResult r = admm_solve(a, v, opt.admm);
    drop_unseen_components(a, r.x);
    sol.admm_all_converged = sol.admm_all_converged && r.converged;
    bool kept = true;
    // ADMM stops at a tolerance; never accept a step that worsens the weighted MSE.
    // The reweighted budget only approximates the rate sum, so walk back toward
    // the previous iterate until the served rates fit the backhaul. The weighted
    // MSE is convex in v, so every point of the segment still improves it.
    if (weighted_mse_sum(p, r.x, rx) <= weighted_mse_sum(p, v, rx)) {
      double theta = 1.0;
      for (int bt = 0; bt < 30; ++bt, theta *= 0.5) {
        Beamformers cand = v;
        for (int l = 0; l < p.num_links(); ++l) cand[l] += theta * (r.x[l] - v[l]);
        if (backhaul_feasible(p, user_rates(p, cand))) {
          v = std::move(cand);
          kept = false;
          break;
        }
      }
    }
    rx = update_receivers(p, v);
    bool boosted = false;
    if (opt.budget_scaling) {
      // With slack budgets the v-step only raises each SNR by about 2 per round.
      // Scaling onto the budgets and keeping it only when the surrogate improves
      // preserves monotonicity.
      Beamformers s = v;
      if (scale_to_budgets(p, s, bh_weight)) {
        ReceiverState srx = update_receivers(p, s);
        if (wmmse_surrogate(p, s, srx) > wmmse_surrogate(p, v, rx) && backhaul_feasible(p, user_rates(p, s))) {
          v = std::move(s);
          rx = std::move(srx);
          boosted = true;
        }
      }
    }
    sol.weight_clamps += rx.clamped;
    rates = user_rates(p, v);
    const double prev = throughput;
    throughput = rates.sum();
    sol.trace.push_back({t, wmmse_surrogate(p, v, rx), throughput, r.primal_residual, r.iterations, kept, boosted});
    sol.outer_iterations = t;
    if (std::abs(throughput - prev) < opt.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.v = v;
  sol.rx = rx;
  sol.rates = rates;
  sol.throughput = throughput;
  sol.power_use = bs_power_use(p, v);
  sol.backhaul_use = bs_backhaul_use(p, rates);
  return sol;
}

/// Rows (outer_iter, surrogate, throughput, max_residual).
inline void write_wmmse_trace_csv(std::ostream& os, const std::vector<WmmseIteration>& trace) {
  CsvWriter w(os);
  w.header({"outer_iter", "surrogate", "throughput", "max_residual"});
  for (const auto& it : trace) w.row(it.iter, it.surrogate, it.throughput, it.max_residual);
}

}  // namespace mecopt
