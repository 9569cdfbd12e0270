#pragma once

// Stochastic parallel SCA for the relaxed placement problem.
//
// For victim UE k requesting file n and a fixed channel sample, with
// Q_{k,l,j} = p~_lj beta_kj / sigma^2 (H_kj v_lj)(H_kj v_lj)^H over associated
// pairs (l, j):
//   T_{k,n}(C) = I + sum_{l,j} pbar_{l,n}^2 C(n,j) Q_{k,l,j}
//   N_{k,n}(C) = T_{k,n}(C) minus the l = k terms
// and cluster s contributes
//   U_s = lam sum_{k in I_s} sum_n pbar_{k,n} mean[log2 det T - log2 det N]
//       + (1 - lam) <mu_s, C_s>.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <vector>

#include "mecopt/caching.hpp"
#include "mecopt/core_model.hpp"
#include "mecopt/io.hpp"
#include "mecopt/model.hpp"

namespace mecopt {

using Placement = std::vector<RMatrix>;  // per cluster, F x |Q_i|

struct ScaTerm {
  int ue = 0;         // transmitting-to UE l (global)
  int cluster = 0;    // cluster of the BS
  int local_bs = 0;   // BS position inside its cluster
  CMatrix q;          // nr x nr, p~ beta / sigma^2 g g^H
};

struct ScaModel {
  int num_files = 0;
  int nr = 1;
  int num_samples = 0;
  double lambda = 0.5;
  std::vector<std::vector<int>> cluster_ues;   // I_s, global
  std::vector<int> cluster_of_ue;
  RMatrix pbar;                                // K x F, global UE rows
  std::vector<RMatrix> mu_file;                // per cluster |Q_i| x F
  std::vector<std::vector<std::vector<ScaTerm>>> terms;  // [sample][victim UE]

  int num_clusters() const { return static_cast<int>(cluster_ues.size()); }
  const std::vector<ScaTerm>& at(int s, int k) const { return terms[s][k]; }
};

/// Unit-norm dominant right singular vector of h (MRT direction).
inline CVector mrt_direction(const CMatrix& h) {
  Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeFullV);
  return svd.matrixV().col(0);
}

/// Builds the SCA data. `samples[s]` holds small-scale matrices indexed
/// [k * B + j]; D is the long-term association; each BS splits p_max equally
/// over its associated users and transmits along the MRT direction.
inline ScaModel make_sca_model(const ClusterIndex& clusters, const RMatrix& beta, double noise,
                               const std::vector<std::vector<CMatrix>>& samples, const AssociationMatrix& d,
                               const Preferences& prefs, double p_max, double lambda) {
  ScaModel m;
  const int num_ue = static_cast<int>(beta.rows());
  const int num_bs = static_cast<int>(beta.cols());
  m.num_files = prefs.num_files();
  m.num_samples = static_cast<int>(samples.size());
  m.lambda = lambda;
  m.cluster_ues = clusters.ue;
  m.cluster_of_ue.assign(num_ue, -1);
  m.pbar = RMatrix::Zero(num_ue, m.num_files);
  for (int i = 0; i < clusters.num_clusters(); ++i) {
    for (std::size_t k = 0; k < clusters.ue[i].size(); ++k) {
      m.cluster_of_ue[clusters.ue[i][k]] = i;
      m.pbar.row(clusters.ue[i][k]) = prefs.pbar[i].row(static_cast<int>(k));
    }
    m.mu_file.push_back(file_savings(prefs.pbar[i], d.d[i]));
  }
  struct Pair {
    int ue, bs, cluster, local_bs;
    double ptilde;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < d.num_clusters(); ++i)
    for (int jl = 0; jl < d.d[i].rows(); ++jl) {
      const double load = d.d[i].row(jl).sum();
      for (int kl = 0; kl < d.d[i].cols(); ++kl)
        if (d.linked(i, jl, kl)) pairs.push_back({clusters.ue[i][kl], clusters.bs[i][jl], i, jl, p_max / load});
    }
  m.terms.resize(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& h = samples[s];
    require(h.size() == static_cast<std::size_t>(num_ue) * num_bs, "make_sca_model: sample size mismatch");
    m.nr = static_cast<int>(h.front().rows());
    std::vector<CVector> v;
    for (const auto& pr : pairs) v.push_back(mrt_direction(h[static_cast<std::size_t>(pr.ue) * num_bs + pr.bs]));
    m.terms[s].resize(num_ue);
    for (int k = 0; k < num_ue; ++k)
      for (std::size_t t = 0; t < pairs.size(); ++t) {
        const auto& pr = pairs[t];
        const CVector g = h[static_cast<std::size_t>(k) * num_bs + pr.bs] * v[t];
        m.terms[s][k].push_back({pr.ue, pr.cluster, pr.local_bs, pr.ptilde * beta(k, pr.bs) / noise * (g * g.adjoint())});
      }
  }
  return m;
}


/// Value and gradients of the throughput part, split by victim cluster s and
/// by the log det T and log det N pieces.
struct ScaEvaluation {
  RVector value_t;   // per victim cluster, lam sum pbar mean log2det T
  RVector value_n;   // same for N
  // grad_t[s][i]: gradient of value_t[s] w.r.t. C_i; likewise grad_n.
  std::vector<std::vector<RMatrix>> grad_t;
  std::vector<std::vector<RMatrix>> grad_n;
  // Optional: tr(T^-1 A T^-1 A) per entry, A the aggregate of the entry's terms;
  // the negated diagonal of the Hessian of value_t[s].
  std::vector<std::vector<RMatrix>> curv_t;
};

namespace detail {

// Fixed-size kernel for the common small receive-antenna counts.
template <int N>
void sca_accumulate(const ScaModel& m, const Placement& c, bool with_gradient, const std::vector<bool>& victims,
                    bool with_n, bool with_curvature, ScaEvaluation& e) {
  using M = Eigen::Matrix<cd, N, N>;
  using Q = Eigen::Map<const M>;
  const double inv_ln2 = 1.0 / std::log(2.0);
  const int nr = m.nr;
  const M eye = M::Identity(nr, nr);
  M t(nr, nr), nn(nr, nr), t_inv(nr, nr), n_inv(nr, nr), agg(nr, nr), ta(nr, nr);
  Eigen::LLT<M> llt(nr);
  auto log2det = [&](const M& a, M* inv) {
    llt.compute(a);
    require(llt.info() == Eigen::Success, "sca: covariance not positive definite");
    double ld = 0.0;
    for (int r = 0; r < nr; ++r) ld += 2.0 * std::log(llt.matrixLLT()(r, r).real());
    if (inv) *inv = llt.solve(eye);
    return ld * inv_ln2;
  };
  const int nc = m.num_clusters();
  for (int s = 0; s < nc; ++s) {
    if (!victims.empty() && !victims[s]) continue;
    for (int k : m.cluster_ues[s]) {
      for (int n = 0; n < m.num_files; ++n) {
        const double pk = m.pbar(k, n);
        if (pk == 0.0) continue;
        const double wgt = m.lambda * pk / m.num_samples;
        for (int smp = 0; smp < m.num_samples; ++smp) {
          const auto& terms = m.at(smp, k);
          t = eye;
          nn = eye;
          for (const auto& tm : terms) {
            const double coef = m.pbar(tm.ue, n) * m.pbar(tm.ue, n) * c[tm.cluster](n, tm.local_bs);
            if (coef == 0.0) continue;
            const Q q(tm.q.data(), nr, nr);
            t.noalias() += coef * q;
            if (tm.ue != k) nn.noalias() += coef * q;
          }
          e.value_t(s) += wgt * log2det(t, with_gradient ? &t_inv : nullptr);
          if (with_n) e.value_n(s) += wgt * log2det(nn, with_gradient ? &n_inv : nullptr);
          if (!with_gradient) continue;
          for (const auto& tm : terms) {
            const double p2 = m.pbar(tm.ue, n) * m.pbar(tm.ue, n);
            if (p2 == 0.0) continue;
            const Q q(tm.q.data(), nr, nr);
            // tr(A Q) for Hermitian A, Q.
            e.grad_t[s][tm.cluster](n, tm.local_bs) += wgt * inv_ln2 * p2 * t_inv.cwiseProduct(q.transpose()).sum().real();
            if (with_n && tm.ue != k)
              e.grad_n[s][tm.cluster](n, tm.local_bs) +=
                  wgt * inv_ln2 * p2 * n_inv.cwiseProduct(q.transpose()).sum().real();
          }
          if (!with_curvature) continue;
          // Terms of one BS are contiguous.
          for (std::size_t a = 0; a < terms.size();) {
            std::size_t b = a;
            agg.setZero();
            for (; b < terms.size() && terms[b].cluster == terms[a].cluster && terms[b].local_bs == terms[a].local_bs; ++b)
              agg.noalias() += m.pbar(terms[b].ue, n) * m.pbar(terms[b].ue, n) * Q(terms[b].q.data(), nr, nr);
            ta.noalias() = t_inv * agg;
            e.curv_t[s][terms[a].cluster](n, terms[a].local_bs) += wgt * inv_ln2 * ta.cwiseProduct(ta.transpose()).sum().real();
            a = b;
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Evaluates the victims of the clusters flagged in `victims` (all when empty).
inline ScaEvaluation sca_evaluate(const ScaModel& m, const Placement& c, bool with_gradient,
                                  const std::vector<bool>& victims = {}, bool with_n = true,
                                  bool with_curvature = false) {
  const int nc = m.num_clusters();
  ScaEvaluation e;
  e.value_t = RVector::Zero(nc);
  e.value_n = RVector::Zero(nc);
  if (with_gradient) {
    e.grad_t.assign(nc, {});
    e.grad_n.assign(nc, {});
    for (int s = 0; s < nc; ++s)
      for (int i = 0; i < nc; ++i) {
        e.grad_t[s].push_back(RMatrix::Zero(c[i].rows(), c[i].cols()));
        e.grad_n[s].push_back(RMatrix::Zero(c[i].rows(), c[i].cols()));
      }
  }
  with_curvature = with_curvature && with_gradient;
  if (with_curvature) {
    e.curv_t.assign(nc, {});
    for (int s = 0; s < nc; ++s)
      for (int i = 0; i < nc; ++i) e.curv_t[s].push_back(RMatrix::Zero(c[i].rows(), c[i].cols()));
  }
  if (m.lambda == 0.0 || m.num_samples == 0) return e;
  switch (m.nr) {
    case 1: detail::sca_accumulate<1>(m, c, with_gradient, victims, with_n, with_curvature, e); break;
    case 2: detail::sca_accumulate<2>(m, c, with_gradient, victims, with_n, with_curvature, e); break;
    case 4: detail::sca_accumulate<4>(m, c, with_gradient, victims, with_n, with_curvature, e); break;
    default: detail::sca_accumulate<Eigen::Dynamic>(m, c, with_gradient, victims, with_n, with_curvature, e); break;
  }
  return e;
}

inline double savings_term(const ScaModel& m, const Placement& c, int cluster) {
  return (1.0 - m.lambda) * (m.mu_file[cluster].transpose().array() * c[cluster].array()).sum();
}

/// Sample-average objective O(C) = sum_s U_s.
inline double sca_objective_sample(const ScaModel& m, const Placement& c) {
  const ScaEvaluation e = sca_evaluate(m, c, false);
  double o = (e.value_t - e.value_n).sum();
  for (int i = 0; i < m.num_clusters(); ++i) o += savings_term(m, c, i);
  return o;
}

/// f_i(C) = sum_{s != i} U_s(C), the utility of the other clusters.
inline double sca_other_utility(const ScaModel& m, const Placement& c, int i) {
  std::vector<bool> victims(m.num_clusters(), true);
  victims[i] = false;
  const ScaEvaluation e = sca_evaluate(m, c, false, victims);
  double o = (e.value_t - e.value_n).sum();
  for (int s = 0; s < m.num_clusters(); ++s)
    if (s != i) o += savings_term(m, c, s);
  return o;
}

/// f_i'(C): gradient of the other clusters' utility with respect to C_i.
inline RMatrix sca_gradient(const ScaModel& m, const Placement& c, int i) {
  std::vector<bool> victims(m.num_clusters(), true);
  victims[i] = false;
  const ScaEvaluation e = sca_evaluate(m, c, true, victims);
  RMatrix g = RMatrix::Zero(c[i].rows(), c[i].cols());
  for (int s = 0; s < m.num_clusters(); ++s)
    if (s != i) g += e.grad_t[s][i] - e.grad_n[s][i];
  return g;
}

/// Full gradient of O with respect to C_i.
inline RMatrix sca_objective_gradient(const ScaModel& m, const Placement& c, int i) {
  const ScaEvaluation e = sca_evaluate(m, c, true);
  RMatrix g = (1.0 - m.lambda) * m.mu_file[i].transpose();
  for (int s = 0; s < m.num_clusters(); ++s) g += e.grad_t[s][i] - e.grad_n[s][i];
  return g;
}

/// Projection of column y onto {0 <= c <= 1, sum l_n c_n <= s} in the norm
/// sum_n d_n (c_n - y_n)^2: c = clip(y - theta l / d, 0, 1) with theta >= 0
/// found by bisection. Unit d gives the Euclidean projection.
inline RVector project_capacity(const RVector& y, const RVector& sizes, double capacity, const RVector& d) {
  const RVector dir = sizes.cwiseQuotient(d);
  auto at = [&](double theta) { return (y - theta * dir).cwiseMax(0.0).cwiseMin(1.0).eval(); };
  RVector c = at(0.0);
  if (c.dot(sizes) <= capacity) return c;
  double lo = 0.0, hi = 1.0;
  while (at(hi).dot(sizes) > capacity) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (at(mid).dot(sizes) > capacity ? lo : hi) = mid;
  }
  return at(hi);
}

inline RVector project_capacity(const RVector& y, const RVector& sizes, double capacity) {
  return project_capacity(y, sizes, capacity, RVector::Ones(y.size()));
}

inline RMatrix project_placement(const RMatrix& y, const RVector& sizes, const std::vector<std::uint64_t>& capacity,
                                 const RMatrix& d) {
  RMatrix out(y.rows(), y.cols());
  for (int j = 0; j < y.cols(); ++j)
    out.col(j) = project_capacity(y.col(j), sizes, static_cast<double>(capacity[j]), d.col(j));
  return out;
}

inline RMatrix project_placement(const RMatrix& y, const RVector& sizes, const std::vector<std::uint64_t>& capacity) {
  return project_placement(y, sizes, capacity, RMatrix::Ones(y.rows(), y.cols()));
}

struct ScaOptions {
  double tau = 1.0;
  double gamma0 = 0.5;
  double tol = 1e-3;          // on the sup-norm of the Jacobi update
  int max_outer = 100;
  double inner_tol = 1e-6;    // projected-gradient norm in the best response
  int inner_max_iter = 5000;
};

struct BestResponse {
  RMatrix c;
  double surrogate = 0.0;   // value of the surrogate at c, shifted so that it equals O(Cbar) at Cbar
  int iterations = 0;
  bool converged = false;
};

/// Strongly concave surrogate for cluster i around Cbar:
///   A_i(C_i) - <grad B_i(Cbar), C_i> + (1 - lam)<mu_i, C_i> + <f_i'(Cbar), C_i - Cbar_i>
///   - tau/2 ||C_i - Cbar_i||^2,
/// where A_i is the log det T part of cluster i's own throughput and B_i the
/// log det N part. Solved by projected gradient ascent with Armijo backtracking.
inline BestResponse sca_best_response(const ScaModel& m, const Placement& cbar, int i, const RMatrix& f_prime,
                                      const RVector& sizes, const std::vector<std::uint64_t>& capacity,
                                      const ScaOptions& opt) {
  std::vector<bool> own(m.num_clusters(), false);
  own[i] = true;
  const ScaEvaluation at_bar = sca_evaluate(m, cbar, true, own);
  const RMatrix lin = -at_bar.grad_n[i][i] + (1.0 - m.lambda) * m.mu_file[i].transpose() + f_prime;
  // Constant making the surrogate equal to O(Cbar) at Cbar.
  const double base = sca_objective_sample(m, cbar) - at_bar.value_t(i) - (lin.array() * cbar[i].array()).sum();

  Placement work = cbar;
  auto value_grad = [&](const RMatrix& ci, RMatrix* grad, RMatrix* curv) {
    work[i] = ci;
    const ScaEvaluation e = sca_evaluate(m, work, grad != nullptr, own, false, curv != nullptr);
    const RMatrix diff = ci - cbar[i];
    if (grad) *grad = e.grad_t[i][i] + lin - opt.tau * diff;
    if (curv) *curv = e.curv_t[i][i].array() + opt.tau;
    return base + e.value_t(i) + (lin.array() * ci.array()).sum() - 0.5 * opt.tau * diff.squaredNorm();
  };

  // Scaled gradient projection: metric = diagonal of the negated Hessian.
  BestResponse br;
  RMatrix c = cbar[i];
  RMatrix g, h;
  double f = value_grad(c, &g, &h);
  for (int it = 1; it <= opt.inner_max_iter; ++it) {
    br.iterations = it;
    const RMatrix dir = project_placement(c + g.cwiseQuotient(h), sizes, capacity, h) - c;
    if (dir.norm() < opt.inner_tol) {
      br.converged = true;
      break;
    }
    const double slope = (g.array() * dir.array()).sum();
    double step = 1.0;
    RMatrix cn;
    double fn = f;
    bool accepted = false;
    for (int bt = 0; bt < 50; ++bt, step *= 0.5) {
      cn = c + step * dir;
      fn = value_grad(cn, nullptr, nullptr);
      if (fn >= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    c = cn;
    f = value_grad(c, &g, &h);
  }
  br.c = c;
  br.surrogate = f;
  return br;
}

/// Largest relaxed values first under capacity, ties by lower file index.
inline RVector round_column(const RVector& relaxed, const std::vector<std::uint64_t>& sizes, std::uint64_t capacity) {
  std::vector<int> order(relaxed.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return relaxed(a) > relaxed(b); });
  RVector out = RVector::Zero(relaxed.size());
  std::uint64_t used = 0;
  for (int n : order)
    if (relaxed(n) > 0.0 && used + sizes[n] <= capacity) {
      out(n) = 1.0;
      used += sizes[n];
    }
  return out;
}

inline CachePlacement round_placement(const Placement& relaxed, const Catalog& catalog,
                                      const std::vector<std::vector<std::uint64_t>>& capacity) {
  CachePlacement p;
  p.capacity = capacity;
  for (std::size_t i = 0; i < relaxed.size(); ++i) {
    RMatrix c(relaxed[i].rows(), relaxed[i].cols());
    for (int j = 0; j < c.cols(); ++j) c.col(j) = round_column(relaxed[i].col(j), catalog.file_sizes, capacity[i][j]);
    p.c.push_back(c);
  }
  if (!is_feasible(p, catalog)) throw Error("round_placement: rounded placement violates capacity");
  return p;
}

struct ScaIteration {
  int iter = 0;
  double surrogate = 0.0;   // mean over clusters of the best-response surrogate value
  double objective = 0.0;   // O(Cbar) after the update
  double step = 0.0;        // gamma_t
  double change = 0.0;      // sup-norm of the update
};

struct ScaResult {
  Placement relaxed;
  CachePlacement placement;   // rounded
  std::vector<ScaIteration> trace;
  int iterations = 0;
  bool converged = false;
  int inner_failures = 0;
};

/// Jacobi best-response loop with diminishing steps, then rounding.
inline ScaResult sca_solve(const ScaModel& m, const CachePlacement& start, const Catalog& catalog,
                           const ScaOptions& opt) {
  require(opt.tau > 0.0, "sca_solve: tau must be > 0");
  ScaResult res;
  Placement cbar = start.c;
  RVector sizes(catalog.num_files());
  for (int n = 0; n < catalog.num_files(); ++n) sizes(n) = static_cast<double>(catalog.file_sizes[n]);
  for (int t = 0; t < opt.max_outer; ++t) {
    Placement best(cbar.size());
    double surrogate = 0.0;
    for (int i = 0; i < m.num_clusters(); ++i) {
      const RMatrix fp = m.num_clusters() > 1 ? sca_gradient(m, cbar, i) : RMatrix::Zero(cbar[i].rows(), cbar[i].cols());
      const BestResponse br = sca_best_response(m, cbar, i, fp, sizes, start.capacity[i], opt);
      if (!br.converged) ++res.inner_failures;
      best[i] = br.c;
      surrogate += br.surrogate / m.num_clusters();
    }
    const double gamma = opt.gamma0 / (1.0 + t);
    double change = 0.0;
    for (std::size_t i = 0; i < cbar.size(); ++i) {
      const RMatrix delta = gamma * (best[i] - cbar[i]);
      if (delta.size() > 0) change = std::max(change, delta.cwiseAbs().maxCoeff());
      cbar[i] += delta;
    }
    res.iterations = t + 1;
    res.trace.push_back({t + 1, surrogate, sca_objective_sample(m, cbar), gamma, change});
    if (change < opt.tol) {
      res.converged = true;
      break;
    }
  }
  res.relaxed = cbar;
  res.placement = round_placement(cbar, catalog, start.capacity);
  return res;
}

/// Rows (iteration, surrogate, objective, step, change).
inline void write_sca_trace_csv(std::ostream& os, const std::vector<ScaIteration>& trace) {
  CsvWriter w(os);
  w.header({"iteration", "surrogate", "objective", "step", "change"});
  for (const auto& it : trace) w.row(it.iter, it.surrogate, it.objective, it.step, it.change);
}

}  // namespace mecopt
