#pragma once

// Delivery-phase signal model. Channels are stored noise-normalized,
// G(k,j) = sqrt(beta_kj / sigma^2) H_kj, so the receiver noise covariance is I
// and a link (l, j) with power p~ contributes sqrt(p~) G(k,j) v_lj at UE k.
// The signals of all serving BSs add coherently; every other active link is
// interference.

#include <cmath>
#include <vector>

#include "mecopt/caching.hpp"
#include "mecopt/core_model.hpp"
#include "mecopt/model.hpp"
#include "mecopt/popularity.hpp"

namespace mecopt {

struct Link {
  int ue = 0;            // global UE index
  int bs = 0;            // global BS index
  double ptilde = 0.0;   // watts
};

struct DeliveryProblem {
  int num_ue = 0;
  int num_bs = 0;
  int nt = 1;
  int nr = 1;
  std::vector<CMatrix> g;                  // [k * num_bs + j], nr x nt, noise-normalized
  std::vector<Link> links;                 // active links, sorted by (ue, bs)
  std::vector<std::vector<int>> ue_links;  // UE -> indices into links
  std::vector<std::vector<int>> bs_links;  // BS -> indices into links
  std::vector<std::vector<int>> served;    // BS -> associated UEs (global), for load accounting
  RVector power_budget;                    // P^max per BS, watts
  RVector backhaul_budget;                 // B per BS

  const CMatrix& G(int k, int j) const { return g[static_cast<std::size_t>(k) * num_bs + j]; }
  int num_links() const { return static_cast<int>(links.size()); }

  /// Rebuilds the per-UE and per-BS link index lists.
  void index_links() {
    ue_links.assign(num_ue, {});
    bs_links.assign(num_bs, {});
    for (int l = 0; l < num_links(); ++l) {
      ue_links[links[l].ue].push_back(l);
      bs_links[links[l].bs].push_back(l);
    }
  }
};

struct DeliveryOptions {
  double p_max = 1.0;                   // watts, every BS
  double backhaul_capacity = 1e9;       // every BS
  bool serve_misses_via_backhaul = false;
};

/// Active links are the associated (j, k) pairs whose BS caches the requested
/// file (or every associated pair when misses are fetched over the backhaul).
/// Each BS splits P^max equally over its associated users.
inline DeliveryProblem build_delivery_problem(const ChannelRealization& ch, const ClusterIndex& clusters,
                                              const AssociationMatrix& assoc, const CachePlacement& placement,
                                              const RequestProfile& requests, int nt, int nr,
                                              const DeliveryOptions& opt) {
  DeliveryProblem p;
  p.num_ue = ch.num_ue();
  p.num_bs = ch.num_bs;
  p.nt = nt;
  p.nr = nr;
  p.g.reserve(ch.small.size());
  for (int k = 0; k < p.num_ue; ++k)
    for (int j = 0; j < p.num_bs; ++j)
      p.g.push_back(std::sqrt(ch.beta(k, j) / ch.noise_power) * ch.h(k, j));
  p.power_budget = RVector::Constant(p.num_bs, opt.p_max);
  p.backhaul_budget = RVector::Constant(p.num_bs, opt.backhaul_capacity);
  p.served.assign(p.num_bs, {});
  for (int i = 0; i < assoc.num_clusters(); ++i)
    for (int jl = 0; jl < assoc.d[i].rows(); ++jl)
      for (int kl = 0; kl < assoc.d[i].cols(); ++kl)
        if (assoc.linked(i, jl, kl)) p.served[clusters.bs[i][jl]].push_back(clusters.ue[i][kl]);
  for (auto& s : p.served) std::sort(s.begin(), s.end());

  std::vector<Link> links;
  for (int i = 0; i < assoc.num_clusters(); ++i)
    for (int kl = 0; kl < assoc.d[i].cols(); ++kl)
      for (int jl = 0; jl < assoc.d[i].rows(); ++jl) {
        if (!assoc.linked(i, jl, kl)) continue;
        const bool hit = placement.caches(i, requests[i][kl], jl);
        if (!hit && !opt.serve_misses_via_backhaul) continue;
        const int j = clusters.bs[i][jl];
        links.push_back({clusters.ue[i][kl], j, opt.p_max / static_cast<double>(p.served[j].size())});
      }
  std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) {
    return a.ue != b.ue ? a.ue < b.ue : a.bs < b.bs;
  });
  p.links = std::move(links);
  p.index_links();
  return p;
}

/// Transmit beamformers per active link. Norms are free during optimization;
/// the transmitted power on link l is p~_l ||v_l||^2.
using Beamformers = std::vector<CVector>;

/// h_k = sum over UE k's links of sqrt(p~) G(k,j) v.
inline CVector effective_channel(const DeliveryProblem& p, const Beamformers& v, int k) {
  CVector h = CVector::Zero(p.nr);
  for (int l : p.ue_links[k]) h += std::sqrt(p.links[l].ptilde) * (p.G(k, p.links[l].bs) * v[l]);
  return h;
}

/// Interference-plus-noise covariance at UE k (noise-normalized, so + I).
inline CMatrix interference_covariance(const DeliveryProblem& p, const Beamformers& v, int k) {
  CMatrix n = CMatrix::Identity(p.nr, p.nr);
  for (int l = 0; l < p.num_links(); ++l) {
    if (p.links[l].ue == k) continue;
    const CVector a = p.G(k, p.links[l].bs) * v[l];
    n.noalias() += p.links[l].ptilde * (a * a.adjoint());
  }
  return n;
}

/// SINR of UE k for a receive filter u (scale-invariant).
inline double sinr(const DeliveryProblem& p, const Beamformers& v, const CVector& u, int k) {
  const double denom = (u.adjoint() * interference_covariance(p, v, k) * u)(0, 0).real();
  return std::norm(u.dot(effective_channel(p, v, k))) / denom;
}

/// Per-link squared magnitudes summed in the numerator; equals sinr() when UE k has one link.
inline double sinr_incoherent(const DeliveryProblem& p, const Beamformers& v, const CVector& u, int k) {
  double num = 0.0;
  for (int l : p.ue_links[k]) num += p.links[l].ptilde * std::norm(u.dot(p.G(k, p.links[l].bs) * v[l]));
  const double denom = (u.adjoint() * interference_covariance(p, v, k) * u)(0, 0).real();
  return num / denom;
}

inline double instantaneous_rate(double sinr_value) {
  require(sinr_value >= 0.0, "instantaneous_rate: sinr must be >= 0");
  return std::log2(1.0 + sinr_value);
}

/// sum_n pbar(n) R(n).
inline double average_rate(const Eigen::Ref<const RVector>& pbar_row, const Eigen::Ref<const RVector>& rate_per_file) {
  return pbar_row.dot(rate_per_file);
}

struct MmseReceiver {
  CVector u;            // unit-norm direction
  double alpha = 0.0;   // MSE-optimal filter is alpha * u
  double t = 0.0;       // h^H J^-1 h, in [0, 1)
  bool clamped = false;
  double condition = 1.0;  // 2-norm condition estimate of J

  CVector filter() const { return alpha * u; }
};

/// u = J^-1 h with J = h h^H + N, returned as direction and scale.
/// A UE with no signal gets u = e_1 and alpha = 0.
inline MmseReceiver mmse_receiver(const DeliveryProblem& p, const Beamformers& v, int k) {
  MmseReceiver r;
  const CVector h = effective_channel(p, v, k);
  if (h.squaredNorm() == 0.0) {
    r.u = CVector::Unit(p.nr, 0);
    return r;
  }
  const CMatrix j = h * h.adjoint() + interference_covariance(p, v, k);
  const Eigen::LDLT<CMatrix> ldlt(j);
  if (ldlt.info() != Eigen::Success) {
    const Eigen::JacobiSVD<CMatrix> svd(j);
    const double cond = svd.singularValues()(0) / svd.singularValues().tail(1)(0);
    throw Error("mmse_receiver: linear solve failed for UE " + std::to_string(k) +
                " (condition estimate " + std::to_string(cond) + ")");
  }
  const CVector f = ldlt.solve(h);
  const double nf = f.stableNorm();
  if (!(nf > 0.0)) {
    r.u = CVector::Unit(p.nr, 0);
    return r;
  }
  r.t = h.dot(f).real();
  r.u = f / nf;
  r.alpha = nf;
  if (r.t >= 1.0 - 1e-9) {
    r.t = 1.0 - 1e-9;
    r.clamped = true;
  }
  const RVector d = ldlt.vectorD().real().cwiseAbs();
  r.condition = d.maxCoeff() / d.minCoeff();
  return r;
}

/// w = 1 / (1 - t), with t >= 1 clamped to 1 - 1e-9.
inline double update_weight(double t, bool* clamped = nullptr) {
  if (clamped) *clamped = false;
  if (t >= 1.0 - 1e-9) {
    t = 1.0 - 1e-9;
    if (clamped) *clamped = true;
  }
  return 1.0 / (1.0 - t);
}

/// eps_k = |1 - f^H h_k|^2 + sum_interf p~ |f^H G v|^2 + ||f||^2 for receive filter f.
inline double mse(const DeliveryProblem& p, const Beamformers& v, const CVector& f, int k) {
  double e = std::norm(cd(1.0, 0.0) - f.dot(effective_channel(p, v, k)));
  for (int l = 0; l < p.num_links(); ++l) {
    if (p.links[l].ue == k) continue;
    e += p.links[l].ptilde * std::norm(f.dot(p.G(k, p.links[l].bs) * v[l]));
  }
  return e + f.squaredNorm();
}

struct ReceiverState {
  std::vector<CVector> u;   // unit-norm, per UE
  RVector alpha;            // filter scale, per UE
  RVector w;                // WMMSE weights, per UE
  int clamped = 0;          // weights clamped this update

  CVector filter(int k) const { return alpha(k) * u[k]; }
};

inline ReceiverState update_receivers(const DeliveryProblem& p, const Beamformers& v) {
  ReceiverState s;
  s.alpha.resize(p.num_ue);
  s.w.resize(p.num_ue);
  for (int k = 0; k < p.num_ue; ++k) {
    const MmseReceiver r = mmse_receiver(p, v, k);
    s.u.push_back(r.u);
    s.alpha(k) = r.alpha;
    bool c = false;
    s.w(k) = update_weight(r.t, &c);
    s.clamped += (c || r.clamped) ? 1 : 0;
  }
  return s;
}

/// log2(1 + h^H N^-1 h) per UE, the rate under the MMSE receiver.
inline RVector user_rates(const DeliveryProblem& p, const Beamformers& v) {
  RVector r(p.num_ue);
  for (int k = 0; k < p.num_ue; ++k) {
    const CVector h = effective_channel(p, v, k);
    if (h.squaredNorm() == 0.0) {
      r(k) = 0.0;
      continue;
    }
    const CMatrix n = interference_covariance(p, v, k);
    r(k) = std::log2(1.0 + h.dot(n.ldlt().solve(h)).real());
  }
  return r;
}

/// sum_k w_k eps_k for fixed receivers.
inline double weighted_mse_sum(const DeliveryProblem& p, const Beamformers& v, const ReceiverState& rx) {
  double s = 0.0;
  for (int k = 0; k < p.num_ue; ++k) s += rx.w(k) * mse(p, v, rx.filter(k), k);
  return s;
}

/// sum_k (ln w_k - w_k eps_k + 1).
inline double wmmse_surrogate(const DeliveryProblem& p, const Beamformers& v, const ReceiverState& rx) {
  double s = 0.0;
  for (int k = 0; k < p.num_ue; ++k) s += std::log(rx.w(k)) - rx.w(k) * mse(p, v, rx.filter(k), k) + 1.0;
  return s;
}

/// Transmit power p~ ||v||^2 summed per BS.
inline RVector bs_power_use(const DeliveryProblem& p, const Beamformers& v) {
  RVector out = RVector::Zero(p.num_bs);
  for (int l = 0; l < p.num_links(); ++l) out(p.links[l].bs) += p.links[l].ptilde * v[l].squaredNorm();
  return out;
}

/// sum of associated users' rates per BS.
inline RVector bs_backhaul_use(const DeliveryProblem& p, const RVector& rates) {
  RVector out = RVector::Zero(p.num_bs);
  for (int j = 0; j < p.num_bs; ++j)
    for (int k : p.served[j]) out(j) += rates(k);
  return out;
}

}  // namespace mecopt
