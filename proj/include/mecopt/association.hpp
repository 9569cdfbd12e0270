#pragma once

#include <algorithm>
#include <numeric>
#include <ostream>
#include <vector>

#include "mecopt/core_model.hpp"
#include "mecopt/io.hpp"
#include "mecopt/model.hpp"

namespace mecopt {

/// r~(j,k) = log2(1 + P beta ||H||_F^2 / sigma^2), per cluster |Q_i| x |I_i|.
inline std::vector<RMatrix> link_rate_matrix(const ChannelRealization& ch, const ClusterIndex& clusters,
                                             double p_max) {
  std::vector<RMatrix> out;
  for (int i = 0; i < clusters.num_clusters(); ++i) {
    const auto& q = clusters.bs[i];
    const auto& u = clusters.ue[i];
    RMatrix r(q.size(), u.size());
    for (std::size_t j = 0; j < q.size(); ++j)
      for (std::size_t k = 0; k < u.size(); ++k)
        r(j, k) = std::log2(1.0 + p_max * ch.beta(u[k], q[j]) * ch.h(u[k], q[j]).squaredNorm() / ch.noise_power);
    out.push_back(r);
  }
  return out;
}

/// Same proxy with ||H||_F^2 replaced by its mean nt * nr; used for long-term decisions.
inline std::vector<RMatrix> expected_link_rate_matrix(const RMatrix& beta, double noise, const ClusterIndex& clusters,
                                                      double p_max, int nt, int nr) {
  std::vector<RMatrix> out;
  for (int i = 0; i < clusters.num_clusters(); ++i) {
    const auto& q = clusters.bs[i];
    const auto& u = clusters.ue[i];
    RMatrix r(q.size(), u.size());
    for (std::size_t j = 0; j < q.size(); ++j)
      for (std::size_t k = 0; k < u.size(); ++k)
        r(j, k) = std::log2(1.0 + p_max * beta(u[k], q[j]) * nt * nr / noise);
    out.push_back(r);
  }
  return out;
}

/// Keeps at most `cap` users per BS, dropping the lowest r~ first (then the
/// highest UE index).
inline void enforce_bs_cap(RMatrix& d, const RMatrix& rates, int cap) {
  for (int j = 0; j < d.rows(); ++j) {
    std::vector<int> served;
    for (int k = 0; k < d.cols(); ++k)
      if (d(j, k) > 0.5) served.push_back(k);
    if (static_cast<int>(served.size()) <= cap) continue;
    std::sort(served.begin(), served.end(), [&](int a, int b) {
      if (rates(j, a) != rates(j, b)) return rates(j, a) < rates(j, b);
      return a > b;
    });
    for (std::size_t n = 0; n + cap < served.size(); ++n) d(j, served[n]) = 0.0;
  }
}

/// d(j,k) = 1(r~(j,k) >= r), then the per-BS cap.
inline AssociationMatrix threshold_association(const std::vector<RMatrix>& rates, double threshold, int cap) {
  AssociationMatrix a;
  for (const auto& r : rates) {
    RMatrix d = (r.array() >= threshold).cast<double>().matrix();
    enforce_bs_cap(d, r, cap);
    a.d.push_back(d);
  }
  return a;
}

/// mu_user(j,k) = sum_n pbar(k,n) C(n,j), i.e. (pbar C)^T.
inline RMatrix user_savings(const RMatrix& pbar, const RMatrix& c) { return (pbar * c).transpose(); }

/// Content-aware restriction of `base`: keep a link iff mu_user > 0. A UE left
/// without a link gets back its best base link by r~.
inline AssociationMatrix content_aware_association(const Preferences& prefs, const CachePlacement& placement,
                                                   const AssociationMatrix& base, const std::vector<RMatrix>& rates,
                                                   int cap) {
  require(prefs.num_clusters() == base.num_clusters() && placement.num_clusters() == base.num_clusters(),
          "content_aware_association: cluster count mismatch");
  AssociationMatrix a;
  for (int i = 0; i < base.num_clusters(); ++i) {
    const RMatrix mu = user_savings(prefs.pbar[i], placement.c[i]);
    const RMatrix& b = base.d[i];
    RMatrix d = RMatrix::Zero(b.rows(), b.cols());
    for (int j = 0; j < b.rows(); ++j)
      for (int k = 0; k < b.cols(); ++k)
        if (b(j, k) > 0.5 && mu(j, k) > 0.0) d(j, k) = 1.0;
    for (int k = 0; k < b.cols(); ++k) {
      if (d.col(k).sum() > 0.0) continue;
      int best = -1;
      for (int j = 0; j < b.rows(); ++j)
        if (b(j, k) > 0.5 && (best < 0 || rates[i](j, k) > rates[i](best, k))) best = j;
      if (best >= 0) d(best, k) = 1.0;
    }
    enforce_bs_cap(d, rates[i], cap);
    a.d.push_back(d);
  }
  return a;
}

/// Each UE attaches to the geographically nearest BS of its cluster.
inline AssociationMatrix nearest_association(const Topology& topo, const ClusterIndex& clusters,
                                             const std::vector<RMatrix>& rates, int cap) {
  AssociationMatrix a;
  for (int i = 0; i < clusters.num_clusters(); ++i) {
    const auto& q = clusters.bs[i];
    const auto& u = clusters.ue[i];
    RMatrix d = RMatrix::Zero(q.size(), u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < q.size(); ++j)
        if (topo.distance_km(u[k], q[j]) < topo.distance_km(u[k], q[best])) best = j;
      if (!q.empty()) d(best, k) = 1.0;
    }
    enforce_bs_cap(d, rates[i], cap);
    a.d.push_back(d);
  }
  return a;
}

struct BackhaulLoad {
  std::vector<RVector> load;               // per cluster, per BS
  std::vector<std::vector<bool>> feasible;  // load <= capacity
};

/// load_j = sum_k d(j,k) R_k. `capacity` is per cluster, per BS.
inline BackhaulLoad backhaul_load(const AssociationMatrix& assoc, const std::vector<RVector>& rates,
                                  const std::vector<RVector>& capacity) {
  BackhaulLoad out;
  for (int i = 0; i < assoc.num_clusters(); ++i) {
    const RMatrix& d = assoc.d[i];
    require(rates[i].size() == d.cols() && capacity[i].size() == d.rows(), "backhaul_load: dimension mismatch");
    for (int k = 0; k < rates[i].size(); ++k) require(rates[i](k) >= 0.0, "backhaul_load: rates must be >= 0");
    RVector load = RVector::Zero(d.rows());
    for (int j = 0; j < d.rows(); ++j)
      for (int k = 0; k < d.cols(); ++k)
        if (d(j, k) > 0.5) load(j) += rates[i](k);
    std::vector<bool> ok(d.rows());
    for (int j = 0; j < d.rows(); ++j) ok[j] = load(j) <= capacity[i](j);
    out.load.push_back(load);
    out.feasible.push_back(ok);
  }
  return out;
}

/// Optional post-pass: on each overloaded BS, drop its smallest-mu links (ties:
/// higher UE index first) until the load fits. May leave a UE unserved.
inline AssociationMatrix repair_backhaul(const AssociationMatrix& assoc, const Preferences& prefs,
                                         const CachePlacement& placement, const std::vector<RVector>& rates,
                                         const std::vector<RVector>& capacity) {
  AssociationMatrix out = assoc;
  for (int i = 0; i < assoc.num_clusters(); ++i) {
    const RMatrix mu = user_savings(prefs.pbar[i], placement.c[i]);
    RMatrix& d = out.d[i];
    for (int j = 0; j < d.rows(); ++j) {
      std::vector<int> served;
      double load = 0.0;
      for (int k = 0; k < d.cols(); ++k)
        if (d(j, k) > 0.5) served.push_back(k), load += rates[i](k);
      std::sort(served.begin(), served.end(), [&](int a, int b) {
        if (mu(j, a) != mu(j, b)) return mu(j, a) < mu(j, b);
        return a > b;
      });
      for (int k : served) {
        if (load <= capacity[i](j)) break;
        d(j, k) = 0.0;
        load -= rates[i](k);
      }
    }
  }
  return out;
}

/// Rows (bs_id, ue_id, bit) over every intra-cluster pair, global indices.
inline void write_association_csv(std::ostream& os, const AssociationMatrix& assoc, const ClusterIndex& clusters) {
  CsvWriter w(os);
  w.header({"bs_id", "ue_id", "bit"});
  for (int i = 0; i < assoc.num_clusters(); ++i)
    for (int j = 0; j < assoc.d[i].rows(); ++j)
      for (int k = 0; k < assoc.d[i].cols(); ++k)
        w.row(clusters.bs[i][j], clusters.ue[i][k], assoc.linked(i, j, k) ? 1 : 0);
}

}  // namespace mecopt
