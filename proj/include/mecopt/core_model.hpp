#pragma once

// Topology, clustering and channel generation. All quantities returned here
// are in linear units (watts, linear power gains); dB/dBm appear only in
// NetworkConfig and at the conversion helpers.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "mecopt/config.hpp"
#include "mecopt/io.hpp"
#include "mecopt/rng.hpp"
#include "mecopt/types.hpp"

namespace mecopt {

struct Topology {
  std::vector<Point2> bs_positions;   // km
  std::vector<Point2> ue_positions;   // km
  std::vector<int> parent_of_ue;      // BS each UE was dropped around
  std::vector<int> cluster_of_bs;
  std::vector<int> cluster_of_ue;
  int num_clusters = 1;

  int num_bs() const { return static_cast<int>(bs_positions.size()); }
  int num_ue() const { return static_cast<int>(ue_positions.size()); }

  /// Q_i: global BS indices of cluster i, ascending.
  std::vector<int> bs_in_cluster(int cluster) const {
    std::vector<int> out;
    for (int j = 0; j < num_bs(); ++j)
      if (cluster_of_bs[j] == cluster) out.push_back(j);
    return out;
  }

  /// I_i: global UE indices of cluster i, ascending.
  std::vector<int> ue_in_cluster(int cluster) const {
    std::vector<int> out;
    for (int k = 0; k < num_ue(); ++k)
      if (cluster_of_ue[k] == cluster) out.push_back(k);
    return out;
  }

  /// Distance between UE k and BS j in km. Association indicators live in
  /// AssociationMatrix; this is geometry only.
  double distance_km(int ue, int bs) const { return distance(ue_positions[ue], bs_positions[bs]); }
};

/// Cluster membership in local (per-cluster) indexing.
struct ClusterIndex {
  std::vector<std::vector<int>> bs;   // bs[i] = Q_i
  std::vector<std::vector<int>> ue;   // ue[i] = I_i
  std::vector<int> local_bs;          // global BS -> position within its cluster
  std::vector<int> local_ue;          // global UE -> position within its cluster

  static ClusterIndex of(const Topology& topo) {
    ClusterIndex ci;
    ci.bs.resize(topo.num_clusters);
    ci.ue.resize(topo.num_clusters);
    ci.local_bs.assign(topo.num_bs(), -1);
    ci.local_ue.assign(topo.num_ue(), -1);
    for (int i = 0; i < topo.num_clusters; ++i) {
      ci.bs[i] = topo.bs_in_cluster(i);
      ci.ue[i] = topo.ue_in_cluster(i);
      for (std::size_t j = 0; j < ci.bs[i].size(); ++j) ci.local_bs[ci.bs[i][j]] = static_cast<int>(j);
      for (std::size_t k = 0; k < ci.ue[i].size(); ++k) ci.local_ue[ci.ue[i][k]] = static_cast<int>(k);
    }
    return ci;
  }

  int num_clusters() const { return static_cast<int>(bs.size()); }
};

inline double pathloss_db(double d_km, double intercept_db = 148.1, double slope_db = 37.6) {
  require(d_km > 0.0, "pathloss_db: distance must be > 0");
  return intercept_db + slope_db * std::log10(d_km);
}

/// sigma^2 = 10^((psd + 10 log10(B) - 30) / 10) watts.
inline double noise_power(const NetworkConfig& cfg) {
  require(cfg.bandwidth_hz > 0.0, "noise_power: bandwidth must be > 0");
  return dbm_to_watt(cfg.noise_psd_dbm_hz + 10.0 * std::log10(cfg.bandwidth_hz));
}

namespace detail {

inline Point2 uniform_in_annulus(std::mt19937_64& rng, const Point2& center, double r0, double r1) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double r = std::sqrt(r0 * r0 + (r1 * r1 - r0 * r0) * u01(rng));
  const double th = 2.0 * M_PI * u01(rng);
  return {center.x + r * std::cos(th), center.y + r * std::sin(th)};
}

// Lloyd's k-means with k-means++ seeding. Returns labels relabelled so that
// clusters are numbered by their smallest member index.
inline std::vector<int> kmeans_labels(const std::vector<Point2>& pts, int k, std::mt19937_64& rng) {
  const int n = static_cast<int>(pts.size());
  std::vector<Point2> centers;
  std::uniform_int_distribution<int> pick(0, n - 1);
  centers.push_back(pts[pick(rng)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int p = 0; p < n; ++p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, std::pow(distance(pts[p], c), 2));
      d2[p] = best;
      total += best;
    }
    int chosen = 0;
    if (total <= 0.0) {
      // Coincident points: take the first one not already a center.
      chosen = static_cast<int>(centers.size());
    } else {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (chosen = 0; chosen < n - 1; ++chosen) {
        r -= d2[chosen];
        if (r <= 0.0) break;
      }
    }
    centers.push_back(pts[chosen]);
  }

  std::vector<int> label(n, -1);
  for (int iter = 0; iter < 200; ++iter) {
    bool changed = false;
    for (int p = 0; p < n; ++p) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double d = distance(pts[p], centers[c]);
        if (d < bd) bd = d, best = c;
      }
      if (label[p] != best) label[p] = best, changed = true;
    }
    // Refill empty clusters with the point farthest from its center.
    for (int c = 0; c < k; ++c) {
      if (std::count(label.begin(), label.end(), c) > 0) continue;
      int far = -1;
      double fd = -1.0;
      for (int p = 0; p < n; ++p) {
        if (std::count(label.begin(), label.end(), label[p]) <= 1) continue;
        double d = distance(pts[p], centers[label[p]]);
        if (d > fd) fd = d, far = p;
      }
      label[far] = c;
      changed = true;
    }
    std::vector<Point2> sum(k);
    std::vector<int> cnt(k, 0);
    for (int p = 0; p < n; ++p) {
      sum[label[p]].x += pts[p].x;
      sum[label[p]].y += pts[p].y;
      ++cnt[label[p]];
    }
    for (int c = 0; c < k; ++c) centers[c] = {sum[c].x / cnt[c], sum[c].y / cnt[c]};
    if (!changed) break;
  }

  std::vector<int> remap(k, -1);
  int next = 0;
  for (int p = 0; p < n; ++p)
    if (remap[label[p]] < 0) remap[label[p]] = next++;
  for (auto& l : label) l = remap[l];
  return label;
}

}  // namespace detail

/// PPP base stations in a disc, UEs uniform in an annulus around a parent BS,
/// k-means clusters over BS positions. Deterministic in cfg.seed.
inline Topology generate_topology(const NetworkConfig& cfg) {
  cfg.validate();
  const double mean_bs = cfg.bs_density * M_PI * cfg.area_radius_km * cfg.area_radius_km;
  auto count_rng = make_stream(cfg.seed, Stream::kBsCount);
  std::poisson_distribution<int> poisson(mean_bs);
  int num_bs = -1;
  for (int attempt = 0; attempt <= 100; ++attempt) {
    int draw = poisson(count_rng);
    if (draw >= cfg.num_clusters) {
      num_bs = draw;
      break;
    }
  }
  if (num_bs < 0)
    throw Error("generate_topology: fewer BSs than clusters after 100 redraws (E[#BS] = " +
                std::to_string(mean_bs) + ", M = " + std::to_string(cfg.num_clusters) + ")");

  Topology topo;
  topo.num_clusters = cfg.num_clusters;
  for (int j = 0; j < num_bs; ++j) {
    auto rng = make_stream(cfg.seed, Stream::kBsPosition, {static_cast<std::uint64_t>(j)});
    topo.bs_positions.push_back(detail::uniform_in_annulus(rng, {0.0, 0.0}, 0.0, cfg.area_radius_km));
  }

  const int num_ue = cfg.num_ues > 0 ? cfg.num_ues : cfg.ue_per_bs * num_bs;
  for (int k = 0; k < num_ue; ++k) {
    int parent;
    if (cfg.num_ues > 0) {
      auto rng = make_stream(cfg.seed, Stream::kUeParent, {static_cast<std::uint64_t>(k)});
      parent = std::uniform_int_distribution<int>(0, num_bs - 1)(rng);
    } else {
      parent = k / cfg.ue_per_bs;
    }
    auto rng = make_stream(cfg.seed, Stream::kUePosition, {static_cast<std::uint64_t>(k)});
    topo.parent_of_ue.push_back(parent);
    topo.ue_positions.push_back(detail::uniform_in_annulus(rng, topo.bs_positions[parent],
                                                           cfg.exclusion_radius_km, cfg.cell_radius_km()));
  }

  if (cfg.num_clusters == 1) {
    topo.cluster_of_bs.assign(num_bs, 0);
  } else {
    auto rng = make_stream(cfg.seed, Stream::kClustering);
    topo.cluster_of_bs = detail::kmeans_labels(topo.bs_positions, cfg.num_clusters, rng);
  }
  // UEs join the cluster of their nearest BS (lowest index on ties).
  for (int k = 0; k < num_ue; ++k) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int j = 0; j < num_bs; ++j) {
      double d = topo.distance_km(k, j);
      if (d < bd) bd = d, best = j;
    }
    topo.cluster_of_ue.push_back(topo.cluster_of_bs[best]);
  }
  return topo;
}

/// beta(k, j) = 10^(-PL(d)/10) * 10^(psi/10), psi ~ N(0, sigma_sh^2) dB.
/// Distances are floored at 1 m so a UE dropped onto a foreign BS stays finite.
inline RMatrix sample_large_scale(const Topology& topo, const NetworkConfig& cfg) {
  RMatrix beta(topo.num_ue(), topo.num_bs());
  for (int k = 0; k < topo.num_ue(); ++k) {
    for (int j = 0; j < topo.num_bs(); ++j) {
      const double d = std::max(topo.distance_km(k, j), 1e-3);
      double shadow_db = 0.0;
      if (cfg.shadowing_sigma_db > 0.0) {
        auto rng = make_stream(cfg.seed, Stream::kShadowing,
                               {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(j)});
        shadow_db = std::normal_distribution<double>(0.0, cfg.shadowing_sigma_db)(rng);
      }
      beta(k, j) = db_to_linear(-pathloss_db(d, cfg.pathloss_intercept_db, cfg.pathloss_slope_db) + shadow_db);
    }
  }
  return beta;
}

/// Draws one nr x nt matrix of i.i.d. CN(0,1) entries.
inline CMatrix draw_cn_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  CMatrix h(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) {
      const double re = n(rng);
      const double im = n(rng);
      h(r, c) = cd(re, im);
    }
  return h;
}

/// Small-scale fading for one coherence block, indexed [k * B + j].
/// `stream` separates delivery realizations from placement sample sets.
inline std::vector<CMatrix> sample_small_scale(const Topology& topo, const NetworkConfig& cfg,
                                               std::uint64_t block, Stream stream = Stream::kSmallScale) {
  std::vector<CMatrix> h;
  h.reserve(static_cast<std::size_t>(topo.num_ue()) * topo.num_bs());
  for (int k = 0; k < topo.num_ue(); ++k)
    for (int j = 0; j < topo.num_bs(); ++j) {
      auto rng = make_stream(cfg.seed, stream,
                             {block, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(j)});
      h.push_back(draw_cn_matrix(rng, cfg.nr, cfg.nt));
    }
  return h;
}

struct ChannelRealization {
  RMatrix beta;                 // K x B linear power gains
  std::vector<CMatrix> small;   // [k * B + j], nr x nt
  double noise_power = 1.0;     // watts
  int num_bs = 0;

  const CMatrix& h(int k, int j) const { return small[static_cast<std::size_t>(k) * num_bs + j]; }
  int num_ue() const { return static_cast<int>(beta.rows()); }
};

inline ChannelRealization make_realization(const Topology& topo, const NetworkConfig& cfg,
                                           const RMatrix& beta, std::uint64_t realization,
                                           Stream stream = Stream::kSmallScale) {
  ChannelRealization ch;
  ch.beta = beta;
  ch.num_bs = topo.num_bs();
  ch.noise_power = noise_power(cfg);
  ch.small = sample_small_scale(topo, cfg, realization / static_cast<std::uint64_t>(cfg.block_length), stream);
  return ch;
}

/// Rows (id, x_km, y_km, cluster); BSs first with kind "bs", then UEs.
inline void write_topology_csv(std::ostream& os, const Topology& topo) {
  CsvWriter w(os);
  w.header({"kind", "id", "x_km", "y_km", "cluster"});
  for (int j = 0; j < topo.num_bs(); ++j)
    w.row("bs", j, topo.bs_positions[j].x, topo.bs_positions[j].y, topo.cluster_of_bs[j]);
  for (int k = 0; k < topo.num_ue(); ++k)
    w.row("ue", k, topo.ue_positions[k].x, topo.ue_positions[k].y, topo.cluster_of_ue[k]);
}

}  // namespace mecopt
