#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <vector>

#include "mecopt/core_model.hpp"
#include "mecopt/io.hpp"
#include "mecopt/model.hpp"
#include "mecopt/rng.hpp"

namespace mecopt {

/// C_{i_k} = C_i diag(D_i(:, k)).
inline RMatrix user_cache_view(const RMatrix& c, const RMatrix& d, int k) {
  require(c.cols() == d.rows() && k >= 0 && k < d.cols(), "user_cache_view: dimension mismatch");
  return c * d.col(k).asDiagonal();
}

/// True iff some serving BS of UE k caches file n.
inline bool is_downloadable(const RMatrix& c, const RMatrix& d, int k, int n) {
  require(c.cols() == d.rows() && k >= 0 && k < d.cols() && n >= 0 && n < c.rows(),
          "is_downloadable: index out of range");
  for (int j = 0; j < d.rows(); ++j)
    if (d(j, k) > 0.5 && c(n, j) > 0.5) return true;
  return false;
}

/// sum_i Tr(pbar_i C_i D_i).
inline double total_backhaul_savings(const Preferences& prefs, const CachePlacement& placement,
                                     const AssociationMatrix& assoc) {
  double total = 0.0;
  for (int i = 0; i < prefs.num_clusters(); ++i) {
    require(prefs.pbar[i].cols() == placement.c[i].rows() && placement.c[i].cols() == assoc.d[i].rows() &&
                assoc.d[i].cols() == prefs.pbar[i].rows(),
            "total_backhaul_savings: dimension mismatch");
    total += (prefs.pbar[i] * placement.c[i] * assoc.d[i]).trace();
  }
  return total;
}

/// mu_file(j, n) = sum_k pbar(k, n) d(j, k); |Q_i| x F.
inline RMatrix file_savings(const RMatrix& pbar, const RMatrix& d) { return d * pbar; }

/// Empty placement with uniform per-BS capacity.
inline CachePlacement empty_placement(const ClusterIndex& clusters, int num_files, std::uint64_t capacity_bits) {
  CachePlacement p;
  for (int i = 0; i < clusters.num_clusters(); ++i) {
    p.c.push_back(RMatrix::Zero(num_files, clusters.bs[i].size()));
    p.capacity.emplace_back(clusters.bs[i].size(), capacity_bits);
  }
  return p;
}

/// Sum of mu over the selected files, accumulated in file-index order.
inline double selection_value(const Eigen::Ref<const RVector>& mu, const std::vector<int>& files) {
  std::vector<int> sorted = files;
  std::sort(sorted.begin(), sorted.end());
  double v = 0.0;
  for (int n : sorted) v += mu(n);
  return v;
}

/// Top floor(s / l) files by mu, ties to the lower file index.
inline std::vector<int> greedy_select(const Eigen::Ref<const RVector>& mu, std::uint64_t capacity, std::uint64_t size) {
  const int f = static_cast<int>(mu.size());
  std::vector<int> order(f);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mu(a) > mu(b); });
  const auto take = static_cast<int>(std::min<std::uint64_t>(capacity / size, static_cast<std::uint64_t>(f)));
  std::vector<int> out(order.begin(), order.begin() + take);
  std::sort(out.begin(), out.end());
  return out;
}

/// Exact 0/1 knapsack by DP over integer capacity. Among optimal selections
/// the one that includes lower file indices earliest is returned.
inline std::vector<int> knapsack_select(const Eigen::Ref<const RVector>& mu, const std::vector<std::uint64_t>& sizes,
                                        std::uint64_t capacity, std::uint64_t max_cells = std::uint64_t{1} << 24) {
  const int f = static_cast<int>(mu.size());
  require(static_cast<int>(sizes.size()) == f, "knapsack_select: size vector mismatch");
  std::uint64_t g = capacity;
  for (auto s : sizes) {
    require(s > 0, "knapsack_select: file sizes must be positive");
    g = std::gcd(g, s);
  }
  if (g == 0) g = 1;
  std::uint64_t total = 0;
  for (auto s : sizes) total += s / g;
  const std::uint64_t cap = std::min(capacity / g, total);
  if ((cap + 1) * static_cast<std::uint64_t>(f + 1) > max_cells)
    throw Error("knapsack_select: capacity granularity overflow (" + std::to_string(cap + 1) + " x " +
                std::to_string(f + 1) + " cells exceeds limit " + std::to_string(max_cells) + ")");

  const std::size_t w = cap + 1;
  // best[n * w + c]: optimum over files n..F-1 with capacity c.
  std::vector<double> best((f + 1) * w, 0.0);
  for (int n = f - 1; n >= 0; --n) {
    const std::uint64_t sz = sizes[n] / g;
    for (std::uint64_t c = 0; c <= cap; ++c) {
      double v = best[(n + 1) * w + c];
      if (sz <= c) v = std::max(v, mu(n) + best[(n + 1) * w + c - sz]);
      best[n * w + c] = v;
    }
  }
  std::vector<int> out;
  std::uint64_t c = cap;
  for (int n = 0; n < f; ++n) {
    const std::uint64_t sz = sizes[n] / g;
    if (sz <= c && mu(n) + best[(n + 1) * w + c - sz] >= best[n * w + c] - 1e-12) {
      out.push_back(n);
      c -= sz;
    }
  }
  return out;
}

inline void set_column(RMatrix& c, int col, const std::vector<int>& files) {
  c.col(col).setZero();
  for (int n : files) c(n, col) = 1.0;
}

/// Greedy placement per BS from mu_file (|Q_i| x F per cluster). Requires equal sizes.
inline CachePlacement greedy_placement(const std::vector<RMatrix>& mu_file, const Catalog& catalog,
                                       const std::vector<std::vector<std::uint64_t>>& capacity) {
  if (!catalog.equal_sizes()) throw Error("greedy_placement: unequal file sizes, use knapsack_placement");
  CachePlacement p;
  p.capacity = capacity;
  for (std::size_t i = 0; i < mu_file.size(); ++i) {
    RMatrix c = RMatrix::Zero(catalog.num_files(), mu_file[i].rows());
    for (int j = 0; j < mu_file[i].rows(); ++j)
      set_column(c, j, greedy_select(mu_file[i].row(j).transpose(), capacity[i][j], catalog.file_sizes.front()));
    p.c.push_back(c);
  }
  return p;
}

inline CachePlacement knapsack_placement(const std::vector<RMatrix>& mu_file, const Catalog& catalog,
                                         const std::vector<std::vector<std::uint64_t>>& capacity) {
  CachePlacement p;
  p.capacity = capacity;
  for (std::size_t i = 0; i < mu_file.size(); ++i) {
    RMatrix c = RMatrix::Zero(catalog.num_files(), mu_file[i].rows());
    for (int j = 0; j < mu_file[i].rows(); ++j)
      set_column(c, j, knapsack_select(mu_file[i].row(j).transpose(), catalog.file_sizes, capacity[i][j]));
    p.c.push_back(c);
  }
  return p;
}

/// Baseline: each BS caches files in a random order while they fit.
inline CachePlacement random_placement(const ClusterIndex& clusters, const Catalog& catalog,
                                       const std::vector<std::vector<std::uint64_t>>& capacity, std::uint64_t seed) {
  CachePlacement p;
  p.capacity = capacity;
  for (int i = 0; i < clusters.num_clusters(); ++i) {
    RMatrix c = RMatrix::Zero(catalog.num_files(), clusters.bs[i].size());
    for (std::size_t j = 0; j < clusters.bs[i].size(); ++j) {
      auto rng = make_stream(seed, Stream::kRandomPlacement, {static_cast<std::uint64_t>(clusters.bs[i][j])});
      std::vector<int> order(catalog.num_files());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::uint64_t used = 0;
      for (int n : order)
        if (used + catalog.file_sizes[n] <= capacity[i][j]) {
          c(n, static_cast<int>(j)) = 1.0;
          used += catalog.file_sizes[n];
        }
    }
    p.c.push_back(c);
  }
  return p;
}

/// Capacity check sum_n C(n,j) l_n <= s_j, plus entries in {0,1} (or [0,1] if relaxed).
inline bool is_feasible(const CachePlacement& p, const Catalog& catalog, double tol = 0.0) {
  for (int i = 0; i < p.num_clusters(); ++i) {
    const RMatrix& c = p.c[i];
    if (c.rows() != catalog.num_files()) return false;
    for (int j = 0; j < c.cols(); ++j) {
      double used = 0.0;
      for (int n = 0; n < c.rows(); ++n) {
        const double x = c(n, j);
        if (p.relaxed ? (x < -tol || x > 1.0 + tol) : (x != 0.0 && x != 1.0)) return false;
        used += x * static_cast<double>(catalog.file_sizes[n]);
      }
      if (used > static_cast<double>(p.capacity[i][j]) + tol) return false;
    }
  }
  return true;
}

/// Rows (cluster, bs_id, file_id, bit) with global BS ids.
inline void write_placement_csv(std::ostream& os, const CachePlacement& p, const ClusterIndex& clusters) {
  CsvWriter w(os);
  w.header({"cluster", "bs_id", "file_id", "bit"});
  for (int i = 0; i < p.num_clusters(); ++i)
    for (int j = 0; j < p.c[i].cols(); ++j)
      for (int n = 0; n < p.c[i].rows(); ++n)
        w.row(i, clusters.bs[i][j], n, p.caches(i, n, j) ? 1 : 0);
}

}  // namespace mecopt
