#pragma once

// Per-cluster matrices shared by the association, caching and delivery
// modules. Index conventions (local, per cluster i):
//   pbar[i] : |I_i| x F   user file-request probabilities
//   d[i]    : |Q_i| x |I_i| association indicators (0/1)
//   c[i]    : F x |Q_i|   cache placement (0/1, or [0,1] when relaxed)

#include <cstdint>
#include <set>
#include <vector>

#include "mecopt/types.hpp"

namespace mecopt {

struct Catalog {
  std::vector<std::uint64_t> file_sizes;  // bits

  int num_files() const { return static_cast<int>(file_sizes.size()); }
  bool equal_sizes() const {
    for (auto s : file_sizes)
      if (s != file_sizes.front()) return false;
    return true;
  }

  static Catalog uniform(int num_files, std::uint64_t size_bits) {
    require(num_files >= 1, "Catalog: need at least one file");
    require(size_bits >= 1, "Catalog: file sizes must be positive");
    return Catalog{std::vector<std::uint64_t>(num_files, size_bits)};
  }
};

struct Preferences {
  std::vector<RMatrix> pbar;  // per cluster, |I_i| x F
  std::vector<RVector> q;     // per cluster, request rates, length |I_i|

  int num_clusters() const { return static_cast<int>(pbar.size()); }
  int num_files() const {
    for (const auto& p : pbar)
      if (p.cols() > 0) return static_cast<int>(p.cols());
    return 0;
  }
};

struct AssociationMatrix {
  std::vector<RMatrix> d;  // per cluster, |Q_i| x |I_i|, entries 0/1

  int num_clusters() const { return static_cast<int>(d.size()); }
  bool linked(int cluster, int bs, int ue) const { return d[cluster](bs, ue) > 0.5; }
};

struct CachePlacement {
  std::vector<RMatrix> c;                           // per cluster, F x |Q_i|
  std::vector<std::vector<std::uint64_t>> capacity;  // per cluster, per BS, bits
  bool relaxed = false;

  int num_clusters() const { return static_cast<int>(c.size()); }
  bool caches(int cluster, int file, int bs) const { return c[cluster](file, bs) > 0.5; }
};

/// B_{i_k} and K_{i_j} for one cluster, both in local indices.
struct ServingSets {
  std::vector<std::set<int>> bs_of_ue;  // B_{i_k}
  std::vector<std::set<int>> ue_of_bs;  // K_{i_j}

  static ServingSets from_matrix(const RMatrix& d) {
    ServingSets s;
    s.bs_of_ue.resize(d.cols());
    s.ue_of_bs.resize(d.rows());
    for (int j = 0; j < d.rows(); ++j)
      for (int k = 0; k < d.cols(); ++k)
        if (d(j, k) > 0.5) {
          s.bs_of_ue[k].insert(j);
          s.ue_of_bs[j].insert(k);
        }
    return s;
  }

  /// Rebuilds D from the per-UE sets alone.
  RMatrix to_matrix_from_ue_sets(int num_bs) const {
    RMatrix d = RMatrix::Zero(num_bs, static_cast<int>(bs_of_ue.size()));
    for (std::size_t k = 0; k < bs_of_ue.size(); ++k)
      for (int j : bs_of_ue[k]) d(j, static_cast<int>(k)) = 1.0;
    return d;
  }

  /// Rebuilds D from the per-BS sets alone.
  RMatrix to_matrix_from_bs_sets(int num_ue) const {
    RMatrix d = RMatrix::Zero(static_cast<int>(ue_of_bs.size()), num_ue);
    for (std::size_t j = 0; j < ue_of_bs.size(); ++j)
      for (int k : ue_of_bs[j]) d(static_cast<int>(j), k) = 1.0;
    return d;
  }
};

}  // namespace mecopt
