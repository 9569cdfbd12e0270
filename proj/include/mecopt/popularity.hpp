#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "mecopt/core_model.hpp"
#include "mecopt/io.hpp"
#include "mecopt/model.hpp"
#include "mecopt/rng.hpp"

namespace mecopt {

/// p(r) = r^-gamma / sum_m m^-gamma for ranks r = 1..F (returned 0-based).
inline RVector zipf_pmf(int num_files, double gamma) {
  require(num_files >= 1, "zipf_pmf: F must be >= 1");
  require(gamma >= 0.0, "zipf_pmf: gamma must be >= 0");
  RVector p(num_files);
  for (int r = 0; r < num_files; ++r) p(r) = std::pow(static_cast<double>(r + 1), -gamma);
  return p / p.sum();
}

/// Per-user Zipf preferences over user-specific rank permutations.
///
/// Each user ranks files by score_n = (1 - h) * n / F + h * U_n with U_n
/// uniform; h = 0 gives the shared identity ranking, h = 1 an independent
/// uniform permutation per user. Request rates default to 1.
inline Preferences sample_preferences(const ClusterIndex& clusters, int num_files, double gamma,
                                      double heterogeneity, std::uint64_t seed) {
  require(heterogeneity >= 0.0 && heterogeneity <= 1.0, "sample_preferences: heterogeneity must lie in [0,1]");
  const RVector base = zipf_pmf(num_files, gamma);
  Preferences prefs;
  for (int i = 0; i < clusters.num_clusters(); ++i) {
    const auto& ues = clusters.ue[i];
    RMatrix pbar(ues.size(), num_files);
    for (std::size_t k = 0; k < ues.size(); ++k) {
      auto rng = make_stream(seed, Stream::kPreferences, {static_cast<std::uint64_t>(ues[k])});
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> score(num_files);
      for (int n = 0; n < num_files; ++n)
        score[n] = (1.0 - heterogeneity) * n / num_files + heterogeneity * u(rng);
      std::vector<int> order(num_files);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return score[a] < score[b]; });
      for (int r = 0; r < num_files; ++r) pbar(static_cast<int>(k), order[r]) = base(r);
      // Renormalize: the permuted row is a rearrangement, so this only removes rounding.
      pbar.row(static_cast<int>(k)) /= pbar.row(static_cast<int>(k)).sum();
    }
    prefs.pbar.push_back(pbar);
    prefs.q.push_back(RVector::Ones(ues.size()));
  }
  return prefs;
}

/// Per-BS popularity: p_{j,n} = sum_k d_{j,k} q_k pbar_{k,n} / sum_k d_{j,k} q_k.
/// BSs without associated users get an all-zero row.
inline std::vector<RMatrix> bs_popularity(const Preferences& prefs, const AssociationMatrix& assoc) {
  require(prefs.num_clusters() == assoc.num_clusters(), "bs_popularity: cluster count mismatch");
  std::vector<RMatrix> out;
  for (int i = 0; i < prefs.num_clusters(); ++i) {
    const RMatrix& d = assoc.d[i];
    const RMatrix& pbar = prefs.pbar[i];
    require(d.cols() == pbar.rows() && prefs.q[i].size() == pbar.rows(), "bs_popularity: dimension mismatch");
    const RMatrix weighted = d * prefs.q[i].asDiagonal();  // |Q| x |I|
    RMatrix p = weighted * pbar;                           // |Q| x F
    const RVector norm = weighted.rowwise().sum();
    for (int j = 0; j < p.rows(); ++j) {
      if (norm(j) > 0.0) p.row(j) /= norm(j);
      else p.row(j).setZero();
    }
    out.push_back(p);
  }
  return out;
}

/// Pi_i: one requested file per UE (local index -> file index), per cluster.
using RequestProfile = std::vector<std::vector<int>>;

inline int sample_discrete(const Eigen::Ref<const RVector>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng) * probs.sum();
  const int n = static_cast<int>(probs.size());
  for (int f = 0; f < n; ++f) {
    r -= probs(f);
    if (r < 0.0) return f;
  }
  // Rounding left r >= 0: take the last file with positive mass.
  for (int f = n - 1; f >= 0; --f)
    if (probs(f) > 0.0) return f;
  return n - 1;
}

/// Draws a request per UE from its preference row. `draw` indexes independent
/// request epochs; the same (seed, draw) always yields the same profile.
inline RequestProfile sample_request_profile(const Preferences& prefs, const ClusterIndex& clusters,
                                             std::uint64_t seed, std::uint64_t draw) {
  RequestProfile profile(prefs.num_clusters());
  for (int i = 0; i < prefs.num_clusters(); ++i) {
    const RMatrix& pbar = prefs.pbar[i];
    profile[i].resize(pbar.rows());
    for (int k = 0; k < pbar.rows(); ++k) {
      auto rng = make_stream(seed, Stream::kRequests, {draw, static_cast<std::uint64_t>(clusters.ue[i][k])});
      RVector row = pbar.row(k).transpose();
      profile[i][k] = sample_discrete(row, rng);
    }
  }
  return profile;
}

/// Rows (user_id, file_id, prob) with global user ids and 0-based file ids.
inline void write_preferences_csv(std::ostream& os, const Preferences& prefs, const ClusterIndex& clusters) {
  CsvWriter w(os);
  w.header({"user_id", "file_id", "prob"});
  for (int i = 0; i < prefs.num_clusters(); ++i)
    for (int k = 0; k < prefs.pbar[i].rows(); ++k)
      for (int n = 0; n < prefs.pbar[i].cols(); ++n) w.row(clusters.ue[i][k], n, prefs.pbar[i](k, n));
}

/// Inverse of write_preferences_csv. Missing (user, file) pairs read as 0;
/// each row must sum to 1 within 1e-9. Request rates are set to 1.
inline Preferences read_preferences_csv(std::istream& in, const ClusterIndex& clusters, int num_files) {
  const CsvTable t = parse_csv(in);
  const int cu = t.column("user_id"), cf = t.column("file_id"), cp = t.column("prob");
  Preferences prefs;
  for (int i = 0; i < clusters.num_clusters(); ++i) {
    prefs.pbar.push_back(RMatrix::Zero(clusters.ue[i].size(), num_files));
    prefs.q.push_back(RVector::Ones(clusters.ue[i].size()));
  }
  std::vector<int> cluster_of(clusters.local_ue.size(), -1);
  for (int i = 0; i < clusters.num_clusters(); ++i)
    for (int k : clusters.ue[i]) cluster_of[k] = i;
  for (const auto& r : t.rows) {
    const long user = std::stol(r[cu]);
    const long file = std::stol(r[cf]);
    const double p = std::stod(r[cp]);
    require(user >= 0 && user < static_cast<long>(cluster_of.size()), "preferences csv: unknown user_id " + r[cu]);
    require(file >= 0 && file < num_files, "preferences csv: file_id out of range " + r[cf]);
    require(p >= 0.0 && p <= 1.0, "preferences csv: prob outside [0,1]");
    prefs.pbar[cluster_of[user]](clusters.local_ue[user], file) = p;
  }
  for (int i = 0; i < prefs.num_clusters(); ++i)
    for (int k = 0; k < prefs.pbar[i].rows(); ++k)
      require(std::abs(prefs.pbar[i].row(k).sum() - 1.0) <= 1e-9,
              "preferences csv: row of user " + std::to_string(clusters.ue[i][k]) + " does not sum to 1");
  return prefs;
}

}  // namespace mecopt
