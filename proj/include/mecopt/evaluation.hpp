#pragma once

// Mixed-timescale orchestration: one placement per run from channel
// statistics, then per-realization association, requests and beamforming.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mecopt/association.hpp"
#include "mecopt/beamforming.hpp"
#include "mecopt/caching.hpp"
#include "mecopt/config.hpp"
#include "mecopt/core_model.hpp"
#include "mecopt/io.hpp"
#include "mecopt/model.hpp"
#include "mecopt/popularity.hpp"
#include "mecopt/sca.hpp"
#include "mecopt/wmmse.hpp"

namespace mecopt {

inline double weighted_objective(double throughput, double savings, double lambda) {
  return lambda * throughput + (1.0 - lambda) * savings;
}

struct CostWeights {
  double backhaul = 1.0;
  double power = 1.0;
};

/// w1 * fetched + w2 * power, divided by the same expression with every
/// served request fetched from the cloud. `fetched` and `requested` count bits
/// over all (BS, served UE) pairs; `power` is the total transmit power in
/// units of P^max.
inline double network_cost(double fetched_bits, double requested_bits, double power, const CostWeights& w) {
  require(w.backhaul >= 0.0 && w.power >= 0.0, "network_cost: weights must be >= 0");
  const double baseline = w.backhaul * requested_bits + w.power * power;
  if (baseline <= 0.0) return 1.0;
  return (w.backhaul * fetched_bits + w.power * power) / baseline;
}

/// Transmit power giving `snr_db` at the cell edge 1/sqrt(pi * density)
/// without shadowing, for nt = nr = 1.
inline double tx_power_for_edge_snr(const NetworkConfig& net, double snr_db) {
  const double edge = net.cell_radius_km();
  return snr_db + watt_to_dbm(noise_power(net)) + pathloss_db(edge, net.pathloss_intercept_db, net.pathloss_slope_db);
}

/// Network settings with the SNR knob applied.
inline NetworkConfig effective_network(const ExperimentConfig& cfg) {
  NetworkConfig net = cfg.network;
  if (cfg.snr_db) net.tx_power_dbm = tx_power_for_edge_snr(net, *cfg.snr_db);
  return net;
}

struct RealizationMetrics {
  int index = 0;
  double throughput = 0.0;
  double savings = 0.0;          // sum_i Tr(pbar_i C_i D_i) under the realized association
  double objective = 0.0;
  double backhaul_load = 0.0;    // rate of served requests fetched from the cloud
  double power = 0.0;            // total transmit power / P^max
  double cost = 1.0;
  int links = 0;
  int cache_hits = 0;
  int served_pairs = 0;
  int outer_iterations = 0;
  bool converged = false;
  bool admm_converged = true;
  int weight_clamps = 0;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;   // sample standard deviation, 0 for a single value
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct RunResult {
  NetworkConfig network;          // with the SNR knob applied
  Topology topology;
  ClusterIndex clusters;
  Preferences preferences;
  AssociationMatrix long_term;    // association used to plan the placement
  CachePlacement placement;
  double planned_savings = 0.0;   // savings under the long-term association
  ScaResult sca;                  // empty unless caching = sca
  std::vector<RealizationMetrics> realizations;
  std::vector<AssociationMatrix> associations;
  std::vector<DeliverySolution> deliveries;

  std::vector<double> column(double RealizationMetrics::*field) const {
    std::vector<double> out;
    for (const auto& r : realizations) out.push_back(r.*field);
    return out;
  }
  int max_outer_iterations() const {
    int m = 0;
    for (const auto& r : realizations) m = std::max(m, r.outer_iterations);
    return m;
  }
  double mean_outer_iterations() const {
    double s = 0.0;
    for (const auto& r : realizations) s += r.outer_iterations;
    return realizations.empty() ? 0.0 : s / static_cast<double>(realizations.size());
  }
  int converged_count() const {
    int c = 0;
    for (const auto& r : realizations) c += r.converged;
    return c;
  }
};

/// Placement from channel statistics for the configured caching mode.
inline CachePlacement plan_placement(const ExperimentConfig& cfg, const NetworkConfig& net, const Topology& topo,
                                     const ClusterIndex& clusters, const RMatrix& beta, const Preferences& prefs,
                                     const AssociationMatrix& long_term, ScaResult* sca) {
  const Catalog catalog = Catalog::uniform(cfg.num_files, cfg.file_size_bits);
  const CachePlacement empty = empty_placement(clusters, cfg.num_files, cfg.cache_size_bits);
  std::vector<RMatrix> mu;
  for (int i = 0; i < clusters.num_clusters(); ++i) mu.push_back(file_savings(prefs.pbar[i], long_term.d[i]));
  switch (cfg.caching) {
    case CachingMode::kGreedy: return greedy_placement(mu, catalog, empty.capacity);
    case CachingMode::kKnapsack: return knapsack_placement(mu, catalog, empty.capacity);
    case CachingMode::kRandom: return random_placement(clusters, catalog, empty.capacity, net.seed);
    case CachingMode::kSca: break;
  }
  std::vector<std::vector<CMatrix>> samples;
  for (int s = 0; s < cfg.sca_samples; ++s)
    samples.push_back(sample_small_scale(topo, net, static_cast<std::uint64_t>(s), Stream::kScaSamples));
  const ScaModel model =
      make_sca_model(clusters, beta, noise_power(net), samples, long_term, prefs, net.tx_power_watt(), cfg.lambda);
  ScaOptions opt;
  opt.tau = cfg.sca_tau;
  opt.gamma0 = cfg.sca_gamma0;
  opt.tol = cfg.sca_tol;
  opt.max_outer = cfg.sca_max_outer;
  *sca = sca_solve(model, greedy_placement(mu, catalog, empty.capacity), catalog, opt);
  return sca->placement;
}

inline AssociationMatrix base_association(const ExperimentConfig& cfg, const Topology& topo,
                                          const ClusterIndex& clusters, const std::vector<RMatrix>& rates) {
  if (cfg.association == AssociationMode::kNearest)
    return nearest_association(topo, clusters, rates, cfg.network.nt);
  return threshold_association(rates, cfg.rate_threshold, cfg.network.nt);
}

using PreferenceSource = std::function<Preferences(const ClusterIndex&)>;

/// Runs one placement epoch and `cfg.realizations` delivery realizations.
/// Preferences are sampled unless `source` is given. Solver failures are
/// rethrown with the realization index.
inline RunResult mixed_timescale_solve(const ExperimentConfig& cfg, const PreferenceSource& source = {}) {
  cfg.validate();
  RunResult res;
  res.network = effective_network(cfg);
  const NetworkConfig& net = res.network;
  const double p_max = net.tx_power_watt();
  const double noise = noise_power(net);
  res.topology = generate_topology(net);
  res.clusters = ClusterIndex::of(res.topology);
  const RMatrix beta = sample_large_scale(res.topology, net);
  res.preferences = source ? source(res.clusters)
                           : sample_preferences(res.clusters, cfg.num_files, cfg.zipf_gamma, cfg.heterogeneity, net.seed);
  require(res.preferences.num_clusters() == res.clusters.num_clusters() &&
              res.preferences.num_files() == cfg.num_files,
          "mixed_timescale_solve: preferences do not match the topology");

  const auto expected = expected_link_rate_matrix(beta, noise, res.clusters, p_max, net.nt, net.nr);
  res.long_term = base_association(cfg, res.topology, res.clusters, expected);
  res.placement =
      plan_placement(cfg, net, res.topology, res.clusters, beta, res.preferences, res.long_term, &res.sca);
  res.planned_savings = total_backhaul_savings(res.preferences, res.placement, res.long_term);

  const CostWeights weights{cfg.cost_weight_backhaul, cfg.cost_weight_power};
  for (int r = 0; r < cfg.realizations; ++r) {
    try {
      const ChannelRealization ch = make_realization(res.topology, net, beta, static_cast<std::uint64_t>(r));
      const auto rates = link_rate_matrix(ch, res.clusters, p_max);
      AssociationMatrix assoc = base_association(cfg, res.topology, res.clusters, rates);
      if (cfg.association == AssociationMode::kContentAware)
        assoc = content_aware_association(res.preferences, res.placement, assoc, rates, net.nt);
      if (cfg.backhaul_repair) {
        // Per-UE rate estimate: best proxy rate over its serving BSs.
        std::vector<RVector> ue_rate, cap;
        for (int i = 0; i < res.clusters.num_clusters(); ++i) {
          RVector u = RVector::Zero(assoc.d[i].cols());
          for (int k = 0; k < u.size(); ++k)
            for (int j = 0; j < assoc.d[i].rows(); ++j)
              if (assoc.linked(i, j, k)) u(k) = std::max(u(k), rates[i](j, k));
          ue_rate.push_back(u);
          cap.push_back(RVector::Constant(assoc.d[i].rows(), cfg.backhaul_capacity));
        }
        assoc = repair_backhaul(assoc, res.preferences, res.placement, ue_rate, cap);
      }
      const RequestProfile requests =
          sample_request_profile(res.preferences, res.clusters, net.seed, static_cast<std::uint64_t>(r));

      DeliveryOptions dopt;
      dopt.p_max = p_max;
      dopt.backhaul_capacity = cfg.backhaul_capacity;
      dopt.serve_misses_via_backhaul = cfg.serve_misses_via_backhaul;
      const DeliveryProblem prob =
          build_delivery_problem(ch, res.clusters, assoc, res.placement, requests, net.nt, net.nr, dopt);
      WmmseOptions wopt;
      wopt.tol = cfg.wmmse_tol;
      wopt.max_outer = cfg.wmmse_max_outer;
      wopt.admm.rho = cfg.admm_rho;
      wopt.admm.tol = cfg.admm_tol;
      wopt.admm.max_iter = cfg.admm_max_iter;
      wopt.seed = net.seed;
      wopt.draw = static_cast<std::uint64_t>(r);
      DeliverySolution sol = wmmse_solve(prob, wopt);

      RealizationMetrics m;
      m.index = r;
      m.throughput = sol.throughput;
      m.savings = total_backhaul_savings(res.preferences, res.placement, assoc);
      m.objective = weighted_objective(m.throughput, m.savings, cfg.lambda);
      m.links = prob.num_links();
      double fetched_bits = 0.0, requested_bits = 0.0;
      for (int j = 0; j < prob.num_bs; ++j) {
        const int i = res.topology.cluster_of_bs[j];
        const int jl = res.clusters.local_bs[j];
        for (int k : prob.served[j]) {
          const int n = requests[i][res.clusters.local_ue[k]];
          ++m.served_pairs;
          requested_bits += static_cast<double>(cfg.file_size_bits);
          if (res.placement.caches(i, n, jl)) {
            ++m.cache_hits;
          } else {
            fetched_bits += static_cast<double>(cfg.file_size_bits);
            m.backhaul_load += sol.rates(k);
          }
        }
      }
      m.power = sol.power_use.sum() / p_max;
      m.cost = network_cost(fetched_bits, requested_bits, m.power, weights);
      m.outer_iterations = sol.outer_iterations;
      m.converged = sol.converged;
      m.admm_converged = sol.admm_all_converged;
      m.weight_clamps = sol.weight_clamps;
      res.realizations.push_back(m);
      res.associations.push_back(std::move(assoc));
      res.deliveries.push_back(std::move(sol));
    } catch (const std::exception& e) {
      throw Error("realization " + std::to_string(r) + ": " + e.what());
    }
  }
  return res;
}

/// Rows (realization, throughput, savings, objective, backhaul_load, power,
/// cost, links, cache_hits, served_pairs, outer_iterations, converged).
inline void write_metrics_csv(std::ostream& os, const RunResult& res) {
  CsvWriter w(os);
  w.header({"realization", "throughput", "savings", "objective", "backhaul_load", "power", "cost", "links",
            "cache_hits", "served_pairs", "outer_iterations", "converged"});
  for (const auto& m : res.realizations)
    w.row(m.index, m.throughput, m.savings, m.objective, m.backhaul_load, m.power, m.cost, m.links, m.cache_hits,
          m.served_pairs, m.outer_iterations, m.converged ? 1 : 0);
}

/// Rows (realization, bs_id, ue_id, bit).
inline void write_realized_associations_csv(std::ostream& os, const RunResult& res) {
  CsvWriter w(os);
  w.header({"realization", "bs_id", "ue_id", "bit"});
  for (std::size_t r = 0; r < res.associations.size(); ++r) {
    const auto& a = res.associations[r];
    for (int i = 0; i < a.num_clusters(); ++i)
      for (int j = 0; j < a.d[i].rows(); ++j)
        for (int k = 0; k < a.d[i].cols(); ++k)
          w.row(r, res.clusters.bs[i][j], res.clusters.ue[i][k], a.linked(i, j, k) ? 1 : 0);
  }
}

/// Rows (realization, outer_iter, surrogate, throughput, max_residual).
inline void write_wmmse_traces_csv(std::ostream& os, const RunResult& res) {
  CsvWriter w(os);
  w.header({"realization", "outer_iter", "surrogate", "throughput", "max_residual"});
  for (std::size_t r = 0; r < res.deliveries.size(); ++r)
    for (const auto& it : res.deliveries[r].trace) w.row(r, it.iter, it.surrogate, it.throughput, it.max_residual);
}

enum class SweepAxis { kLambda, kSnr, kUe, kCache };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "lambda") return SweepAxis::kLambda;
  if (s == "snr") return SweepAxis::kSnr;
  if (s == "ue" || s == "ue_count") return SweepAxis::kUe;
  if (s == "cache" || s == "cache_size") return SweepAxis::kCache;
  throw Error("unknown sweep axis '" + s + "' (expected lambda|snr|ue|cache)");
}

inline std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kLambda: return "lambda";
    case SweepAxis::kSnr: return "snr_db";
    case SweepAxis::kUe: return "num_ues";
    case SweepAxis::kCache: return "cache_size_bits";
  }
  return "?";
}

/// Grid values of an axis as doubles.
inline std::vector<double> axis_grid(const ExperimentConfig& cfg, SweepAxis axis) {
  std::vector<double> g;
  switch (axis) {
    case SweepAxis::kLambda: g = cfg.lambda_grid; break;
    case SweepAxis::kSnr: g = cfg.snr_grid_db; break;
    case SweepAxis::kUe:
      for (int k : cfg.ue_grid) g.push_back(k);
      break;
    case SweepAxis::kCache:
      for (auto s : cfg.cache_grid) g.push_back(static_cast<double>(s));
      break;
  }
  return g;
}

inline ExperimentConfig with_axis_value(ExperimentConfig cfg, SweepAxis axis, double value) {
  switch (axis) {
    case SweepAxis::kLambda: cfg.lambda = value; break;
    case SweepAxis::kSnr: cfg.snr_db = value; break;
    case SweepAxis::kUe: cfg.network.num_ues = static_cast<int>(value); break;
    case SweepAxis::kCache: cfg.cache_size_bits = static_cast<std::uint64_t>(value); break;
  }
  return cfg;
}

struct SweepPoint {
  double value = 0.0;
  int realizations = 0;
  Summary objective, throughput, savings, backhaul_load, power, cost;
  double planned_savings = 0.0;
  double mean_iterations = 0.0;
  int max_iterations = 0;
  int converged = 0;
  int sca_iterations = 0;
  double wall_seconds = 0.0;   // kept out of the CSV
};

inline SweepPoint summarize_run(double value, const RunResult& r) {
  SweepPoint p;
  p.value = value;
  p.realizations = static_cast<int>(r.realizations.size());
  p.objective = summarize(r.column(&RealizationMetrics::objective));
  p.throughput = summarize(r.column(&RealizationMetrics::throughput));
  p.savings = summarize(r.column(&RealizationMetrics::savings));
  p.backhaul_load = summarize(r.column(&RealizationMetrics::backhaul_load));
  p.power = summarize(r.column(&RealizationMetrics::power));
  p.cost = summarize(r.column(&RealizationMetrics::cost));
  p.planned_savings = r.planned_savings;
  p.mean_iterations = r.mean_outer_iterations();
  p.max_iterations = r.max_outer_iterations();
  p.converged = r.converged_count();
  p.sca_iterations = r.sca.iterations;
  return p;
}

inline std::vector<std::string> sweep_header(SweepAxis axis) {
  return {to_string(axis),   "realizations",    "mean_objective",    "std_objective",  "mean_throughput",
          "std_throughput",  "mean_savings",    "std_savings",       "planned_savings", "mean_backhaul_load",
          "mean_power",      "mean_cost",       "mean_iterations",   "max_iterations", "converged",
          "sca_iterations"};
}

inline void write_sweep_row(CsvWriter& w, const SweepPoint& p) {
  w.row(p.value, p.realizations, p.objective.mean, p.objective.std, p.throughput.mean, p.throughput.std,
        p.savings.mean, p.savings.std, p.planned_savings, p.backhaul_load.mean, p.power.mean, p.cost.mean,
        p.mean_iterations, p.max_iterations, p.converged, p.sca_iterations);
}

/// Runs every grid point with the common base seed. Each finished row is
/// written and flushed before the next point starts, so a failure leaves the
/// completed rows on disk; the failure is rethrown with the grid value.
inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, SweepAxis axis, std::ostream* csv = nullptr,
                                         const std::function<double()>& clock = {}) {
  std::vector<SweepPoint> out;
  std::optional<CsvWriter> w;
  if (csv) {
    w.emplace(*csv);
    w->header(sweep_header(axis));
  }
  for (double value : axis_grid(cfg, axis)) {
    const double t0 = clock ? clock() : 0.0;
    RunResult r;
    try {
      r = mixed_timescale_solve(with_axis_value(cfg, axis, value));
    } catch (const std::exception& e) {
      if (csv) csv->flush();
      throw Error("sweep " + to_string(axis) + " = " + format_number(value) + ": " + e.what());
    }
    SweepPoint p = summarize_run(value, r);
    p.wall_seconds = clock ? clock() - t0 : 0.0;
    if (w) {
      write_sweep_row(*w, p);
      csv->flush();
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace mecopt
