#pragma once

// Flat `key = value` configuration files.
//
//   # comment
//   bs_density = 5
//   cache_grid = 1, 2, 4, 8
//
// Every key belongs to a fixed schema (see schema() below); unknown keys,
// malformed numbers and violated invariants are rejected with mecopt::Error.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mecopt/types.hpp"

namespace mecopt {

struct NetworkConfig {
  double bs_density = 5.0;          // BS per km^2
  double area_radius_km = 0.62;     // disc holding the PPP
  int ue_per_bs = 2;
  int num_ues = 0;                  // > 0 overrides ue_per_bs with a fixed total
  double exclusion_radius_km = 0.035;
  int num_clusters = 2;
  int nt = 4;
  int nr = 2;
  double tx_power_dbm = 46.0;
  double noise_psd_dbm_hz = -174.0;
  double bandwidth_hz = 5e6;
  double pathloss_intercept_db = 148.1;
  double pathloss_slope_db = 37.6;
  double shadowing_sigma_db = 8.0;
  int block_length = 1;             // consecutive realizations sharing one small-scale draw
  std::uint64_t seed = 1;

  double tx_power_watt() const { return dbm_to_watt(tx_power_dbm); }
  /// Radius of the disc each UE is dropped in around its parent BS.
  double cell_radius_km() const { return 1.0 / std::sqrt(M_PI * bs_density); }

  void validate() const {
    require(num_clusters >= 1, "num_clusters must be >= 1");
    require(nt >= 1 && nr >= 1, "antenna counts must be >= 1");
    require(ue_per_bs >= 1, "ue_per_bs must be >= 1");
    require(num_ues >= 0, "num_ues must be >= 0");
    require(bs_density > 0.0, "bs_density must be > 0");
    require(bandwidth_hz > 0.0, "bandwidth_hz must be > 0");
    require(exclusion_radius_km >= 0.0, "exclusion_radius_km must be >= 0");
    require(area_radius_km > exclusion_radius_km,
            "area_radius_km must exceed exclusion_radius_km");
    require(cell_radius_km() > exclusion_radius_km,
            "cell radius 1/sqrt(pi*bs_density) must exceed exclusion_radius_km");
    require(shadowing_sigma_db >= 0.0, "shadowing_sigma_db must be >= 0");
    require(block_length >= 1, "block_length must be >= 1");
  }
};

enum class CachingMode { kSca, kGreedy, kKnapsack, kRandom };
enum class AssociationMode { kContentAware, kThreshold, kNearest };

inline std::string to_string(CachingMode m) {
  switch (m) {
    case CachingMode::kSca: return "sca";
    case CachingMode::kGreedy: return "greedy";
    case CachingMode::kKnapsack: return "knapsack";
    case CachingMode::kRandom: return "random";
  }
  return "?";
}

inline std::string to_string(AssociationMode m) {
  switch (m) {
    case AssociationMode::kContentAware: return "content_aware";
    case AssociationMode::kThreshold: return "threshold";
    case AssociationMode::kNearest: return "nearest";
  }
  return "?";
}

struct ExperimentConfig {
  NetworkConfig network;

  double lambda = 0.5;
  int num_files = 20;
  double zipf_gamma = 0.56;
  double heterogeneity = 0.5;
  std::uint64_t file_size_bits = 1;
  std::uint64_t cache_size_bits = 4;
  double rate_threshold = 5.0;       // bits/s/Hz
  double backhaul_capacity = 50.0;   // bits/s/Hz per BS
  bool backhaul_repair = false;
  bool serve_misses_via_backhaul = false;
  CachingMode caching = CachingMode::kSca;
  AssociationMode association = AssociationMode::kContentAware;
  std::optional<double> snr_db;      // overrides tx_power_dbm when set

  int realizations = 10;
  int sca_samples = 20;
  double sca_tau = 1.0;
  double sca_gamma0 = 0.5;
  double sca_tol = 1e-3;
  int sca_max_outer = 100;
  double wmmse_tol = 1e-2;
  int wmmse_max_outer = 200;
  double admm_rho = 1.0;
  double admm_tol = 1e-4;
  int admm_max_iter = 5000;

  double cost_weight_backhaul = 1.0;
  double cost_weight_power = 1.0;

  std::vector<double> lambda_grid{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> snr_grid_db{0, 5, 10, 15, 20};
  std::vector<int> ue_grid{4, 6, 8, 10};
  std::vector<std::uint64_t> cache_grid{1, 2, 4, 8};

  std::string output_dir = "out";

  void validate() const {
    network.validate();
    require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0,1]");
    require(num_files >= 1, "num_files must be >= 1");
    require(zipf_gamma >= 0.0, "zipf_gamma must be >= 0");
    require(heterogeneity >= 0.0 && heterogeneity <= 1.0, "heterogeneity must lie in [0,1]");
    require(file_size_bits >= 1, "file_size_bits must be >= 1");
    require(cache_size_bits >= file_size_bits, "cache_size_bits must hold at least one file");
    require(rate_threshold >= 0.0, "rate_threshold must be >= 0");
    require(backhaul_capacity > 0.0, "backhaul_capacity must be > 0");
    require(realizations >= 1, "realizations must be >= 1");
    require(sca_samples >= 1, "sca_samples must be >= 1");
    require(sca_tau > 0.0, "sca_tau must be > 0");
    require(sca_gamma0 > 0.0 && sca_gamma0 <= 1.0, "sca_gamma0 must lie in (0,1]");
    require(sca_tol > 0.0 && sca_max_outer >= 1, "sca_tol > 0 and sca_max_outer >= 1 required");
    require(wmmse_tol > 0.0 && wmmse_max_outer >= 1, "wmmse_tol > 0 and wmmse_max_outer >= 1 required");
    require(admm_rho > 0.0 && admm_tol > 0.0 && admm_max_iter >= 1, "admm parameters must be positive");
    require(cost_weight_backhaul >= 0.0 && cost_weight_power >= 0.0, "cost weights must be >= 0");
    require(!lambda_grid.empty() && !snr_grid_db.empty() && !ue_grid.empty() && !cache_grid.empty(),
            "sweep grids must be non-empty");
    for (double l : lambda_grid) require(l >= 0.0 && l <= 1.0, "lambda_grid entries must lie in [0,1]");
    for (int k : ue_grid) require(k >= 1, "ue_grid entries must be >= 1");
    for (auto s : cache_grid) require(s >= file_size_bits, "cache_grid entries must hold at least one file");
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string fmt_double(double d) {
  std::ostringstream os;
  os << std::setprecision(17) << d;
  return os.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += f(xs[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::string doc;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define MECOPT_DOUBLE(path, name, doc)                                                            \
  Field {                                                                                         \
    name, doc, [](ExperimentConfig& c, const std::string& v) { c.path = parse_double(name, v); }, \
        [](const ExperimentConfig& c) { return fmt_double(c.path); }                              \
  }
#define MECOPT_INT(path, type, name, doc)                                                     \
  Field {                                                                                     \
    name, doc,                                                                                \
        [](ExperimentConfig& c, const std::string& v) {                                       \
          auto x = parse_int(name, v);                                                        \
          if (std::is_unsigned_v<type> && x < 0) throw Error(std::string(name) + " must be >= 0"); \
          c.path = static_cast<type>(x);                                                      \
        },                                                                                    \
        [](const ExperimentConfig& c) { return std::to_string(c.path); }                      \
  }
#define MECOPT_BOOL(path, name, doc)                                                            \
  Field {                                                                                       \
    name, doc, [](ExperimentConfig& c, const std::string& v) { c.path = parse_bool(name, v); }, \
        [](const ExperimentConfig& c) { return std::string(c.path ? "true" : "false"); }        \
  }

inline const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      MECOPT_DOUBLE(network.bs_density, "bs_density", "BS density of the PPP, per km^2"),
      MECOPT_DOUBLE(network.area_radius_km, "area_radius_km", "radius of the simulated disc, km"),
      MECOPT_INT(network.ue_per_bs, int, "ue_per_bs", "UEs dropped around each BS"),
      MECOPT_INT(network.num_ues, int, "num_ues", "fixed total UE count (0 = ue_per_bs * #BS)"),
      MECOPT_DOUBLE(network.exclusion_radius_km, "exclusion_radius_km", "min UE distance to parent BS, km"),
      MECOPT_INT(network.num_clusters, int, "num_clusters", "number of BS/UE clusters"),
      MECOPT_INT(network.nt, int, "nt", "transmit antennas per BS"),
      MECOPT_INT(network.nr, int, "nr", "receive antennas per UE"),
      MECOPT_DOUBLE(network.tx_power_dbm, "tx_power_dbm", "max transmit power per BS, dBm"),
      MECOPT_DOUBLE(network.noise_psd_dbm_hz, "noise_psd_dbm_hz", "noise PSD, dBm/Hz"),
      MECOPT_DOUBLE(network.bandwidth_hz, "bandwidth_hz", "system bandwidth, Hz"),
      MECOPT_DOUBLE(network.pathloss_intercept_db, "pathloss_intercept_db", "pathloss at 1 km, dB"),
      MECOPT_DOUBLE(network.pathloss_slope_db, "pathloss_slope_db", "pathloss slope, dB/decade"),
      MECOPT_DOUBLE(network.shadowing_sigma_db, "shadowing_sigma_db", "log-normal shadowing std, dB"),
      MECOPT_INT(network.block_length, int, "block_length", "consecutive realizations sharing one small-scale draw"),
      MECOPT_INT(network.seed, std::uint64_t, "seed", "base random seed"),
      MECOPT_DOUBLE(lambda, "lambda", "throughput/backhaul-savings tradeoff in [0,1]"),
      MECOPT_INT(num_files, int, "num_files", "catalog size F"),
      MECOPT_DOUBLE(zipf_gamma, "zipf_gamma", "Zipf skewness"),
      MECOPT_DOUBLE(heterogeneity, "heterogeneity", "per-user preference heterogeneity in [0,1]"),
      MECOPT_INT(file_size_bits, std::uint64_t, "file_size_bits", "size of every file, bits"),
      MECOPT_INT(cache_size_bits, std::uint64_t, "cache_size_bits", "cache capacity per BS, bits"),
      MECOPT_DOUBLE(rate_threshold, "rate_threshold", "association link-rate threshold, bits/s/Hz"),
      MECOPT_DOUBLE(backhaul_capacity, "backhaul_capacity", "backhaul capacity per BS, bits/s/Hz"),
      MECOPT_BOOL(backhaul_repair, "backhaul_repair", "drop smallest-savings links on overloaded BSs"),
      MECOPT_BOOL(serve_misses_via_backhaul, "serve_misses_via_backhaul",
                  "serving BSs without the requested file still transmit it"),
      Field{"caching", "placement solver: sca | greedy | knapsack | random",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "sca") c.caching = CachingMode::kSca;
              else if (v == "greedy") c.caching = CachingMode::kGreedy;
              else if (v == "knapsack") c.caching = CachingMode::kKnapsack;
              else if (v == "random") c.caching = CachingMode::kRandom;
              else throw Error("config key 'caching': unknown mode '" + v + "'");
            },
            [](const ExperimentConfig& c) { return to_string(c.caching); }},
      Field{"association", "association rule: content_aware | threshold | nearest",
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "content_aware") c.association = AssociationMode::kContentAware;
              else if (v == "threshold") c.association = AssociationMode::kThreshold;
              else if (v == "nearest") c.association = AssociationMode::kNearest;
              else throw Error("config key 'association': unknown mode '" + v + "'");
            },
            [](const ExperimentConfig& c) { return to_string(c.association); }},
      Field{"snr_db", "cell-edge SNR in dB; sets tx power when present (empty = unset)",
            [](ExperimentConfig& c, const std::string& v) {
              if (v.empty() || v == "none") c.snr_db.reset();
              else c.snr_db = parse_double("snr_db", v);
            },
            [](const ExperimentConfig& c) { return c.snr_db ? fmt_double(*c.snr_db) : std::string("none"); }},
      MECOPT_INT(realizations, int, "realizations", "channel realizations per run"),
      MECOPT_INT(sca_samples, int, "sca_samples", "channel samples per placement epoch"),
      MECOPT_DOUBLE(sca_tau, "sca_tau", "proximal constant of the SCA surrogate"),
      MECOPT_DOUBLE(sca_gamma0, "sca_gamma0", "initial Jacobi step"),
      MECOPT_DOUBLE(sca_tol, "sca_tol", "stop when the max placement update is below this"),
      MECOPT_INT(sca_max_outer, int, "sca_max_outer", "max Jacobi iterations"),
      MECOPT_DOUBLE(wmmse_tol, "wmmse_tol", "stop when throughput changes less than this"),
      MECOPT_INT(wmmse_max_outer, int, "wmmse_max_outer", "max WMMSE iterations"),
      MECOPT_DOUBLE(admm_rho, "admm_rho", "initial ADMM penalty"),
      MECOPT_DOUBLE(admm_tol, "admm_tol", "ADMM primal residual tolerance"),
      MECOPT_INT(admm_max_iter, int, "admm_max_iter", "max ADMM iterations"),
      MECOPT_DOUBLE(cost_weight_backhaul, "cost_weight_backhaul", "network cost weight on backhaul bits"),
      MECOPT_DOUBLE(cost_weight_power, "cost_weight_power", "network cost weight on transmit power"),
      Field{"lambda_grid", "lambda sweep grid",
            [](ExperimentConfig& c, const std::string& v) {
              c.lambda_grid.clear();
              for (auto& s : split_list(v)) c.lambda_grid.push_back(parse_double("lambda_grid", s));
            },
            [](const ExperimentConfig& c) { return join(c.lambda_grid, fmt_double); }},
      Field{"snr_grid_db", "SNR sweep grid, dB",
            [](ExperimentConfig& c, const std::string& v) {
              c.snr_grid_db.clear();
              for (auto& s : split_list(v)) c.snr_grid_db.push_back(parse_double("snr_grid_db", s));
            },
            [](const ExperimentConfig& c) { return join(c.snr_grid_db, fmt_double); }},
      Field{"ue_grid", "total UE count sweep grid",
            [](ExperimentConfig& c, const std::string& v) {
              c.ue_grid.clear();
              for (auto& s : split_list(v)) c.ue_grid.push_back(static_cast<int>(parse_int("ue_grid", s)));
            },
            [](const ExperimentConfig& c) { return join(c.ue_grid, [](int k) { return std::to_string(k); }); }},
      Field{"cache_grid", "cache size sweep grid, bits",
            [](ExperimentConfig& c, const std::string& v) {
              c.cache_grid.clear();
              for (auto& s : split_list(v)) {
                auto x = parse_int("cache_grid", s);
                if (x < 0) throw Error("cache_grid entries must be >= 0");
                c.cache_grid.push_back(static_cast<std::uint64_t>(x));
              }
            },
            [](const ExperimentConfig& c) {
              return join(c.cache_grid, [](std::uint64_t s) { return std::to_string(s); });
            }},
      Field{"output_dir", "default output directory",
            [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
            [](const ExperimentConfig& c) { return c.output_dir; }},
  };
  return fields;
}

#undef MECOPT_DOUBLE
#undef MECOPT_INT
#undef MECOPT_BOOL

}  // namespace config_detail

/// Parses `key = value` text into a config, starting from defaults.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::map<std::string, const config_detail::Field*> by_key;
  for (const auto& f : config_detail::schema()) by_key[f.key] = &f;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(lineno) + ": expected 'key = value'");
    auto key = config_detail::trim(line.substr(0, eq));
    auto value = config_detail::trim(line.substr(eq + 1));
    auto it = by_key.find(key);
    if (it == by_key.end())
      throw Error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (seen.count(key))
      throw Error("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    seen[key] = lineno;
    it->second->set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

/// Canonical text form: every schema key in schema order. parse_config of
/// the result reproduces the config exactly.
inline std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : config_detail::schema()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

/// 64-bit FNV-1a over the canonical text (output_dir excluded).
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.output_dir.clear();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : to_config_text(c)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string schema_doc() {
  std::string out;
  for (const auto& f : config_detail::schema()) out += f.key + " : " + f.doc + "\n";
  return out;
}

}  // namespace mecopt
