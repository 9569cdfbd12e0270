// mec-opt: run, sweep and validate cache-enabled CoMP experiments.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mecopt/mecopt.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json manifest(const std::string& command, const mecopt::ExperimentConfig& cfg, const mecopt::NetworkConfig& net,
              const std::vector<std::string>& files) {
  json m;
  m["tool"] = "mec-opt";
  m["command"] = command;
  m["version"] = MECOPT_VERSION;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["compiler"] = __VERSION__;
  m["config_hash"] = hex64(mecopt::config_hash(cfg));
  m["seed"] = cfg.network.seed;
  m["caching"] = mecopt::to_string(cfg.caching);
  m["association"] = mecopt::to_string(cfg.association);
  if (cfg.snr_db) {
    m["snr_db"] = *cfg.snr_db;
    m["snr_knob"] = "tx_power_dbm set so the cell-edge SNR without shadowing equals snr_db";
  }
  m["tx_power_dbm"] = net.tx_power_dbm;
  m["files"] = files;
  return m;
}

void write_json(const fs::path& path, const json& j) {
  auto f = mecopt::open_output(path.string());
  f << j.dump(2) << "\n";
}

template <typename F>
void write_file(const fs::path& dir, const std::string& name, std::vector<std::string>& files, F&& body) {
  auto f = mecopt::open_output((dir / name).string());
  body(f);
  files.push_back(name);
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out,
            const std::string& preferences_path) {
  mecopt::ExperimentConfig cfg = mecopt::load_config(config_path);
  if (seed) cfg.network.seed = *seed;
  const fs::path dir = out.empty() ? fs::path(cfg.output_dir) : fs::path(out);
  fs::create_directories(dir);

  mecopt::PreferenceSource source;
  if (!preferences_path.empty()) {
    source = [&](const mecopt::ClusterIndex& clusters) {
      std::ifstream in(preferences_path);
      if (!in) throw mecopt::Error("cannot open preferences file '" + preferences_path + "'");
      return mecopt::read_preferences_csv(in, clusters, cfg.num_files);
    };
  }

  const double t0 = now_seconds();
  const mecopt::RunResult res = mecopt::mixed_timescale_solve(cfg, source);
  const double elapsed = now_seconds() - t0;

  std::vector<std::string> files;
  write_file(dir, "topology.csv", files, [&](std::ostream& os) { mecopt::write_topology_csv(os, res.topology); });
  write_file(dir, "preferences.csv", files,
             [&](std::ostream& os) { mecopt::write_preferences_csv(os, res.preferences, res.clusters); });
  write_file(dir, "association.csv", files,
             [&](std::ostream& os) { mecopt::write_realized_associations_csv(os, res); });
  write_file(dir, "long_term_association.csv", files,
             [&](std::ostream& os) { mecopt::write_association_csv(os, res.long_term, res.clusters); });
  write_file(dir, "placement.csv", files,
             [&](std::ostream& os) { mecopt::write_placement_csv(os, res.placement, res.clusters); });
  if (cfg.caching == mecopt::CachingMode::kSca)
    write_file(dir, "sca_trace.csv", files, [&](std::ostream& os) { mecopt::write_sca_trace_csv(os, res.sca.trace); });
  write_file(dir, "wmmse_trace.csv", files, [&](std::ostream& os) { mecopt::write_wmmse_traces_csv(os, res); });
  write_file(dir, "metrics.csv", files, [&](std::ostream& os) { mecopt::write_metrics_csv(os, res); });
  write_json(dir / "manifest.json", manifest("run", cfg, res.network, files));
  write_json(dir / "timing.json", json{{"wall_seconds", elapsed}});

  const auto thr = mecopt::summarize(res.column(&mecopt::RealizationMetrics::throughput));
  const auto sav = mecopt::summarize(res.column(&mecopt::RealizationMetrics::savings));
  std::cout << "realizations " << res.realizations.size() << ", mean throughput " << mecopt::format_number(thr.mean)
            << ", mean savings " << mecopt::format_number(sav.mean) << ", max outer iterations "
            << res.max_outer_iterations() << "\n";
  return 0;
}

int cmd_sweep(const std::string& axis_name, const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out) {
  mecopt::ExperimentConfig cfg = mecopt::load_config(config_path);
  if (seed) cfg.network.seed = *seed;
  const mecopt::SweepAxis axis = mecopt::parse_axis(axis_name);
  const fs::path dir = out.empty() ? fs::path(cfg.output_dir) : fs::path(out);
  fs::create_directories(dir);

  const std::string name = "sweep_" + mecopt::to_string(axis) + ".csv";
  std::vector<mecopt::SweepPoint> points;
  {
    auto f = mecopt::open_output((dir / name).string());
    points = mecopt::run_sweep(cfg, axis, &f, now_seconds);
  }
  write_json(dir / "manifest.json", manifest("sweep " + mecopt::to_string(axis), cfg, mecopt::effective_network(cfg), {name}));
  json timing = json::array();
  for (const auto& p : points) timing.push_back({{"value", p.value}, {"wall_seconds", p.wall_seconds}});
  write_json(dir / "timing.json", timing);
  std::cout << "wrote " << (dir / name).string() << " (" << points.size() << " points)\n";
  return 0;
}

int cmd_validate(const std::string& config_path, bool print_schema) {
  if (print_schema) {
    std::cout << mecopt::schema_doc();
    if (config_path.empty()) return 0;
  }
  const mecopt::ExperimentConfig cfg = mecopt::load_config(config_path);
  std::cout << "ok " << hex64(mecopt::config_hash(cfg)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint cache placement and CoMP delivery experiments"};
  app.require_subcommand(1);

  std::string config, out, axis, preferences;
  std::optional<std::uint64_t> seed;
  bool schema = false;

  auto* run = app.add_subcommand("run", "one placement epoch and its delivery realizations");
  run->add_option("--config", config, "config file")->required();
  run->add_option("--seed", seed, "overrides the config seed");
  run->add_option("--out", out, "output directory (default: output_dir from the config)");
  run->add_option("--preferences", preferences, "read per-UE preferences from CSV instead of sampling");

  auto* sweep = app.add_subcommand("sweep", "sweep one axis of the config grids");
  sweep->add_option("--axis", axis, "lambda | snr | ue | cache")
      ->required()
      ->check(CLI::IsMember({"lambda", "snr", "ue", "cache"}));
  sweep->add_option("--config", config, "config file")->required();
  sweep->add_option("--seed", seed, "overrides the config seed");
  sweep->add_option("--out", out, "output directory (default: output_dir from the config)");

  auto* validate = app.add_subcommand("validate", "schema check of a config file");
  validate->add_option("--config", config, "config file");
  validate->add_flag("--schema", schema, "print every key with its meaning");

  CLI11_PARSE(app, argc, argv);
  try {
    if (run->parsed()) return cmd_run(config, seed, out, preferences);
    if (sweep->parsed()) return cmd_sweep(axis, config, seed, out);
    if (validate->parsed()) {
      if (config.empty() && !schema) throw mecopt::Error("validate: --config is required");
      return cmd_validate(config, schema);
    }
  } catch (const std::exception& e) {
    std::cerr << "mec-opt: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
