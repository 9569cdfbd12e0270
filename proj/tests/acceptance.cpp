// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mecopt/mecopt.hpp"
#include "test_support.hpp"

using namespace mecopt;
namespace fs = std::filesystem;
using testsupport::uniform;
using testsupport::uniform_int;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  failures += pass ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

ExperimentConfig desk(std::uint64_t seed) {
  ExperimentConfig cfg = load_config(std::string(MECOPT_CONFIG_DIR) + "/desk.cfg");
  cfg.network.seed = seed;
  return cfg;
}

void wmmse_monotone() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = std::numeric_limits<double>::infinity();
  int outer = 0;
  for (int t = 0; t < 100; ++t) {
    const auto inst = testsupport::random_delivery(rng, 4, 2);
    WmmseOptions opt;
    opt.seed = t;
    const DeliverySolution s = wmmse_solve(inst.problem, opt);
    outer += s.outer_iterations;
    for (std::size_t i = 1; i < s.trace.size(); ++i)
      worst = std::min(worst, s.trace[i].surrogate - s.trace[i - 1].surrogate);
  }
  const double secs = seconds_since(t0);
  report("wmmse_surrogate_monotone", worst >= -1e-8 && secs < 120.0,
         "100 instances, " + std::to_string(outer) + " outer steps, worst step " + fmt(worst) + ", " + fmt(secs) + " s");
}

void mmse_optimal() {
  std::mt19937_64 rng(102);
  double worst = std::numeric_limits<double>::infinity();
  double worst_incoherent = worst;
  for (int t = 0; t < 50; ++t) {
    const auto inst = testsupport::random_delivery(rng, 4, 2);
    const DeliveryProblem& p = inst.problem;
    const Beamformers v = testsupport::random_beamformers(rng, p);
    for (int k = 0; k < p.num_ue; ++k) {
      const CVector u = mmse_receiver(p, v, k).u;
      const double best = sinr(p, v, u, k), best_incoherent = sinr_incoherent(p, v, u, k);
      for (int probe = 0; probe < 1000; ++probe) {
        const CVector probe_u = testsupport::random_unit(rng, p.nr);
        worst = std::min(worst, best - sinr(p, v, probe_u, k));
        worst_incoherent = std::min(worst_incoherent, best_incoherent - sinr_incoherent(p, v, probe_u, k));
      }
    }
  }
  // The incoherent margin is informational: the receiver is matched to the coherent signal model.
  report("mmse_receiver_optimal", worst >= -1e-9,
         "50 instances x 1000 probes per UE, worst margin " + fmt(worst) + " (per-BS power sum numerator: " +
             fmt(worst_incoherent) + ")");
}

void admm_vs_centralized() {
  std::mt19937_64 rng(103);
  double worst_rel = 0.0, worst_res = 0.0;
  bool all_converged = true;
  for (int t = 0; t < 20; ++t) {
    const auto inst = testsupport::random_delivery(rng, 4, 2);
    const AdmmProblem a = testsupport::random_admm_problem(rng, inst.problem);
    const AdmmResult r = admm_solve(a, Beamformers(a.num_links, CVector::Zero(a.nt)), AdmmOptions{});
    const double oracle = admm_objective(a, testsupport::centralized_beamformer_oracle(a));
    worst_rel = std::max(worst_rel, std::abs(r.objective - oracle) / std::abs(oracle));
    worst_res = std::max(worst_res, r.primal_residual);
    all_converged = all_converged && r.converged;
  }
  report("admm_matches_centralized", worst_rel <= 1e-3 && worst_res < 1e-4 && all_converged,
         "20 instances, worst relative gap " + fmt(worst_rel) + ", worst primal residual " + fmt(worst_res));
}

void cache_oracles() {
  std::mt19937_64 rng(104);
  int mismatches = 0;
  const int n = 300;
  for (int t = 0; t < n; ++t) {
    const int f = uniform_int(rng, 1, 12);
    RVector mu(f);
    for (int i = 0; i < f; ++i) mu(i) = uniform_int(rng, 0, 64) / 64.0;
    const std::uint64_t cap = uniform_int(rng, 0, f);
    if (selection_value(mu, greedy_select(mu, cap, 1)) !=
        testsupport::exhaustive_best(mu, std::vector<std::uint64_t>(f, 1), cap))
      ++mismatches;
    std::vector<std::uint64_t> sizes(f);
    for (auto& s : sizes) s = uniform_int(rng, 1, 8);
    const std::uint64_t kcap = uniform_int(rng, 0, 30);
    if (selection_value(mu, knapsack_select(mu, sizes, kcap)) != testsupport::exhaustive_best(mu, sizes, kcap))
      ++mismatches;
  }
  report("cache_oracles_exact", mismatches == 0,
         std::to_string(n) + " instances with F <= 12, " + std::to_string(mismatches) + " mismatches");
}

void sca_gradient_check() {
  std::mt19937_64 rng(105);
  const auto s = testsupport::random_sca_instance(rng, {2, 2}, {3, 3}, 5, 4, 2, 4, 0.5);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Placement c = testsupport::random_interior(rng, s.model, s.clusters);
    const int i = t % 2;
    const RMatrix fd = testsupport::finite_difference_gradient(s.model, c, i);
    worst = std::max(worst, (sca_gradient(s.model, c, i) - fd).norm() / fd.norm());
  }
  report("sca_gradient_finite_differences", worst <= 1e-4, "20 interior points, worst relative error " + fmt(worst));
}

void popularity_rows() {
  std::mt19937_64 rng(106);
  double worst_sum = 0.0;
  int inexact = 0;
  for (int t = 0; t < 1000; ++t) {
    const int nb = uniform_int(rng, 1, 4), nu = uniform_int(rng, 1, 6), f = uniform_int(rng, 1, 10);
    Preferences prefs;
    prefs.pbar.push_back(testsupport::dyadic_stochastic(rng, nu, f));
    RVector q(nu);
    for (int k = 0; k < nu; ++k) q(k) = uniform_int(rng, 1, 16) / 4.0;
    prefs.q.push_back(q);
    const AssociationMatrix d{{testsupport::random_binary(rng, nb, nu)}};
    const RMatrix p = bs_popularity(prefs, d)[0];
    if (p != testsupport::popularity_loop(prefs.pbar[0], q, d.d[0])) ++inexact;

    // Continuous preferences and rates for the row sums.
    Preferences cont;
    RMatrix pc(nu, f);
    for (int k = 0; k < nu; ++k) {
      for (int n = 0; n < f; ++n) pc(k, n) = uniform(rng, 0.0, 1.0);
      pc.row(k) /= pc.row(k).sum();
    }
    cont.pbar.push_back(pc);
    RVector qc(nu);
    for (int k = 0; k < nu; ++k) qc(k) = uniform(rng, 0.1, 5.0);
    cont.q.push_back(qc);
    const RMatrix pcb = bs_popularity(cont, d)[0];
    for (int j = 0; j < nb; ++j)
      if (d.d[0].row(j).sum() > 0.0) worst_sum = std::max(worst_sum, std::abs(pcb.row(j).sum() - 1.0));
  }
  report("bs_popularity_rows", worst_sum <= 1e-12 && inexact == 0,
         "1000 triples, worst row-sum error " + fmt(worst_sum) + ", " + std::to_string(inexact) +
             " loop mismatches");
}

void trace_identity() {
  std::mt19937_64 rng(107);
  int inexact = 0;
  for (int t = 0; t < 1000; ++t) {
    const int f = uniform_int(rng, 1, 10), nb = uniform_int(rng, 1, 4), nu = uniform_int(rng, 1, 6);
    Preferences prefs;
    prefs.pbar.push_back(testsupport::dyadic_stochastic(rng, nu, f));
    prefs.q.push_back(RVector::Ones(nu));
    CachePlacement c;
    c.c.push_back(testsupport::random_binary(rng, f, nb));
    c.capacity.assign(1, std::vector<std::uint64_t>(nb, f));
    const AssociationMatrix d{{testsupport::random_binary(rng, nb, nu)}};
    if (total_backhaul_savings(prefs, c, d) != testsupport::triple_sum(prefs.pbar[0], c.c[0], d.d[0])) ++inexact;
  }
  report("savings_trace_identity", inexact == 0, "1000 binary instances, " + std::to_string(inexact) + " mismatches");
}

struct SeedOneSweeps {
  std::vector<std::pair<std::string, std::vector<SweepPoint>>> sweeps;
};

void cache_savings_trend(SeedOneSweeps& seed_one) {
  const auto t0 = std::chrono::steady_clock::now();
  bool monotone = true, endpoints = true;
  std::string detail;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ExperimentConfig cfg = desk(seed);
    const auto pts = run_sweep(cfg, SweepAxis::kCache);
    if (seed == 1) seed_one.sweeps.push_back({"cache", pts});
    detail += "seed " + std::to_string(seed) + " savings";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      detail += " " + fmt(pts[i].savings.mean);
      if (i > 0 && pts[i].savings.mean < pts[i - 1].savings.mean) monotone = false;
    }
    detail += "; ";

    const RunResult r0 = mixed_timescale_solve(with_axis_value(cfg, SweepAxis::kLambda, 0.0));
    const RunResult r1 = mixed_timescale_solve(with_axis_value(cfg, SweepAxis::kLambda, 1.0));
    for (const auto& m : r0.realizations) endpoints = endpoints && m.objective == m.savings;
    for (const auto& m : r1.realizations) endpoints = endpoints && m.objective == m.throughput;
    ExperimentConfig greedy = with_axis_value(cfg, SweepAxis::kLambda, 0.0);
    greedy.caching = CachingMode::kGreedy;
    greedy.realizations = 1;
    endpoints = endpoints && mixed_timescale_solve(greedy).planned_savings == r0.planned_savings;
  }
  const double secs = seconds_since(t0);
  report("cache_savings_trend", monotone && endpoints && secs < 600.0,
         detail + "lambda endpoints " + (endpoints ? "hold" : "broken") + ", " + fmt(secs) + " s");
}

void rate_trends(SeedOneSweeps& seed_one) {
  const ExperimentConfig cfg = desk(1);
  const auto snr = run_sweep(cfg, SweepAxis::kSnr);
  const auto ue = run_sweep(cfg, SweepAxis::kUe);
  seed_one.sweeps.push_back({"snr", snr});
  seed_one.sweeps.push_back({"ue", ue});
  bool snr_up = true, ue_up = true;
  std::string detail = "snr throughput";
  for (std::size_t i = 0; i < snr.size(); ++i) {
    detail += " " + fmt(snr[i].throughput.mean);
    if (i > 0 && !(snr[i].throughput.mean > snr[i - 1].throughput.mean)) snr_up = false;
  }
  detail += "; ue throughput";
  for (std::size_t i = 0; i < ue.size(); ++i) {
    detail += " " + fmt(ue[i].throughput.mean);
    if (i > 0 && ue[i].throughput.mean < ue[i - 1].throughput.mean) ue_up = false;
  }
  report("sum_rate_trends", snr_up && ue_up,
         detail + " (snr " + (snr_up ? "increasing" : "not increasing") + ", ue " +
             (ue_up ? "non-decreasing" : "decreasing somewhere") + ")");
}

void convergence_bookkeeping(SeedOneSweeps& seed_one) {
  seed_one.sweeps.push_back({"lambda", run_sweep(desk(1), SweepAxis::kLambda)});
  bool ok = true;
  int worst = 0, points = 0;
  for (const auto& [axis, pts] : seed_one.sweeps)
    for (const auto& p : pts) {
      ++points;
      worst = std::max(worst, p.max_iterations);
      ok = ok && p.max_iterations < 200 && p.converged == p.realizations;
    }
  report("outer_iterations_bounded", ok,
         std::to_string(points) + " seed-1 sweep points, max outer iterations " + std::to_string(worst));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "mecopt_acceptance_det";
  fs::remove_all(dir);
  const std::string base = std::string(MECOPT_CLI) + " run --config " + MECOPT_CONFIG_DIR + "/desk.cfg --seed 2 --out ";
  bool ok = true;
  for (const char* sub : {"a", "b"}) {
    const int rc = std::system((base + (dir / sub).string() + " > /dev/null 2>&1").c_str());
    ok = ok && WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
  }
  int compared = 0;
  if (ok)
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      if (e.path().extension() != ".csv") continue;
      ++compared;
      ok = ok && slurp(e.path()) == slurp(dir / "b" / e.path().filename());
    }
  report("cli_run_deterministic", ok && compared > 0, std::to_string(compared) + " CSVs compared byte for byte");
}

}  // namespace

int main() {
  wmmse_monotone();
  mmse_optimal();
  admm_vs_centralized();
  cache_oracles();
  sca_gradient_check();
  popularity_rows();
  trace_identity();
  SeedOneSweeps seed_one;
  cache_savings_trend(seed_one);
  rate_trends(seed_one);
  convergence_bookkeeping(seed_one);
  cli_determinism();
  return failures == 0 ? 0 : 1;
}
