#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mecopt/admm.hpp"
#include "test_support.hpp"

using namespace mecopt;

namespace {

// One UE, one link, scalar antenna: objective |sqrt(w) - amp conj(g) v|^2 + const.
AdmmProblem scalar_problem(cd g, double w, double ptilde, double power, double backhaul, double bh_weight) {
  AdmmProblem a;
  a.num_ue = 1;
  a.num_links = 1;
  a.nt = 1;
  a.g = {CVector::Constant(1, g)};
  a.sqrt_w = RVector::Constant(1, std::sqrt(w));
  a.amp = RVector::Constant(1, std::sqrt(ptilde));
  a.ptilde = RVector::Constant(1, ptilde);
  a.link_ue = {0};
  a.own = {{0}};
  a.bs_links = {{0}};
  a.power_budget = RVector::Constant(1, power);
  a.backhaul_budget = RVector::Constant(1, backhaul);
  a.backhaul_weight = RVector::Constant(1, bh_weight);
  return a;
}

}  // namespace

TEST(AdmmObjective, MatchesStackedQuadratic) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto inst = testsupport::random_delivery(rng);
    const AdmmProblem a = testsupport::random_admm_problem(rng, inst.problem);
    const auto q = testsupport::stack_quadratic(a);
    const Beamformers v = testsupport::random_beamformers(rng, inst.problem);
    const double f = admm_objective(a, v);
    EXPECT_NEAR(f, q.value(testsupport::stack(v)), 1e-10 * (1.0 + std::abs(f)));
  }
}

TEST(AdmmObjective, EqualsWeightedMseSum) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto inst = testsupport::random_delivery(rng);
    const DeliveryProblem& p = inst.problem;
    const ReceiverState rx = update_receivers(p, testsupport::random_beamformers(rng, p));
    const AdmmProblem a = make_admm_problem(p, rx, RVector::Ones(p.num_links()));
    const Beamformers v = testsupport::random_beamformers(rng, p);
    const double wmse = weighted_mse_sum(p, v, rx);
    EXPECT_NEAR(admm_objective(a, v), wmse, 1e-10 * (1.0 + wmse));
  }
}

TEST(AdmmSteps, DualUpdateAddsScaledResidual) {
  std::mt19937_64 rng(3);
  const auto inst = testsupport::random_delivery(rng);
  const AdmmProblem a = testsupport::random_admm_problem(rng, inst.problem);
  AdmmState s = init_admm_state(a, testsupport::random_beamformers(rng, inst.problem), 0.75);
  s.x = testsupport::random_beamformers(rng, inst.problem);
  for (auto& z : s.z) z = draw_cn_matrix(rng, a.nt, 1).col(0);
  s.X = draw_cn_matrix(rng, a.num_ue, a.num_links);
  s.lambda = draw_cn_matrix(rng, a.num_ue, a.num_links);
  const AdmmState before = s;
  admm_dual_update(a, s);
  for (int l = 0; l < a.num_links; ++l) EXPECT_EQ(s.z[l], CVector(before.z[l] + 0.75 * (s.v[l] - s.x[l])));
  for (int k = 0; k < a.num_ue; ++k)
    for (int l = 0; l < a.num_links; ++l)
      EXPECT_EQ(s.lambda(k, l), before.lambda(k, l) + 0.75 * (a.gv(k, l).dot(s.v[l]) - s.X(k, l)));
}

TEST(AdmmSteps, XUpdateProjectsOntoBinding) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto inst = testsupport::random_delivery(rng);
    const AdmmProblem a = testsupport::random_admm_problem(rng, inst.problem);
    AdmmState s = init_admm_state(a, testsupport::random_beamformers(rng, inst.problem, 2.0), 1.0);
    admm_x_update(a, s);
    // Oracle: Dykstra projection of the same target.
    const CVector target = testsupport::stack(s.v);
    const CVector expect = testsupport::project_feasible(a, target, 5000);
    EXPECT_LT((testsupport::stack(s.x) - expect).norm(), 1e-6 * (1.0 + expect.norm()));
    for (std::size_t j = 0; j < a.bs_links.size(); ++j) {
      double pw = 0.0, bh = 0.0, tp = 0.0, tb = 0.0;
      for (int l : a.bs_links[j]) {
        pw += a.ptilde(l) * s.x[l].squaredNorm();
        bh += a.backhaul_weight(l) * s.x[l].squaredNorm();
        tp += a.ptilde(l) * s.v[l].squaredNorm();
        tb += a.backhaul_weight(l) * s.v[l].squaredNorm();
      }
      EXPECT_LE(pw, a.power_budget(j) * (1.0 + 1e-9));
      EXPECT_LE(bh, a.backhaul_budget(j) * (1.0 + 1e-9));
      if (tp > a.power_budget(j) || tb > a.backhaul_budget(j)) {
        // Some ball binds at the boundary.
        EXPECT_NEAR(std::max(pw / a.power_budget(j), bh / a.backhaul_budget(j)), 1.0, 1e-9);
      } else {
        for (int l : a.bs_links[j]) EXPECT_EQ(s.x[l], s.v[l]);
      }
    }
  }
}

TEST(AdmmSteps, InactiveConstraintsKeepTarget) {
  std::mt19937_64 rng(5);
  const auto inst = testsupport::random_delivery(rng);
  AdmmProblem a = testsupport::random_admm_problem(rng, inst.problem);
  a.power_budget.setConstant(1e12);
  a.backhaul_budget.setConstant(1e12);
  AdmmState s = init_admm_state(a, testsupport::random_beamformers(rng, inst.problem), 2.0);
  for (auto& z : s.z) z = draw_cn_matrix(rng, a.nt, 1).col(0);
  admm_x_update(a, s);
  for (int l = 0; l < a.num_links; ++l) EXPECT_EQ(s.x[l], CVector(s.v[l] + s.z[l] / 2.0));
}

TEST(TwoBall, ZeroBudgetPinsToZero) {
  const auto sc = detail::TwoBallProjector({1.0, 4.0}, {1.0, 0.0}, {0.0, 1.0}, 0.0, 10.0).scales();
  EXPECT_EQ(sc[0], 0.0);
  EXPECT_EQ(sc[1], 1.0);
  EXPECT_THROW(detail::TwoBallProjector({1.0}, {1.0}, {1.0}, -1.0, 1.0), Error);
}

TEST(AdmmSolve, ScalarQuadraticMinimum) {
  const cd g(0.6, -0.8);
  // Unconstrained: amp conj(g) v = sqrt(w), v = sqrt(w) / (amp conj(g)).
  const AdmmProblem loose = scalar_problem(g, 4.0, 0.25, 100.0, 100.0, 1.0);
  const AdmmResult r = admm_solve(loose, {CVector::Zero(1)}, AdmmOptions{});
  ASSERT_TRUE(r.converged);
  const cd expect = 2.0 / (0.5 * std::conj(g));
  EXPECT_NEAR(std::abs(r.x[0](0) - expect), 0.0, 1e-3);
  EXPECT_NEAR(r.objective, 0.0, 1e-6);

  // Power cap p~ |v|^2 <= 0.25 gives |v| = 1 along the same phase.
  const AdmmProblem tight = scalar_problem(g, 4.0, 0.25, 0.25, 100.0, 1.0);
  const AdmmResult rt = admm_solve(tight, {CVector::Zero(1)}, AdmmOptions{});
  ASSERT_TRUE(rt.converged);
  EXPECT_NEAR(std::abs(rt.x[0](0) - expect / std::abs(expect)), 0.0, 1e-3);
  EXPECT_NEAR(rt.objective, std::norm(2.0 - 0.5), 1e-3);
}

TEST(AdmmSolve, HugeToleranceStopsAfterOneIteration) {
  std::mt19937_64 rng(6);
  const auto inst = testsupport::random_delivery(rng);
  const AdmmProblem a = testsupport::random_admm_problem(rng, inst.problem);
  AdmmOptions opt;
  opt.tol = 1e300;
  const AdmmResult r = admm_solve(a, testsupport::random_beamformers(rng, inst.problem), opt);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.converged);
}

TEST(AdmmSolve, FeasibleAndMatchesCentralizedOracle) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const auto inst = testsupport::random_delivery(rng);
    const AdmmProblem a = testsupport::random_admm_problem(rng, inst.problem);
    const AdmmResult r = admm_solve(a, Beamformers(a.num_links, CVector::Zero(a.nt)), AdmmOptions{});
    EXPECT_TRUE(r.converged) << "instance " << t;
    EXPECT_LT(r.primal_residual, 1e-4);
    EXPECT_GE(admm_min_slack(a, r.x), -1e-6);
    const double oracle = admm_objective(a, testsupport::centralized_beamformer_oracle(a));
    EXPECT_LE(std::abs(r.objective - oracle), 1e-3 * std::abs(oracle)) << "instance " << t;
  }
}
