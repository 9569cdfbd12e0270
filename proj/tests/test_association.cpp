#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "mecopt/association.hpp"
#include "mecopt/caching.hpp"
#include "test_support.hpp"

using namespace mecopt;

namespace {

ChannelRealization unit_channel(double beta, const CMatrix& h) {
  ChannelRealization ch;
  ch.beta = RMatrix::Constant(1, 1, beta);
  ch.small = {h};
  ch.noise_power = 1.0;
  ch.num_bs = 1;
  return ch;
}

Preferences single_user(double a, double b) {
  Preferences p;
  p.pbar.push_back((RMatrix(1, 2) << a, b).finished());
  p.q.push_back(RVector::Ones(1));
  return p;
}

}  // namespace

TEST(LinkRate, ProxyFormula) {
  const ClusterIndex ci = testsupport::make_clusters({1}, {1});
  CMatrix h = CMatrix::Zero(2, 2);
  h(0, 0) = cd(0.6, 0.0);
  h(1, 1) = cd(0.0, 0.8);
  EXPECT_NEAR(link_rate_matrix(unit_channel(1.0, h), ci, 1.0)[0](0, 0), 1.0, 1e-15);
  EXPECT_EQ(link_rate_matrix(unit_channel(1.0, h), ci, 0.0)[0](0, 0), 0.0);
  EXPECT_GT(link_rate_matrix(unit_channel(2.0, h), ci, 1.0)[0](0, 0),
            link_rate_matrix(unit_channel(1.0, h), ci, 1.0)[0](0, 0));
}

TEST(Threshold, TieAdmitsAndExtremes) {
  const std::vector<RMatrix> r{(RMatrix(2, 2) << 5.0, 4.999, 7.0, 1.0).finished()};
  const RMatrix d = threshold_association(r, 5.0, 4).d[0];
  EXPECT_EQ(d, (RMatrix(2, 2) << 1, 0, 1, 0).finished());
  EXPECT_EQ(threshold_association(r, 0.0, 4).d[0], RMatrix::Ones(2, 2));
  EXPECT_EQ(threshold_association(r, std::numeric_limits<double>::infinity(), 4).d[0], RMatrix::Zero(2, 2));
}

TEST(Threshold, CapDropsLowestRateThenHighestIndex) {
  const std::vector<RMatrix> r{(RMatrix(1, 4) << 3.0, 1.0, 2.0, 1.0).finished()};
  const RMatrix d = threshold_association(r, 0.0, 2).d[0];
  EXPECT_EQ(d, (RMatrix(1, 4) << 1, 0, 1, 0).finished());
  const RMatrix d3 = threshold_association(r, 0.0, 3).d[0];
  EXPECT_EQ(d3, (RMatrix(1, 4) << 1, 1, 1, 0).finished());
}

TEST(ContentAware, HandExamples) {
  const AssociationMatrix base{{RMatrix::Ones(1, 1)}};
  const std::vector<RMatrix> r{RMatrix::Constant(1, 1, 3.0)};
  CachePlacement c;
  c.c.push_back((RMatrix(2, 1) << 1.0, 0.0).finished());
  c.capacity = {{1}};
  EXPECT_EQ(content_aware_association(single_user(1, 0), c, base, r, 4).d[0](0, 0), 1.0);

  // mu = 0 on the only link: the coverage fallback keeps it.
  EXPECT_EQ(content_aware_association(single_user(0, 1), c, base, r, 4).d[0](0, 0), 1.0);

  // With a second BS that caches file 2 the zero-mu link is dropped.
  const AssociationMatrix base2{{RMatrix::Ones(2, 1)}};
  CachePlacement c2;
  c2.c.push_back((RMatrix(2, 2) << 1, 0, 0, 1).finished());
  c2.capacity = {{1, 1}};
  const std::vector<RMatrix> r2{RMatrix::Constant(2, 1, 3.0)};
  EXPECT_EQ(content_aware_association(single_user(0, 1), c2, base2, r2, 4).d[0],
            (RMatrix(2, 1) << 0, 1).finished());
}

TEST(ContentAware, EmptyCacheFallsBackToBestBaseLink) {
  std::mt19937_64 rng(17);
  const ClusterIndex ci = testsupport::make_clusters({3}, {4});
  const AssociationMatrix base{{RMatrix::Ones(3, 4)}};
  const std::vector<RMatrix> r{(RMatrix(3, 4) << 1, 5, 2, 2, 3, 4, 2, 7, 2, 6, 9, 1).finished()};
  const Preferences prefs = sample_preferences(ci, 5, 0.56, 0.5, 1);
  const CachePlacement empty = empty_placement(ci, 5, 2);
  const RMatrix d = content_aware_association(prefs, empty, base, r, 4).d[0];
  EXPECT_EQ(d, (RMatrix(3, 4) << 0, 0, 0, 0, 1, 0, 0, 1, 0, 1, 1, 0).finished());
}

TEST(ContentAware, RestrictsBaseAndKeepsCapProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int nb = testsupport::uniform_int(rng, 1, 4), nu = testsupport::uniform_int(rng, 1, 8), f = 6;
    const int cap = testsupport::uniform_int(rng, 1, 3);
    const ClusterIndex ci = testsupport::make_clusters({nb}, {nu});
    std::vector<RMatrix> r{RMatrix(nb, nu)};
    for (int j = 0; j < nb; ++j)
      for (int k = 0; k < nu; ++k) r[0](j, k) = testsupport::uniform(rng, 0.0, 10.0);
    const AssociationMatrix base = threshold_association(r, 3.0, cap);
    Preferences prefs;
    prefs.pbar.push_back(testsupport::dyadic_stochastic(rng, nu, f));
    prefs.q.push_back(RVector::Ones(nu));
    CachePlacement c;
    c.c.push_back(testsupport::random_binary(rng, f, nb, 0.3));
    c.capacity.assign(1, std::vector<std::uint64_t>(nb, f));
    const RMatrix d = content_aware_association(prefs, c, base, r, cap).d[0];
    for (int j = 0; j < nb; ++j) {
      EXPECT_LE(d.row(j).sum(), cap);
      for (int k = 0; k < nu; ++k) EXPECT_LE(d(j, k), base.d[0](j, k));
    }
    // Only the sign of mu matters.
    Preferences scaled = prefs;
    scaled.pbar[0] *= 0.25;
    EXPECT_EQ(content_aware_association(scaled, c, base, r, cap).d[0], d);
  }
}

TEST(ServingSets, RoundTripFromEitherSide) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const RMatrix d = testsupport::random_binary(rng, testsupport::uniform_int(rng, 1, 5),
                                                 testsupport::uniform_int(rng, 1, 6));
    const ServingSets s = ServingSets::from_matrix(d);
    EXPECT_EQ(s.to_matrix_from_ue_sets(static_cast<int>(d.rows())), d);
    EXPECT_EQ(s.to_matrix_from_bs_sets(static_cast<int>(d.cols())), d);
    for (int j = 0; j < d.rows(); ++j)
      for (int k : s.ue_of_bs[j]) EXPECT_TRUE(s.bs_of_ue[k].count(j));
  }
}

TEST(BackhaulLoad, SumsAndFlags) {
  const AssociationMatrix a{{(RMatrix(2, 2) << 1, 1, 0, 0).finished()}};
  const std::vector<RVector> rates{(RVector(2) << 1.0, 2.0).finished()};
  auto out = backhaul_load(a, rates, {(RVector(2) << 3.0, 1.0).finished()});
  EXPECT_EQ(out.load[0](0), 3.0);
  EXPECT_EQ(out.load[0](1), 0.0);
  EXPECT_TRUE(out.feasible[0][0]);
  EXPECT_TRUE(out.feasible[0][1]);
  out = backhaul_load(a, rates, {(RVector(2) << 2.9, 1.0).finished()});
  EXPECT_FALSE(out.feasible[0][0]);
  EXPECT_THROW(backhaul_load(a, {(RVector(2) << -1.0, 2.0).finished()}, {RVector::Ones(2)}), Error);
}

TEST(BackhaulRepair, DropsSmallestSavingsFirst) {
  Preferences prefs;
  prefs.pbar.push_back((RMatrix(3, 2) << 1, 0, 0.5, 0.5, 0, 1).finished());
  prefs.q.push_back(RVector::Ones(3));
  CachePlacement c;
  c.c.push_back((RMatrix(2, 1) << 1, 0).finished());
  c.capacity = {{1}};
  const AssociationMatrix a{{RMatrix::Ones(1, 3)}};
  const std::vector<RVector> rates{(RVector(3) << 1.0, 1.0, 1.0).finished()};
  const RMatrix d = repair_backhaul(a, prefs, c, rates, {RVector::Constant(1, 2.0)}).d[0];
  EXPECT_EQ(d, (RMatrix(1, 3) << 1, 1, 0).finished());
  const RMatrix d1 = repair_backhaul(a, prefs, c, rates, {RVector::Constant(1, 1.0)}).d[0];
  EXPECT_EQ(d1, (RMatrix(1, 3) << 1, 0, 0).finished());
}
