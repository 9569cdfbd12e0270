#include <gtest/gtest.h>

#include <sstream>

#include "mecopt/popularity.hpp"
#include "test_support.hpp"

using namespace mecopt;

TEST(Zipf, FormulaPoints) {
  const RVector u = zipf_pmf(20, 0.0);
  for (int n = 0; n < 20; ++n) EXPECT_NEAR(u(n), 0.05, 1e-15);
  const RVector two = zipf_pmf(2, 1.0);
  EXPECT_NEAR(two(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(two(1), 1.0 / 3.0, 1e-15);
  const RVector p = zipf_pmf(20, 0.56);
  EXPECT_NEAR(p(0) / p(19), std::pow(20.0, 0.56), 1e-12);
  EXPECT_NEAR(p(0) / p(19), 5.35, 5e-3);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  for (int n = 1; n < 20; ++n) EXPECT_LT(p(n), p(n - 1));
  EXPECT_THROW(zipf_pmf(0, 1.0), Error);
  EXPECT_THROW(zipf_pmf(3, -0.1), Error);
}

TEST(Preferences, SharedRankingAtZeroHeterogeneity) {
  const ClusterIndex ci = testsupport::make_clusters({1, 1}, {3, 2});
  const Preferences prefs = sample_preferences(ci, 6, 0.8, 0.0, 11);
  const RVector z = zipf_pmf(6, 0.8);
  for (const auto& p : prefs.pbar)
    for (int k = 0; k < p.rows(); ++k)
      for (int n = 0; n < 6; ++n) EXPECT_NEAR(p(k, n), z(n), 1e-15);
}

TEST(Preferences, FullHeterogeneityIsSymmetricAcrossFiles) {
  const ClusterIndex ci = testsupport::make_clusters({1}, {10000});
  const Preferences prefs = sample_preferences(ci, 5, 0.56, 1.0, 3);
  const RVector mean = prefs.pbar[0].colwise().mean().transpose();
  for (int n = 0; n < 5; ++n) EXPECT_NEAR(mean(n), 0.2, 0.01);
  for (int k = 0; k < prefs.pbar[0].rows(); ++k) ASSERT_NEAR(prefs.pbar[0].row(k).sum(), 1.0, 1e-12);
}

TEST(Preferences, RowsSumToOneAndRatesDefaultToOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ClusterIndex ci = testsupport::make_clusters({2, 1}, {4, 3});
    const Preferences prefs = sample_preferences(ci, 20, 0.56, 0.5, seed);
    for (int i = 0; i < prefs.num_clusters(); ++i) {
      EXPECT_EQ(prefs.q[i], RVector::Ones(prefs.pbar[i].rows()));
      for (int k = 0; k < prefs.pbar[i].rows(); ++k) EXPECT_NEAR(prefs.pbar[i].row(k).sum(), 1.0, 1e-12);
    }
  }
}

TEST(BsPopularity, HandExamples) {
  Preferences prefs;
  prefs.pbar.push_back((RMatrix(2, 2) << 0.8, 0.2, 0.2, 0.8).finished());
  prefs.q.push_back(RVector::Ones(2));
  AssociationMatrix assoc;
  assoc.d.push_back(RMatrix::Ones(1, 2));
  RMatrix p = bs_popularity(prefs, assoc)[0];
  EXPECT_NEAR(p(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.5, 1e-15);

  prefs.q[0] << 3.0, 1.0;
  p = bs_popularity(prefs, assoc)[0];
  EXPECT_NEAR(p(0, 0), 0.65, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.35, 1e-15);
}

TEST(BsPopularity, SingleUserAndEmptyBs) {
  Preferences prefs;
  prefs.pbar.push_back((RMatrix(1, 3) << 0.5, 0.25, 0.25).finished());
  prefs.q.push_back(RVector::Ones(1));
  AssociationMatrix assoc;
  assoc.d.push_back((RMatrix(2, 1) << 1.0, 0.0).finished());
  const RMatrix p = bs_popularity(prefs, assoc)[0];
  EXPECT_EQ(RMatrix(p.row(0)), prefs.pbar[0]);
  EXPECT_EQ(p.row(1).sum(), 0.0);
}

TEST(Requests, DegenerateRowAndDeterminism) {
  const ClusterIndex ci = testsupport::make_clusters({1}, {2});
  Preferences prefs;
  prefs.pbar.push_back((RMatrix(2, 4) << 0, 0, 1, 0, 0.25, 0.25, 0.25, 0.25).finished());
  prefs.q.push_back(RVector::Ones(2));
  for (std::uint64_t d = 0; d < 50; ++d) {
    const auto a = sample_request_profile(prefs, ci, 5, d);
    EXPECT_EQ(a[0][0], 2);
    EXPECT_EQ(a, sample_request_profile(prefs, ci, 5, d));
  }
}

TEST(Requests, EmpiricalFrequenciesMatchRow) {
  const ClusterIndex ci = testsupport::make_clusters({1}, {1});
  Preferences prefs;
  prefs.pbar.push_back((RMatrix(1, 4) << 0.1, 0.2, 0.3, 0.4).finished());
  prefs.q.push_back(RVector::Ones(1));
  RVector freq = RVector::Zero(4);
  const int n = 100000;
  for (int d = 0; d < n; ++d) freq(sample_request_profile(prefs, ci, 9, d)[0][0]) += 1.0;
  freq /= n;
  for (int f = 0; f < 4; ++f) EXPECT_NEAR(freq(f), prefs.pbar[0](0, f), 0.01);
}

TEST(PreferencesCsv, RoundTripAndValidation) {
  const ClusterIndex ci = testsupport::make_clusters({1, 1}, {2, 3});
  const Preferences prefs = sample_preferences(ci, 7, 0.56, 0.7, 2);
  std::stringstream ss;
  write_preferences_csv(ss, prefs, ci);
  const Preferences back = read_preferences_csv(ss, ci, 7);
  for (int i = 0; i < 2; ++i) EXPECT_EQ(back.pbar[i], prefs.pbar[i]);

  std::stringstream bad("user_id,file_id,prob\n0,0,0.5\n");
  EXPECT_THROW(read_preferences_csv(bad, ci, 7), Error);
  std::stringstream unknown("user_id,file_id,prob\n9,0,1\n");
  EXPECT_THROW(read_preferences_csv(unknown, ci, 7), Error);
}
