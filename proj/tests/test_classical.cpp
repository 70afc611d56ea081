#include <gtest/gtest.h>

#include <cmath>

#include "dirnormal/classical.hpp"
#include "dirnormal/errors.hpp"
#include "instances.hpp"
#include "oracles.hpp"

namespace {

using namespace dirnormal;
using testing_support::Instance;
using testing_support::make_instance;

TEST(ChisqTail, ZeroIsOne) { EXPECT_DOUBLE_EQ(chisq_upper_tail(0.0, 3), 1.0); }

TEST(ChisqTail, TwoDegreesClosedForm) {
  EXPECT_NEAR(chisq_upper_tail(2.0 * std::log(20.0), 2), 0.05, 1e-15);
}

TEST(ChisqTail, TenDegreesCriticalValue) { EXPECT_NEAR(chisq_upper_tail(18.307, 10), 0.05, 5e-4); }

TEST(ChisqTail, MatchesSimpsonIntegration) {
  for (int d : {1, 3, 4, 10, 25, 60}) {
    for (double x : {0.5, 2.0, 7.5, 20.0, 55.0}) {
      const double expected = oracle::chisq_tail_simpson(x, d);
      EXPECT_NEAR(chisq_upper_tail(x, d), expected, 1e-9 * expected) << "d=" << d << " x=" << x;
    }
  }
}

TEST(ChisqTail, MonotoneAndInRange) {
  double prev = 1.0;
  for (double x = 0.0; x < 200.0; x += 0.7) {
    const double v = chisq_upper_tail(x, 17);
    EXPECT_LE(v, prev);
    EXPECT_GE(v, 0.0);
    prev = v;
  }
}

class EveryCase : public ::testing::TestWithParam<Case> {};

TEST_P(EveryCase, LrtMatchesExplicitLogLikelihood) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Instance inst = make_instance(GetParam(), 4, 25, seed);
    const double w_oracle = oracle::lrt(inst.ys, inst.hat, inst.psi);
    EXPECT_NEAR(lrt_mle(inst.fit), w_oracle, 1e-8 * std::abs(w_oracle)) << case_name(GetParam());
  }
}

TEST_P(EveryCase, LogGammaMatchesBruteForce) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    for (int p : {1, 2, 3}) {
      const Case c = GetParam();
      if (p < 2 && c != Case::kEqualDistributions && c != Case::kEqualCovariances && c != Case::kSpecifiedMeanCov) {
        continue;
      }
      const Instance inst = make_instance(GetParam(), p, 12, seed);
      const double expected = oracle::log_gamma(inst.ys, inst.hat, inst.psi, inst.d);
      EXPECT_NEAR(skovgaard_log_gamma(inst.fit), expected, 1e-8 * std::max(1.0, std::abs(expected)))
          << case_name(GetParam()) << " p=" << p << " seed=" << seed;
    }
  }
}

TEST_P(EveryCase, GammaPositiveAndWStarNonNegative) {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const Instance inst = make_instance(GetParam(), 5, 30, seed);
    const ClassicalReport r = classical_tests(inst.spec, inst.fit);
    ASSERT_TRUE(r.gamma.has_value());
    EXPECT_GT(*r.gamma, 0.0);
    EXPECT_GE(r.w_star, 0.0);
    EXPECT_GE(r.p_star, 0.0);
    EXPECT_LE(r.p_star, 1.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Cases, EveryCase, ::testing::ValuesIn(testing_support::kAllCases),
                         [](const auto& info) { return std::string(case_name(info.param)); });

TEST(Lrt, EqualCovariancesUsesModifiedEstimators) {
  const Instance inst = make_instance(Case::kEqualCovariances, 3, 20, 3, 3);
  const int k = inst.fit.k();
  Matrix pooled = Matrix::Zero(3, 3);
  int n = 0;
  for (const auto& y : inst.ys) {
    const auto f = oracle::sample_fit(y);
    pooled += f.sigma * static_cast<double>(y.rows());
    n += static_cast<int>(y.rows());
  }
  pooled /= (n - k);
  double expected = 0.0;
  for (const auto& y : inst.ys) {
    const double ni = static_cast<double>(y.rows());
    const Matrix si = oracle::sample_fit(y).sigma * ni / (ni - 1.0);
    expected += -(ni - 1.0) * oracle::log_det_sym(si * oracle::spd_inverse(pooled));
  }
  EXPECT_NEAR(lrt(inst.fit), expected, 1e-9 * std::abs(expected));
  EXPECT_NEAR(lrt_mle(inst.fit), oracle::lrt(inst.ys, inst.hat, inst.psi), 1e-8 * expected);
}

TEST(Lrt, InvariantToPermutationWithinBlocks) {
  Instance inst = make_instance(Case::kBlockIndependence, 5, 30, 4);
  const double w = lrt(inst.fit);
  Matrix y = inst.ys.front();
  y.col(0).swap(y.col(1));  // both inside the first block of size 2
  y.col(3).swap(y.col(4));
  const auto s = summarize(DataMatrix(y));
  const auto fit = constrained_mle(inst.spec, std::vector<SampleSummary>{s});
  EXPECT_NEAR(lrt(fit), w, 1e-10 * w);
}

TEST(Lrt, ProportionalCovarianceGivesZero) {
  // Rows chosen so that the sample covariance is exactly 2 I.
  Matrix y(4, 2);
  y << 2, 0, -2, 0, 0, 2, 0, -2;
  const auto s = summarize(DataMatrix(y), SizeCheck::kNone);
  const auto fit = constrained_mle(HypothesisSpec::proportional_identity(), std::vector<SampleSummary>{s});
  EXPECT_NEAR(lrt(fit), 0.0, 1e-12);
  EXPECT_THROW(skovgaard_log_gamma(fit), DegenerateNull);
  const auto r = classical_tests(HypothesisSpec::proportional_identity(), fit);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.p_lrt, 1.0);
  EXPECT_EQ(r.p_star, 1.0);
}

TEST(Lrt, SpecifiedCaseAtExactNullGivesZero) {
  // Standardized rows with mean 0 and second moment I.
  Matrix y(4, 2);
  const double r = std::sqrt(2.0);
  y << r, 0, -r, 0, 0, r, 0, -r;
  const auto s = summarize(DataMatrix(y), SizeCheck::kNone);
  const auto spec = HypothesisSpec::specified(Vector::Zero(2), SpdMatrix::identity(2));
  const auto fit = constrained_mle(spec, std::vector<SampleSummary>{s});
  EXPECT_NEAR(lrt(fit), 0.0, 1e-12);
  EXPECT_TRUE(is_degenerate(fit));
}

TEST(Lrt, EqualGroupsAreDegenerate) {
  Engine rng(7);
  const Matrix y = oracle::random_normal(15, 2, rng);
  std::vector<SampleSummary> s{summarize(DataMatrix(y)), summarize(DataMatrix(y))};
  const auto fit = constrained_mle(HypothesisSpec::equal_covariances(), s);
  EXPECT_NEAR(lrt_mle(fit), 0.0, 1e-10);
  const auto r = classical_tests(HypothesisSpec::equal_covariances(), fit);
  EXPECT_TRUE(r.degenerate);
}

TEST(Skovgaard, UnitGammaLeavesWUnchanged) {
  const auto s = skovgaard_stats(7.3, 1.0, 4);
  EXPECT_DOUBLE_EQ(s.w_star, 7.3);
  EXPECT_DOUBLE_EQ(s.w_star2, 7.3);
}

TEST(Skovgaard, PlugInValues) {
  const auto s = skovgaard_stats(10.0, std::exp(1.0), 2);
  EXPECT_NEAR(s.w_star2, 8.0, 1e-12);
  EXPECT_NEAR(s.w_star, 8.1, 1e-12);
  EXPECT_NEAR(s.p_star, std::exp(-8.1 / 2.0), 1e-12);
}

TEST(Bartlett, ExpectationEqualToDfIsIdentity) {
  const auto b = bartlett_from_expectation(12.5, 6.0, 6);
  EXPECT_DOUBLE_EQ(b.w_bc, 12.5);
  EXPECT_NEAR(b.p_bc, chisq_upper_tail(12.5, 6), 1e-15);
}

TEST(Bartlett, BootstrapIsDeterministicAndShrinksInflatedW) {
  const Instance inst = make_instance(Case::kProportionalIdentity, 30, 100, 2);
  const auto a = bartlett_bootstrap(inst.spec, inst.fit, 60, 11);
  const auto b = bartlett_bootstrap(inst.spec, inst.fit, 60, 11);
  EXPECT_EQ(a.e_w_hat, b.e_w_hat);
  EXPECT_GT(a.e_w_hat, inst.d);  // W is inflated at p/n = 0.3
  EXPECT_LT(a.w_bc, lrt(inst.fit));
}

TEST(Bartlett, ExpectationNearDfForSmallP) {
  const Instance inst = make_instance(Case::kCompleteIndependence, 2, 500, 5);
  const double e = bootstrap_expected_w(inst.spec, inst.fit, 2000, 3);
  EXPECT_LT(std::abs(e / inst.d - 1.0), 0.05);
}

TEST(Bartlett, RejectsTooFewReplications) {
  const Instance inst = make_instance(Case::kCompleteIndependence, 2, 50, 5);
  EXPECT_THROW(bartlett_bootstrap(inst.spec, inst.fit, 10, 1), Error);
}

}  // namespace
