#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "seqemp/generators.hpp"
#include "seqemp/stats.hpp"

using namespace seqemp;

namespace {

std::vector<SequenceSpec> all_specs() {
  return {SequenceSpec::iid(1),
          SequenceSpec::iid(2).with_equicorrelation(0.4),
          SequenceSpec::mdependent(2, 1),
          SequenceSpec::mdependent(1, 2).with_equicorrelation(0.6),
          SequenceSpec::ar1(0.5, 1),
          SequenceSpec::ar1(-0.7, 2).with_equicorrelation(0.3)};
}

std::vector<double> column(const StationarySample& s, std::size_t j, std::size_t stride = 1) {
  std::vector<double> out;
  for (std::size_t i = 0; i < s.n(); i += stride) out.push_back(s.at(i, j));
  return out;
}

}  // namespace

TEST(Generate, DeterministicGivenSeed) {
  const auto spec = SequenceSpec::iid(1);
  const auto a = generate(spec, 3, 42);
  const auto b = generate(spec, 3, 42);
  ASSERT_EQ(a.n(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_GE(a.at(i, 0), 0.0);
    EXPECT_LE(a.at(i, 0), 1.0);
    EXPECT_EQ(a.at(i, 0), b.at(i, 0));
  }
  for (const auto& s : all_specs()) {
    const auto x = generate(s, 50, 7), y = generate(s, 50, 7), z = generate(s, 50, 8);
    EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), y.data().begin())) << s.describe();
    EXPECT_FALSE(std::equal(x.data().begin(), x.data().end(), z.data().begin())) << s.describe();
  }
}

TEST(Generate, EntriesInUnitInterval) {
  for (const auto& s : all_specs()) {
    const auto x = generate(s, 2000, 3);
    for (double v : x.data()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Generate, InvalidSpecRejected) {
  EXPECT_THROW(generate(SequenceSpec::ar1(1.0), 10, 1), ParameterError);
  EXPECT_THROW(generate(SequenceSpec::ar1(-1.5), 10, 1), ParameterError);
  EXPECT_THROW(generate(SequenceSpec::mdependent(0), 10, 1), ParameterError);
  EXPECT_THROW(generate(SequenceSpec::iid(0), 10, 1), ParameterError);
  EXPECT_THROW(generate(SequenceSpec::iid(2).with_equicorrelation(1.0), 10, 1), ParameterError);
  EXPECT_THROW(generate(SequenceSpec::iid(1), 0, 1), ParameterError);
}

// Gaussian AR(1) with phi = 0 is an iid sequence of Phi(Z) = Uniform draws.
TEST(Generate, Ar1WithZeroPhiMatchesIid) {
  const std::size_t N = 100000;
  const auto a = generate(SequenceSpec::ar1(0.0), N, 11);
  const auto b = generate(SequenceSpec::iid(1), N, 12);
  const double d = stats::ks_two_sample(column(a, 0), column(b, 0));
  EXPECT_LT(d, stats::ks_two_sample_critical(N, N, 0.01));
}

// Marginal uniformity. KS critical values assume independent observations, so
// dependent specs are checked on a subsequence spaced beyond the dependence
// range (m + 1 for m-dependence; |phi|^h < 1e-4 for AR(1)).
TEST(Generate, MarginalsAreUniform) {
  const std::size_t n = 10000;
  for (const auto& s : all_specs()) {
    std::size_t stride = 1;
    if (s.family == Family::MDependent) stride = static_cast<std::size_t>(s.m) + 1;
    if (s.family == Family::GaussCopulaAR1)
      stride = static_cast<std::size_t>(std::ceil(std::log(1e-4) / std::log(std::abs(s.phi))));
    int passed = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto x = generate(s, n * stride, 1000 + seed);
      for (std::size_t j = 0; j < s.dim; ++j) {
        ++total;
        passed += stats::ks_uniform(column(x, j, stride)) < stats::ks_uniform_critical(n, 0.01);
      }
    }
    EXPECT_GE(static_cast<double>(passed), 0.95 * total) << s.describe();
  }
}

// Stationarity: across independent seeds, functionals of (U_i, U_{i+1}) have
// the same law at the start and at the end of the sequence.
TEST(Generate, StationaryAcrossTime) {
  const std::size_t reps = 3000, n = 40;
  for (const auto& s : all_specs()) {
    std::vector<double> head_marg, tail_marg, head_lag, tail_lag;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto x = generate(s, n, 5000 + r);
      head_marg.push_back(x.at(0, 0));
      tail_marg.push_back(x.at(n - 1, 0));
      head_lag.push_back(x.at(0, 0) * x.at(1, 0));
      tail_lag.push_back(x.at(n - 2, 0) * x.at(n - 1, 0));
    }
    const double crit = stats::ks_two_sample_critical(reps, reps, 0.001);
    EXPECT_LT(stats::ks_two_sample(head_marg, tail_marg), crit) << s.describe();
    EXPECT_LT(stats::ks_two_sample(head_lag, tail_lag), crit) << s.describe();
  }
}

TEST(TrueCdf, ProductFormAndBoundaries) {
  const auto indep = SequenceSpec::iid(2);
  EXPECT_DOUBLE_EQ(true_cdf(indep, std::vector<double>{0.5, 0.5}), 0.25);
  for (const auto& s : all_specs()) {
    const std::vector<double> ones(s.dim, 1.0);
    EXPECT_NEAR(true_cdf(s, ones), 1.0, 1e-15) << s.describe();
    std::vector<double> zero(s.dim, 0.7);
    zero[0] = 0.0;
    EXPECT_EQ(true_cdf(s, zero), 0.0) << s.describe();
  }
  const auto rho0 = SequenceSpec::iid(2).with_equicorrelation(0.0);
  EXPECT_NEAR(true_cdf(rho0, std::vector<double>{0.3, 0.7}), 0.21, 1e-15);
}

// Orthant probabilities of equicorrelated normals:
//   d = 2: 1/4 + asin(rho)/(2 pi);  d = 3: 1/8 + 3 asin(rho)/(4 pi).
TEST(TrueCdf, GaussianCopulaMatchesOrthantFormulas) {
  for (double rho : {0.1, 0.5, 0.9}) {
    const auto s2 = SequenceSpec::iid(2).with_equicorrelation(rho);
    const auto s3 = SequenceSpec::iid(3).with_equicorrelation(rho);
    EXPECT_NEAR(true_cdf(s2, std::vector<double>{0.5, 0.5}), 0.25 + std::asin(rho) / (2 * std::numbers::pi), 1e-10);
    EXPECT_NEAR(true_cdf(s3, std::vector<double>{0.5, 0.5, 0.5}), 0.125 + 3 * std::asin(rho) / (4 * std::numbers::pi),
                1e-10);
  }
}

// Frequency of {U_1 <= u} over independent single-row draws.
TEST(TrueCdf, AgreesWithSimulatedFrequencies) {
  const std::size_t reps = 60000;
  const std::vector<double> u{0.35, 0.8};
  for (const auto& s : {SequenceSpec::mdependent(2, 2).with_equicorrelation(0.6),
                        SequenceSpec::ar1(0.4, 2).with_equicorrelation(0.3), SequenceSpec::iid(2)}) {
    std::size_t hits = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto x = generate(s, 1, 90000 + r);
      hits += (x.at(0, 0) <= u[0] && x.at(0, 1) <= u[1]);
    }
    const double p = true_cdf(s, u);
    const double freq = static_cast<double>(hits) / reps;
    EXPECT_NEAR(freq, p, 4.0 * stats::proportion_se(p, reps)) << s.describe();
  }
}

TEST(TrueCdf, OutsideCubeIsDomainError) {
  const auto s = SequenceSpec::iid(2);
  EXPECT_THROW(true_cdf(s, std::vector<double>{1.2, 0.5}), DomainError);
  EXPECT_THROW(true_cdf(s, std::vector<double>{-0.1, 0.5}), DomainError);
  EXPECT_THROW(true_cdf(s, std::vector<double>{0.5}), DomainError);
}

TEST(MixingBound, DocumentedValues) {
  EXPECT_EQ(mixing_bound(SequenceSpec::iid(), 1), 0.0);
  EXPECT_DOUBLE_EQ(mixing_bound(SequenceSpec::ar1(0.5), 4), 0.0625);
  EXPECT_EQ(mixing_bound(SequenceSpec::mdependent(3), 3), 0.25);
  EXPECT_EQ(mixing_bound(SequenceSpec::mdependent(3), 4), 0.0);
  for (const auto& s : all_specs()) {
    const MixingProfile profile{s};
    EXPECT_EQ(profile(0), 0.5);
    for (std::size_t ell = 1; ell < 40; ++ell) {
      EXPECT_LE(profile(ell), profile(ell - 1));
      EXPECT_GE(profile(ell), 0.0);
      EXPECT_LE(profile(ell), 0.5);
    }
  }
}
