#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "seqemp/ottaviani.hpp"

using namespace seqemp;

namespace {

PartialSumFamily singletons(std::size_t dim, std::size_t steps, Centering c = Centering::TrueCdf) {
  return {IndexFamily::Singletons, 0.0, std::vector<std::vector<double>>(dim, regular_axis(steps)), c};
}

PartialSumFamily pairs(std::size_t dim, std::size_t steps, double delta) {
  return {IndexFamily::IncrementPairs, delta, std::vector<std::vector<double>>(dim, regular_axis(steps)),
          Centering::TrueCdf};
}

// Floating-point enumeration of the same quantities, for cross-checking.
struct BruteForce {
  double lhs = 0.0, rhs = 0.0;
};

BruteForce brute_force(const std::vector<std::vector<double>>& values, const std::vector<double>& pi,
                       const std::vector<std::vector<double>>* transition, std::size_t n, std::size_t ell, double eps) {
  const std::size_t K = values.size(), T = values[0].size();
  double p_max = 0, p_end = 0, p_block = 0;
  std::vector<double> tail(n + 1, 0.0);
  std::vector<std::size_t> path(n, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= K;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i) {
      path[i] = c % K;
      c /= K;
    }
    double w = pi[path[0]];
    for (std::size_t i = 1; i < n; ++i) w *= transition ? (*transition)[path[i - 1]][path[i]] : pi[path[i]];
    std::vector<std::vector<double>> S(n + 1, std::vector<double>(T, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < T; ++t) S[i + 1][t] = S[i][t] + values[path[i]][t];
    auto nd = [&](std::size_t j, std::size_t k) {
      double m = 0;
      for (std::size_t t = 0; t < T; ++t) m = std::max(m, std::abs(S[k][t] - S[j][t]));
      return m;
    };
    double mx = 0;
    for (std::size_t k = 1; k <= n; ++k) mx = std::max(mx, nd(0, k));
    if (mx > 3 * eps) p_max += w;
    if (nd(0, n) > eps) p_end += w;
    for (std::size_t k = 1; k <= n; ++k)
      if (nd(k, n) > eps) tail[k] += w;
    bool block = false;
    for (std::size_t k = 2; k <= n; ++k)
      for (std::size_t j = 1; j < k; ++j)
        if (k - j <= 2 * ell && nd(j, k) > eps) block = true;
    if (block) p_block += w;
  }
  const double q = *std::max_element(tail.begin() + 1, tail.end());
  return {p_max * (1 - q), p_end + p_block};
}

}  // namespace

TEST(BlockingPlan, DocumentedExample) {
  const auto plan = blocking_plan(10000, 0.8);
  EXPECT_DOUBLE_EQ(plan.kappa, 0.1);
  EXPECT_EQ(plan.ell_n, 39u);
  EXPECT_FALSE(plan.eta_outside_unit_interval);
}

TEST(BlockingPlan, ExactPowersAndLargeEta) {
  const auto plan = blocking_plan(16, 2.0);  // 16^{1/4} = 2
  EXPECT_EQ(plan.ell_n, 2u);
  EXPECT_TRUE(plan.eta_outside_unit_interval);
  EXPECT_EQ(blocking_plan(10000, 4.0).ell_n, 1u);
}

TEST(BlockingPlan, Errors) {
  EXPECT_THROW(blocking_plan(3, 0.5), ParameterError);
  EXPECT_THROW(blocking_plan(100, 0.0), ParameterError);
  EXPECT_THROW(blocking_plan(100, -1.0), ParameterError);
  EXPECT_THROW(blocking_plan(100, 12.0), ParameterError);
}

TEST(BlockingPlan, DecayWitnessDecreases) {
  for (const auto& spec : {SequenceSpec::ar1(0.5), SequenceSpec::mdependent(2), SequenceSpec::iid()}) {
    const MixingProfile profile{spec};
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n : {100, 1000, 10000}) {
      const double w = blocking_plan(n, 0.5).decay_witness(profile);
      EXPECT_LE(w, prev) << spec.describe();
      prev = w;
    }
    EXPECT_LT(prev, 1e-3);
  }
}

TEST(PartialSums, SingleObservation) {
  const StationarySample s({0.5}, 1, SequenceSpec::iid(1), 0);
  const auto fam = singletons(1, 2);  // u in {0, 0.5, 1}
  EXPECT_DOUBLE_EQ(sup_partial_sums(s, fam, 0, 1), 0.5);
  EXPECT_THROW(sup_partial_sums(s, fam, 1, 1), ParameterError);
  EXPECT_THROW(sup_partial_sums(s, fam, 0, 2), ParameterError);
}

TEST(PartialSums, EmpiricalCenteringVanishesAtEnd) {
  const auto s = generate(SequenceSpec::ar1(0.3, 2), 50, 8);
  const PartialSumPath path(s, singletons(2, 5, Centering::EmpiricalCdf));
  EXPECT_LT(path.norm(50), 1e-12);
  EXPECT_GT(path.norm(25), 0.0);
}

TEST(PartialSums, PairsNormIsGridModulus) {
  const auto s = generate(SequenceSpec::iid(2), 40, 3);
  const auto fam = pairs(2, 4, 0.25);
  const PartialSumPath path(s, fam);
  const auto field = eval_sequential(s, Centering::TrueCdf, EvaluationGrid{{0.0, 0.5, 1.0}, fam.u_points});
  // S_k / sqrt(n) at k = n is D_n; k = 20 is s = 0.5.
  const auto last = field.row(2);
  EXPECT_NEAR(path.norm(40), modulus_of_continuity(last, fam.u_points, 0.25), 1e-12);
  const auto mid = field.row(1);
  EXPECT_NEAR(path.norm(20), modulus_of_continuity(mid, fam.u_points, 0.25), 1e-12);
}

// Each step is bounded by n^{-1/2} per index, so increments over windows of
// length 2l are bounded by 2l/sqrt(n) (singletons) and 4l/sqrt(n) (pairs).
TEST(PartialSums, BlockIncrementBounds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t n = 100, ell = 3;
    const auto s = generate(SequenceSpec::mdependent(2, 2), n, seed);
    const double root = std::sqrt(static_cast<double>(n));
    EXPECT_LE(max_block_increment(PartialSumPath(s, singletons(2, 4)), 2 * ell), 2.0 * ell / root + 1e-12);
    EXPECT_LE(max_block_increment(PartialSumPath(s, pairs(2, 4, 0.5)), 2 * ell), 4.0 * ell / root + 1e-12);
  }
}

TEST(MonteCarlo, InequalityHoldsForSeveralSpecs) {
  const std::vector<double> eps{0.1, 0.3, 0.6, 1.0};
  for (const auto& spec : {SequenceSpec::iid(1), SequenceSpec::mdependent(2, 1), SequenceSpec::ar1(0.7, 2)}) {
    const auto reports = verify_inequality_mc(spec, singletons(spec.dim, 8), 64, 4, eps, 200, 11);
    ASSERT_EQ(reports.size(), eps.size());
    for (const auto& r : reports) {
      EXPECT_TRUE(r.pass) << spec.describe() << " eps=" << r.epsilon;
      EXPECT_GE(r.lhs_est.value, 0.0);
      EXPECT_LE(r.lhs_est.value, 1.0);
      EXPECT_NEAR(r.rhs_est.value, r.rhs_term_supS.value + r.rhs_term_block.value + r.rhs_term_mixing, 1e-15);
      EXPECT_FALSE(r.exact);
      EXPECT_EQ(r.reps, 200u);
    }
  }
}

TEST(MonteCarlo, IncrementPairsAndIndependentInner) {
  McOptions opt;
  opt.independent_inner = true;
  const auto reports = verify_inequality_mc(SequenceSpec::iid(2), pairs(2, 4, 0.25), 48, 3, {0.2, 0.5}, 150, 2, opt);
  for (const auto& r : reports) EXPECT_TRUE(r.pass);
}

TEST(MonteCarlo, Deterministic) {
  const auto a = verify_inequality_mc(SequenceSpec::ar1(0.4), singletons(1, 6), 32, 2, {0.4}, 120, 5);
  const auto b = verify_inequality_mc(SequenceSpec::ar1(0.4), singletons(1, 6), 32, 2, {0.4}, 120, 5, McOptions{3});
  EXPECT_EQ(a[0].lhs_est.value, b[0].lhs_est.value);
  EXPECT_EQ(a[0].rhs_est.value, b[0].rhs_est.value);
}

TEST(MonteCarlo, Errors) {
  const auto fam = singletons(1, 4);
  EXPECT_THROW(verify_inequality_mc(SequenceSpec::iid(), fam, 20, 0, {0.1}, 100, 1), ParameterError);
  EXPECT_THROW(verify_inequality_mc(SequenceSpec::iid(), fam, 20, 20, {0.1}, 100, 1), ParameterError);
  EXPECT_THROW(verify_inequality_mc(SequenceSpec::iid(), fam, 20, 2, {0.0}, 100, 1), ParameterError);
  EXPECT_THROW(verify_inequality_mc(SequenceSpec::iid(), fam, 20, 2, {0.1}, 99, 1), ParameterError);
}

TEST(Exact, TwoSymmetricSteps) {
  const auto model = FiniteStepModel::independent({{1}, {-1}}, {Rational(1, 2), Rational(1, 2)});
  const auto res = verify_inequality_exact(model, 2, 1, 0.4);
  EXPECT_EQ(res.lhs, Rational(0));
  EXPECT_EQ(res.rhs, Rational(3, 2));
  EXPECT_TRUE(res.holds);
  EXPECT_TRUE(res.report.exact);
  EXPECT_EQ(res.report.alpha_ell, 0.0);
}

TEST(Exact, ZeroStepsGiveZeroBothSides) {
  const auto model = FiniteStepModel::independent({{0, 0}}, {Rational(1)});
  const auto res = verify_inequality_exact(model, 6, 2, 0.5);
  EXPECT_EQ(res.lhs, 0);
  EXPECT_EQ(res.rhs, 0);
  EXPECT_TRUE(res.holds);
}

TEST(Exact, TinyEpsilon) {
  const auto model = FiniteStepModel::independent({{1, 0}, {0, -1}, {0, 0}}, {Rational(1, 3), Rational(1, 3), Rational(1, 3)});
  for (std::size_t n : {3, 5, 8}) {
    const auto res = verify_inequality_exact(model, n, 1, 1e-9);
    EXPECT_TRUE(res.holds) << n;
  }
}

TEST(Exact, MarkovAlphaClosedForm) {
  // Symmetric two-state chain with second eigenvalue 1/2: alpha_l = 2^{-l} / 4.
  const auto model = FiniteStepModel::markov({{1}, {-1}}, {{Rational(3, 4), Rational(1, 4)}, {Rational(1, 4), Rational(3, 4)}});
  const auto pi = model.stationary();
  EXPECT_EQ(pi[0], Rational(1, 2));
  for (std::size_t ell = 1; ell <= 5; ++ell) EXPECT_EQ(model.alpha(ell), Rational(1, 4 << ell)) << ell;
  EXPECT_EQ(model.alpha(0), Rational(1, 2));
}

TEST(Exact, MarkovStationaryThreeStates) {
  const auto model = FiniteStepModel::markov(
      {{1}, {0}, {-2}},
      {{Rational(1, 2), Rational(1, 2), 0}, {Rational(1, 4), Rational(1, 2), Rational(1, 4)}, {0, Rational(1, 3), Rational(2, 3)}});
  const auto pi = model.stationary();
  for (std::size_t j = 0; j < 3; ++j) {
    Rational acc = 0;
    for (std::size_t i = 0; i < 3; ++i) acc += pi[i] * model.transition[i][j];
    EXPECT_EQ(acc, pi[j]);
  }
}

TEST(Exact, AgreesWithFloatingEnumeration) {
  const std::vector<std::vector<std::int64_t>> vals{{2, -1}, {-1, 1}, {0, 1}};
  const std::vector<std::vector<double>> dvals{{2, -1}, {-1, 1}, {0, 1}};
  const auto iid = FiniteStepModel::independent(vals, {Rational(1, 5), Rational(1, 2), Rational(3, 10)});
  const std::vector<std::vector<Rational>> P{{Rational(1, 2), Rational(1, 4), Rational(1, 4)},
                                             {Rational(1, 3), Rational(1, 3), Rational(1, 3)},
                                             {Rational(1, 10), Rational(1, 10), Rational(4, 5)}};
  const auto mk = FiniteStepModel::markov(vals, P);
  std::vector<std::vector<double>> Pd(3, std::vector<double>(3));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) Pd[i][j] = P[i][j].convert_to<double>();
  std::vector<double> pi_mk;
  for (const auto& p : mk.stationary()) pi_mk.push_back(p.convert_to<double>());
  for (double eps : {0.5, 1.0, 1.7}) {
    for (std::size_t n : {4, 7}) {
      const auto a = verify_inequality_exact(iid, n, 2, eps);
      const auto fa = brute_force(dvals, {0.2, 0.5, 0.3}, nullptr, n, 2, eps);
      EXPECT_NEAR(a.report.lhs_est.value, fa.lhs, 1e-12);
      EXPECT_NEAR(a.report.rhs_term_supS.value + a.report.rhs_term_block.value, fa.rhs, 1e-12);
      EXPECT_TRUE(a.holds);
      const auto b = verify_inequality_exact(mk, n, 1, eps);
      const auto fb = brute_force(dvals, pi_mk, &Pd, n, 1, eps);
      EXPECT_NEAR(b.report.lhs_est.value, fb.lhs, 1e-12);
      EXPECT_NEAR(b.report.rhs_term_supS.value + b.report.rhs_term_block.value, fb.rhs, 1e-12);
      EXPECT_TRUE(b.holds);
    }
  }
}

TEST(Exact, Limits) {
  const auto model = FiniteStepModel::independent({{1}, {-1}}, {Rational(1, 2), Rational(1, 2)});
  EXPECT_THROW(verify_inequality_exact(model, 13, 1, 0.5), ParameterError);
  EXPECT_NO_THROW(verify_inequality_exact(model, 12, 1, 0.5));
  EXPECT_THROW(verify_inequality_exact(model, 4, 4, 0.5), ParameterError);
  EXPECT_THROW(verify_inequality_exact(model, 4, 1, 0.0), ParameterError);
  EXPECT_THROW(FiniteStepModel::independent({{1}, {2}, {3}, {4}}, {Rational(1, 4), Rational(1, 4), Rational(1, 4), Rational(1, 4)}),
               ParameterError);
  EXPECT_THROW(FiniteStepModel::independent({{1}, {2}}, {Rational(1, 2), Rational(1, 3)}), ParameterError);
}
