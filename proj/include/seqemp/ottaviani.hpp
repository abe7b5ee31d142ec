#pragma once

// Ottaviani-type maximal inequality for partial sums of a strongly mixing
// sequence. For an index set T, Y_i(t) = G_i(X_i, t), S_k = Y_1 + ... + Y_k,
// S_0 = 0 and ||f|| = sup_{t in T} |f(t)|, for every eps > 0 and 1 <= l < n:
//
//   P(max_k ||S_k|| > 3 eps) * {1 - max_k P(||S_n - S_k|| > eps)}
//     <= P(||S_n|| > eps)
//      + P(max_{1 <= j < k <= n, k - j <= 2l} ||S_k - S_j|| > eps)
//      + floor(n/l) * alpha_l.
//
// Two verifiers check it: total enumeration over finite-alphabet step
// sequences in exact rational arithmetic, and Monte Carlo over the empirical
// process increments of a generated sample.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "seqemp/empirical.hpp"
#include "seqemp/error.hpp"
#include "seqemp/generators.hpp"
#include "seqemp/parallel.hpp"
#include "seqemp/rng.hpp"
#include "seqemp/stats.hpp"

namespace seqemp {

using Rational = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------------------
// Blocking plan: kappa = eta/8, ell_n = floor(n^{1/2 - kappa}).

struct BlockingPlan {
  double eta = 0.0;
  double kappa = 0.0;
  std::size_t ell_n = 1;
  std::size_t n = 0;
  // The blocking argument assumes eta in (0,1); larger eta is accepted.
  bool eta_outside_unit_interval = false;

  // floor(n / ell_n) * alpha_{ell_n}; tends to zero under the rate hypothesis.
  double decay_witness(const MixingProfile& profile) const {
    return static_cast<double>(n / ell_n) * profile(ell_n);
  }
};

inline BlockingPlan blocking_plan(std::size_t n, double eta) {
  if (n < 4) throw ParameterError("blocking plan needs n >= 4");
  if (!(eta > 0.0)) throw ParameterError("eta must be > 0");
  BlockingPlan plan;
  plan.eta = eta;
  plan.kappa = eta / 8.0;
  plan.n = n;
  plan.eta_outside_unit_interval = eta >= 1.0;
  const double raw = std::pow(static_cast<double>(n), 0.5 - plan.kappa);
  double fl = std::floor(raw);
  // pow may land a hair below an exact integer power.
  if (fl + 1.0 - raw < 1e-9) fl += 1.0;
  if (fl < 1.0 || fl >= static_cast<double>(n)) throw ParameterError("blocking length outside [1, n)");
  plan.ell_n = static_cast<std::size_t>(fl);
  return plan;
}

// ---------------------------------------------------------------------------
// Empirical-process partial sums.

enum class IndexFamily { Singletons, IncrementPairs };

// T = lattice points u (Singletons), or pairs (u, v) of lattice points with
// ||u - v||_inf <= delta (IncrementPairs, G_i(u,v) = increment at u minus
// increment at v). Y_i(t) = n^{-1/2} G_i(t).
struct PartialSumFamily {
  IndexFamily kind = IndexFamily::Singletons;
  double delta = 0.0;
  std::vector<std::vector<double>> u_points;
  Centering centering = Centering::TrueCdf;
};

// S_k(u) for k = 0..n on the lattice, stored as an (n+1) x |lattice| table.
class PartialSumPath {
 public:
  PartialSumPath(const StationarySample& sample, const PartialSumFamily& family)
      : family_(family), lattice_(family.u_points), n_(sample.n()) {
    if (lattice_.dim() != sample.dim()) throw ParameterError("family lattice does not match the sample dimension");
    if (family.kind == IndexFamily::IncrementPairs && !(family.delta >= 0.0))
      throw ParameterError("increment pairs need delta >= 0");
    const std::size_t P = lattice_.size();
    const std::vector<double> c = centering_values(sample, family.centering, lattice_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_));
    sums_.assign((n_ + 1) * P, 0.0);
    std::vector<double> point(lattice_.dim());
    std::vector<double> step(P);
    for (std::size_t idx = 0; idx < P; ++idx) {
      lattice_.point(idx, point);
      points_.push_back(point);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      const auto row = sample.row(i);
      for (std::size_t idx = 0; idx < P; ++idx) {
        bool below = true;
        for (std::size_t j = 0; j < row.size() && below; ++j) below = row[j] <= points_[idx][j];
        sums_[(i + 1) * P + idx] = sums_[i * P + idx] + ((below ? 1.0 : 0.0) - c[idx]) * scale;
      }
    }
  }

  std::size_t n() const noexcept { return n_; }

  // ||S_k - S_j||, 0 <= j, k <= n.
  double norm_diff(std::size_t j, std::size_t k) const {
    if (j > n_ || k > n_) throw ParameterError("partial-sum index out of range");
    const std::size_t P = lattice_.size();
    const double* a = sums_.data() + k * P;
    const double* b = sums_.data() + j * P;
    if (family_.kind == IndexFamily::Singletons) {
      double m = 0.0;
      for (std::size_t idx = 0; idx < P; ++idx) m = std::max(m, std::abs(a[idx] - b[idx]));
      return m;
    }
    diff_.resize(P);
    for (std::size_t idx = 0; idx < P; ++idx) diff_[idx] = a[idx] - b[idx];
    // sup over pairs within delta of |D(u) - D(v)| is the grid modulus of D.
    return modulus_of_continuity(diff_, lattice_.axes(), family_.delta);
  }

  double norm(std::size_t k) const { return norm_diff(0, k); }

 private:
  PartialSumFamily family_;
  Lattice lattice_;
  std::size_t n_;
  std::vector<std::vector<double>> points_;
  std::vector<double> sums_;
  mutable std::vector<double> diff_;
};

// sup_t |S_k(t) - S_j(t)|, 0 <= j < k <= n.
inline double sup_partial_sums(const StationarySample& sample, const PartialSumFamily& family, std::size_t j,
                               std::size_t k) {
  if (!(j < k && k <= sample.n())) throw ParameterError("need 0 <= j < k <= n");
  return PartialSumPath(sample, family).norm_diff(j, k);
}

// max ||S_k - S_j|| over 1 <= j < k <= n with k - j <= window.
inline double max_block_increment(const PartialSumPath& path, std::size_t window) {
  double m = 0.0;
  for (std::size_t k = 2; k <= path.n(); ++k)
    for (std::size_t j = (k > window ? k - window : 1); j < k; ++j) m = std::max(m, path.norm_diff(j, k));
  return m;
}

// ---------------------------------------------------------------------------
// Reports.

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct InequalityReport {
  double epsilon = 0.0;
  std::size_t ell = 1;
  std::size_t n = 0;
  std::size_t reps = 0;  // 0 for exact enumeration

  Estimate max_exceed;       // P(max_k ||S_k|| > 3 eps)
  Estimate denominator_est;  // 1 - max_k P(||S_n - S_k|| > eps)
  Estimate lhs_est;          // product of the two above
  Estimate rhs_term_supS;    // P(||S_n|| > eps)
  Estimate rhs_term_block;   // P(max_{k-j <= 2l} ||S_k - S_j|| > eps)
  double alpha_ell = 0.0;
  double rhs_term_mixing = 0.0;  // floor(n/l) * alpha_l
  Estimate rhs_est;
  double combined_se = 0.0;
  bool exact = false;
  bool pass = false;
};

// ---------------------------------------------------------------------------
// Monte Carlo verification on generated samples.

struct McOptions {
  std::size_t threads = 1;
  // Estimate the inner factor max_k P(||S_n - S_k|| > eps) from a second,
  // independent set of replications instead of reusing the first.
  bool independent_inner = false;
  double se_multiplier = 3.0;
};

namespace detail {

struct ReplicationSummary {
  double max_norm = 0.0;    // max_{k=1..n} ||S_k||
  double end_norm = 0.0;    // ||S_n||
  double block_max = 0.0;   // max_{k-j <= 2l} ||S_k - S_j||
  std::vector<double> tail; // ||S_n - S_k||, k = 1..n
};

inline ReplicationSummary summarize(const PartialSumPath& path, std::size_t ell) {
  ReplicationSummary out;
  const std::size_t n = path.n();
  out.tail.resize(n);
  for (std::size_t k = 1; k <= n; ++k) {
    out.max_norm = std::max(out.max_norm, path.norm(k));
    out.tail[k - 1] = path.norm_diff(k, n);
  }
  out.end_norm = path.norm(n);
  out.block_max = max_block_increment(path, 2 * ell);
  return out;
}

}  // namespace detail

// One report per epsilon; all cells share the same replications. Pass iff
// LHS <= RHS + se_multiplier * sqrt(se_lhs^2 + se_rhs^2), standard errors by
// the delta method with covariances between the terms ignored.
inline std::vector<InequalityReport> verify_inequality_mc(const SequenceSpec& spec, const PartialSumFamily& family,
                                                          std::size_t n, std::size_t ell,
                                                          const std::vector<double>& epsilons, std::size_t reps,
                                                          std::uint64_t seed, const McOptions& opt = {}) {
  spec.validate();
  if (!(ell >= 1 && ell < n)) throw ParameterError("need 1 <= ell < n");
  if (reps < 100) throw ParameterError("Monte Carlo verification needs reps >= 100");
  for (double e : epsilons)
    if (!(e > 0.0)) throw ParameterError("epsilon must be > 0");

  auto run = [&](std::uint64_t set_seed) {
    return parallel_map(reps, opt.threads, [&](std::size_t r) {
      const auto sample = generate(spec, n, derive_seed(set_seed, r));
      return detail::summarize(PartialSumPath(sample, family), ell);
    });
  };
  const auto main_set = run(seed);
  const auto inner_set = opt.independent_inner ? run(derive_seed(seed, 0x1AA3)) : std::vector<detail::ReplicationSummary>{};
  const auto& inner = opt.independent_inner ? inner_set : main_set;

  const double alpha = mixing_bound(spec, ell);
  const double mixing = static_cast<double>(n / ell) * alpha;
  const double R = static_cast<double>(reps);

  std::vector<InequalityReport> reports;
  for (double eps : epsilons) {
    InequalityReport rep;
    rep.epsilon = eps;
    rep.ell = ell;
    rep.n = n;
    rep.reps = reps;
    rep.alpha_ell = alpha;
    rep.rhs_term_mixing = mixing;

    std::size_t n_max = 0, n_end = 0, n_block = 0;
    for (const auto& s : main_set) {
      n_max += s.max_norm > 3.0 * eps;
      n_end += s.end_norm > eps;
      n_block += s.block_max > eps;
    }
    std::vector<std::size_t> tail_counts(n, 0);
    for (const auto& s : inner)
      for (std::size_t k = 0; k < n; ++k) tail_counts[k] += s.tail[k] > eps;
    const std::size_t worst_tail = *std::max_element(tail_counts.begin(), tail_counts.end());

    const double p_max = static_cast<double>(n_max) / R;
    const double q = static_cast<double>(worst_tail) / R;
    rep.max_exceed = {p_max, stats::proportion_se(p_max, reps)};
    rep.denominator_est = {1.0 - q, stats::proportion_se(q, reps)};
    const double lhs = p_max * (1.0 - q);
    const double lhs_se = std::hypot((1.0 - q) * rep.max_exceed.se, p_max * rep.denominator_est.se);
    rep.lhs_est = {lhs, lhs_se};

    const double p_end = static_cast<double>(n_end) / R, p_block = static_cast<double>(n_block) / R;
    rep.rhs_term_supS = {p_end, stats::proportion_se(p_end, reps)};
    rep.rhs_term_block = {p_block, stats::proportion_se(p_block, reps)};
    rep.rhs_est = {p_end + p_block + mixing, std::hypot(rep.rhs_term_supS.se, rep.rhs_term_block.se)};
    rep.combined_se = std::hypot(lhs_se, rep.rhs_est.se);
    rep.pass = lhs <= rep.rhs_est.value + opt.se_multiplier * rep.combined_se;
    reports.push_back(rep);
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Exact verification by total enumeration.

// Step sequence over a finite alphabet of at most three outcomes. Outcome x
// contributes the integer vector values[x] (one entry per t in T). Steps are
// iid with the given probabilities, or a stationary Markov chain with the
// given transition matrix started from its stationary law.
struct FiniteStepModel {
  enum class Kind { Independent, Markov };

  Kind kind = Kind::Independent;
  std::vector<std::vector<std::int64_t>> values;
  std::vector<Rational> probabilities;              // Independent
  std::vector<std::vector<Rational>> transition;    // Markov, rows sum to 1

  static FiniteStepModel independent(std::vector<std::vector<std::int64_t>> values, std::vector<Rational> probs) {
    FiniteStepModel m{Kind::Independent, std::move(values), std::move(probs), {}};
    m.validate();
    return m;
  }
  static FiniteStepModel markov(std::vector<std::vector<std::int64_t>> values,
                                std::vector<std::vector<Rational>> transition) {
    FiniteStepModel m{Kind::Markov, std::move(values), {}, std::move(transition)};
    m.validate();
    return m;
  }

  std::size_t alphabet() const noexcept { return values.size(); }
  std::size_t index_count() const noexcept { return values.empty() ? 0 : values.front().size(); }

  void validate() const {
    if (values.empty() || values.size() > 3) throw ParameterError("alphabet size must be 1, 2 or 3");
    for (const auto& v : values)
      if (v.size() != values.front().size() || v.empty()) throw ParameterError("ragged or empty outcome values");
    auto check_distribution = [&](const std::vector<Rational>& p) {
      if (p.size() != values.size()) throw ParameterError("distribution size does not match the alphabet");
      Rational total = 0;
      for (const auto& x : p) {
        if (x < 0) throw ParameterError("negative probability");
        total += x;
      }
      if (total != 1) throw ParameterError("probabilities must sum to 1");
    };
    if (kind == Kind::Independent) {
      check_distribution(probabilities);
    } else {
      if (transition.size() != values.size()) throw ParameterError("transition matrix does not match the alphabet");
      for (const auto& row : transition) check_distribution(row);
    }
  }

  // Stationary law of the Markov chain (exact), or the step law.
  std::vector<Rational> stationary() const {
    if (kind == Kind::Independent) return probabilities;
    // Solve pi (P - I) = 0 with sum(pi) = 1 by Gauss-Jordan elimination.
    const std::size_t k = alphabet();
    std::vector<std::vector<Rational>> a(k, std::vector<Rational>(k + 1, Rational(0)));
    for (std::size_t row = 0; row + 1 < k; ++row)
      for (std::size_t col = 0; col < k; ++col) a[row][col] = transition[col][row] - (row == col ? 1 : 0);
    for (std::size_t col = 0; col < k; ++col) a[k - 1][col] = 1;
    a[k - 1][k] = 1;
    for (std::size_t col = 0; col < k; ++col) {
      std::size_t pivot = col;
      while (pivot < k && a[pivot][col] == 0) ++pivot;
      if (pivot == k) throw ParameterError("Markov chain has no unique stationary law");
      std::swap(a[pivot], a[col]);
      for (std::size_t row = 0; row < k; ++row) {
        if (row == col || a[row][col] == 0) continue;
        const Rational f = a[row][col] / a[col][col];
        for (std::size_t c = col; c <= k; ++c) a[row][c] -= f * a[col][c];
      }
    }
    std::vector<Rational> pi(k);
    for (std::size_t i = 0; i < k; ++i) pi[i] = a[i][k] / a[i][i];
    return pi;
  }

  // Exact alpha_ell of the step sequence. For a stationary Markov chain the
  // past/future coefficient reduces to the pair (X_0, X_ell):
  //   alpha_ell = max_{A,B} |P(X_0 in A, X_ell in B) - pi(A) pi(B)|.
  Rational alpha(std::size_t ell) const {
    if (ell == 0) return Rational(1, 2);
    if (kind == Kind::Independent) return 0;
    const std::size_t k = alphabet();
    const auto pi = stationary();
    std::vector<std::vector<Rational>> power(k, std::vector<Rational>(k, Rational(0)));
    for (std::size_t i = 0; i < k; ++i) power[i][i] = 1;
    for (std::size_t step = 0; step < ell; ++step) {
      std::vector<std::vector<Rational>> next(k, std::vector<Rational>(k, Rational(0)));
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t m = 0; m < k; ++m)
          for (std::size_t j = 0; j < k; ++j) next[i][j] += power[i][m] * transition[m][j];
      power = std::move(next);
    }
    Rational best = 0;
    for (std::size_t A = 1; A < (1u << k); ++A) {
      for (std::size_t B = 1; B < (1u << k); ++B) {
        Rational joint = 0, pa = 0, pb = 0;
        for (std::size_t x = 0; x < k; ++x) {
          if (A >> x & 1) pa += pi[x];
          if (B >> x & 1) pb += pi[x];
          for (std::size_t y = 0; y < k; ++y)
            if ((A >> x & 1) && (B >> y & 1)) joint += pi[x] * power[x][y];
        }
        Rational dev = joint - pa * pb;
        if (dev < 0) dev = -dev;
        if (dev > best) best = dev;
      }
    }
    return best;
  }
};

struct ExactInequalityResult {
  InequalityReport report;
  Rational lhs;
  Rational rhs;
  bool holds = false;  // lhs <= rhs in exact arithmetic
};

namespace detail {

using Weight = unsigned __int128;

inline std::vector<Weight> integer_weights(const std::vector<Rational>& probs, Rational& denominator) {
  boost::multiprecision::cpp_int lcm = 1;
  for (const auto& p : probs) lcm = boost::multiprecision::lcm(lcm, boost::multiprecision::denominator(p));
  denominator = Rational(lcm);
  std::vector<Weight> out;
  for (const auto& p : probs) {
    const boost::multiprecision::cpp_int num = boost::multiprecision::numerator(p) * (lcm / boost::multiprecision::denominator(p));
    out.push_back(static_cast<Weight>(static_cast<std::uint64_t>(num)));
  }
  return out;
}

inline std::int64_t floor_multiple(const Rational& eps, int factor) {
  const Rational x = eps * factor;
  boost::multiprecision::cpp_int q = boost::multiprecision::numerator(x) / boost::multiprecision::denominator(x);
  if (x < 0 && q * boost::multiprecision::denominator(x) != boost::multiprecision::numerator(x)) --q;
  return static_cast<std::int64_t>(q);
}

inline Rational to_rational(Weight w) {
  boost::multiprecision::cpp_int v = static_cast<std::uint64_t>(w >> 64);
  v <<= 64;
  v += static_cast<std::uint64_t>(w & 0xFFFFFFFFFFFFFFFFULL);
  return Rational(v);
}

}  // namespace detail

// Enumerates all alphabet^n paths with exact integer path weights and
// evaluates both sides of the inequality in rational arithmetic; epsilon is
// taken as the exact binary value of the double.
inline ExactInequalityResult verify_inequality_exact(const FiniteStepModel& model, std::size_t n, std::size_t ell,
                                                     double epsilon) {
  model.validate();
  if (n > 12) throw ParameterError("state space too large: n must be <= 12");
  if (!(ell >= 1 && ell < n)) throw ParameterError("need 1 <= ell < n");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ParameterError("epsilon must be finite and > 0");
  const std::size_t K = model.alphabet();
  const std::size_t T = model.index_count();
  for (const auto& v : model.values)
    for (auto x : v)
      if (std::llabs(x) > (std::int64_t{1} << 40)) throw ParameterError("outcome values too large");

  // Integer weights: path weight / total is the path probability.
  Rational start_den, step_den = 1;
  std::vector<detail::Weight> start = detail::integer_weights(model.stationary(), start_den);
  std::vector<std::vector<detail::Weight>> step(K);
  if (model.kind == FiniteStepModel::Kind::Markov) {
    boost::multiprecision::cpp_int lcm = 1;
    for (const auto& row : model.transition)
      for (const auto& p : row) lcm = boost::multiprecision::lcm(lcm, boost::multiprecision::denominator(p));
    step_den = Rational(lcm);
    for (std::size_t x = 0; x < K; ++x)
      for (const auto& p : model.transition[x])
        step[x].push_back(static_cast<detail::Weight>(static_cast<std::uint64_t>(
            boost::multiprecision::numerator(p) * (lcm / boost::multiprecision::denominator(p)))));
  } else {
    step_den = start_den;
    for (std::size_t x = 0; x < K; ++x) step[x] = start;
  }
  Rational total = start_den;
  for (std::size_t i = 1; i < n; ++i) total *= step_den;
  if (boost::multiprecision::numerator(total) >= (boost::multiprecision::cpp_int(1) << 120))
    throw ParameterError("state space too large: path weights overflow");

  const std::int64_t thr1 = detail::floor_multiple(Rational(epsilon), 1);
  const std::int64_t thr3 = detail::floor_multiple(Rational(epsilon), 3);
  const std::size_t window = 2 * ell;

  detail::Weight w_max = 0, w_end = 0, w_block = 0;
  std::vector<detail::Weight> w_tail(n + 1, 0);
  std::vector<std::int64_t> sums((n + 1) * T, 0);
  std::vector<std::size_t> path(n);
  auto norm_diff = [&](std::size_t j, std::size_t k) {
    std::int64_t m = 0;
    for (std::size_t t = 0; t < T; ++t) m = std::max<std::int64_t>(m, std::llabs(sums[k * T + t] - sums[j * T + t]));
    return m;
  };

  // Iterative depth-first enumeration.
  std::vector<detail::Weight> weight(n + 1, 1);
  std::vector<std::size_t> choice(n + 1, 0);
  std::size_t depth = 0;  // number of steps fixed
  while (true) {
    if (depth == n) {
      const detail::Weight w = weight[n];
      std::int64_t mx = 0;
      for (std::size_t k = 1; k <= n; ++k) mx = std::max(mx, norm_diff(0, k));
      if (mx > thr3) w_max += w;
      if (norm_diff(0, n) > thr1) w_end += w;
      for (std::size_t k = 1; k <= n; ++k)
        if (norm_diff(k, n) > thr1) w_tail[k] += w;
      bool block = false;
      for (std::size_t k = 2; k <= n && !block; ++k)
        for (std::size_t j = (k > window ? k - window : 1); j < k && !block; ++j) block = norm_diff(j, k) > thr1;
      if (block) w_block += w;
      // backtrack
      while (depth > 0 && choice[depth] + 1 >= K) --depth;
      if (depth == 0) break;
      ++choice[depth];
    } else {
      ++depth;
      choice[depth] = 0;
    }
    // (re)compute step `depth` from choice[depth]
    const std::size_t x = choice[depth];
    path[depth - 1] = x;
    weight[depth] = depth == 1 ? start[x] : weight[depth - 1] * step[path[depth - 2]][x];
    for (std::size_t t = 0; t < T; ++t)
      sums[depth * T + t] = sums[(depth - 1) * T + t] + model.values[x][t];
  }

  const Rational W(boost::multiprecision::numerator(total));
  const Rational p_max = detail::to_rational(w_max) / W;
  const detail::Weight worst = *std::max_element(w_tail.begin() + 1, w_tail.end());
  const Rational q = detail::to_rational(worst) / W;
  const Rational p_end = detail::to_rational(w_end) / W;
  const Rational p_block = detail::to_rational(w_block) / W;
  const Rational alpha = model.alpha(ell);
  const Rational mixing = Rational(static_cast<long long>(n / ell)) * alpha;

  ExactInequalityResult result;
  result.lhs = p_max * (1 - q);
  result.rhs = p_end + p_block + mixing;
  result.holds = result.lhs <= result.rhs;

  auto& rep = result.report;
  rep.epsilon = epsilon;
  rep.ell = ell;
  rep.n = n;
  rep.exact = true;
  rep.max_exceed = {p_max.convert_to<double>(), 0.0};
  rep.denominator_est = {(1 - q).convert_to<double>(), 0.0};
  rep.lhs_est = {result.lhs.convert_to<double>(), 0.0};
  rep.rhs_term_supS = {p_end.convert_to<double>(), 0.0};
  rep.rhs_term_block = {p_block.convert_to<double>(), 0.0};
  rep.alpha_ell = alpha.convert_to<double>();
  rep.rhs_term_mixing = mixing.convert_to<double>();
  rep.rhs_est = {result.rhs.convert_to<double>(), 0.0};
  rep.pass = result.holds;
  return result;
}

}  // namespace seqemp
