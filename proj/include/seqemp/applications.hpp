#pragma once

// Two uses of the sequential empirical process:
//  * a CUSUM change-point test on the tied-down field with empirical-CDF
//    centering, calibrated by simulating the tied-down Gaussian limit with an
//    estimated long-run kernel;
//  * self-normalized confidence intervals for theta = int C(u) du
//    = E prod_j (1 - U_j), studentized by the running estimates themselves
//    (one-sided forward normalizer).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <tuple>
#include <vector>

#include "seqemp/empirical.hpp"
#include "seqemp/error.hpp"
#include "seqemp/generators.hpp"
#include "seqemp/limit.hpp"
#include "seqemp/parallel.hpp"
#include "seqemp/rng.hpp"
#include "seqemp/stats.hpp"

namespace seqemp {

// ---------------------------------------------------------------------------
// Change-point test.

struct ChangepointCalibration {
  std::size_t reps = 500;
  std::uint64_t seed = 1;
  std::optional<std::size_t> bandwidth;  // default floor(n^{1/3})
  std::size_t s_steps = 64;              // statistic and limit share this grid
  std::size_t u_steps = 16;
  std::size_t threads = 1;
};

struct TestResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  double p_value = 1.0;
  double level = 0.05;
  bool reject = false;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  std::size_t bandwidth = 0;
};

inline bool all_rows_identical(const StationarySample& sample) {
  const auto first = sample.row(0);
  for (std::size_t i = 1; i < sample.n(); ++i)
    if (!std::equal(first.begin(), first.end(), sample.row(i).begin())) return false;
  return true;
}

// sup over the (s, u) grid of the tied-down field B_n(s,u) - (floor(sn)/n) B_n(1,u).
inline double cusum_statistic(const StationarySample& sample, const EvaluationGrid& grid) {
  return sup_norm(cusum_field(eval_sequential(sample, Centering::EmpiricalCdf, grid)));
}

// Critical value = (1-level) quantile of sup |B_C(s,u) - s B_C(1,u)| over the
// same grid, Gamma estimated on the observed sample; p-value = fraction of
// simulated suprema >= the statistic.
inline TestResult changepoint_test(const StationarySample& sample, double level, const ChangepointCalibration& calib = {}) {
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("level must lie in (0,1)");
  const std::size_t n = sample.n();
  if (n < 32) throw ParameterError("change-point test needs n >= 32");
  if (calib.reps < 1) throw ParameterError("calibration needs reps >= 1");

  TestResult result;
  result.level = level;
  result.reps = calib.reps;
  result.seed = calib.seed;
  result.bandwidth = calib.bandwidth.value_or(default_bandwidth(n));
  if (all_rows_identical(sample)) return result;  // statistic 0, p-value 1

  const EvaluationGrid grid = EvaluationGrid::regular(sample.dim(), calib.s_steps, calib.u_steps);
  result.statistic = cusum_statistic(sample, grid);

  const CovKernelEstimate kernel = estimate_gamma(sample, grid.u_points, result.bandwidth, LagKernel::Bartlett);
  const LimitSampler sampler(kernel);
  const std::size_t last = grid.s_points.size() - 1;
  const std::vector<double> simulated = parallel_map(calib.reps, calib.threads, [&](std::size_t r) {
    const LimitField f = sampler.draw(grid.s_points, calib.seed, r);
    const std::size_t cols = f.cols();
    double m = 0.0;
    for (std::size_t row = 0; row < grid.s_points.size(); ++row) {
      const double s = grid.s_points[row];
      for (std::size_t idx = 0; idx < cols; ++idx)
        m = std::max(m, std::abs(f.values[row * cols + idx] - s * f.values[last * cols + idx]));
    }
    return m;
  });
  result.critical_value = stats::quantile(simulated, 1.0 - level);
  const auto exceed = std::count_if(simulated.begin(), simulated.end(), [&](double v) { return v >= result.statistic; });
  result.p_value = static_cast<double>(exceed) / static_cast<double>(simulated.size());
  result.reject = result.statistic > result.critical_value;
  return result;
}

// Pseudo-observations rank/n per coordinate (ties share the largest rank).
inline StationarySample rank_transform(const StationarySample& sample) {
  const std::size_t n = sample.n(), d = sample.dim();
  std::vector<double> out(n * d);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = sample.at(i, j);
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i) {
      const auto rank = std::upper_bound(sorted.begin(), sorted.end(), column[i]) - sorted.begin();
      out[i * d + j] = static_cast<double>(rank) / static_cast<double>(n);
    }
  }
  return StationarySample(std::move(out), d, sample.spec(), sample.seed());
}

// Alternative used in power studies: rows after n/2 are mapped to U^{1/3}
// coordinatewise, then the whole sample is re-ranked onto the (0,1] scale.
inline StationarySample half_sample_distortion(const StationarySample& sample) {
  std::vector<double> data(sample.data().begin(), sample.data().end());
  for (std::size_t i = sample.n() / 2; i < sample.n(); ++i)
    for (std::size_t j = 0; j < sample.dim(); ++j) data[i * sample.dim() + j] = std::cbrt(data[i * sample.dim() + j]);
  return rank_transform(StationarySample(std::move(data), sample.dim(), sample.spec(), sample.seed()));
}

// ---------------------------------------------------------------------------
// Self-normalized confidence interval.

// theta_k = k^{-1} sum_{i<=k} prod_j (1 - U_ij), the exact integral over
// [0,1]^d of the empirical CDF of the first k rows, as a running mean.
inline std::vector<double> integral_functional(const StationarySample& sample) {
  std::vector<double> theta(sample.n());
  double prev = 0.0;
  for (std::size_t i = 0; i < sample.n(); ++i) {
    double term = 1.0;
    for (double u : sample.row(i)) term *= 1.0 - u;
    const double k = static_cast<double>(i + 1);
    prev = ((k - 1.0) * prev + term) / k;
    theta[i] = prev;
  }
  return theta;
}

// theta = E prod_j (1 - U_j): 1/2 in d = 1, 2^{-d} with independent
// coordinates; not available in closed form otherwise.
inline std::optional<double> integral_functional_truth(const SequenceSpec& spec) {
  if (spec.dim == 1 || spec.cross == CrossDependence::Independent || spec.rho == 0.0)
    return std::ldexp(1.0, -static_cast<int>(spec.dim));
  return std::nullopt;
}

// V_n = n^{-2} sum_k k^2 (theta_k - theta_n)^2.
inline double self_normalizer(std::span<const double> theta) {
  if (theta.empty()) return 0.0;
  const double last = theta.back();
  const double n = static_cast<double>(theta.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double kk = static_cast<double>(k + 1);
    const double dev = theta[k] - last;
    acc += kk * kk * dev * dev;
  }
  return acc / (n * n);
}

struct SelfNormCriticalOptions {
  std::size_t reps = 100000;
  std::size_t grid = 10000;
  std::uint64_t seed = 20240611;
  std::size_t threads = 1;
};

// Simulated draws of W(1)^2 / int_0^1 (W(s) - s W(1))^2 ds over Brownian paths
// on a regular grid of `grid` steps, sorted ascending. Cached per
// (reps, grid, seed) for the lifetime of the process.
inline const std::vector<double>& selfnorm_null_draws(const SelfNormCriticalOptions& opt = {}) {
  static std::mutex mutex;
  static std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>, std::vector<double>> cache;
  if (opt.reps < 1 || opt.grid < 2) throw ParameterError("critical value simulation needs reps >= 1 and grid >= 2");
  std::lock_guard lock(mutex);
  const auto key = std::make_tuple(opt.reps, opt.grid, opt.seed);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  const double N = static_cast<double>(opt.grid);
  const double step_sd = 1.0 / std::sqrt(N);
  std::vector<double> draws = parallel_map(opt.reps, opt.threads, [&](std::size_t r) {
    Stream stream(opt.seed, r);
    std::vector<double> path(opt.grid);
    double w = 0.0;
    for (double& x : path) {
      w += step_sd * stream.normal();
      x = w;
    }
    double bridge_sq = 0.0;
    for (std::size_t k = 0; k < opt.grid; ++k) {
      const double b = path[k] - static_cast<double>(k + 1) / N * w;
      bridge_sq += b * b;
    }
    return w * w / (bridge_sq / N);
  });
  std::sort(draws.begin(), draws.end());
  return cache.emplace(key, std::move(draws)).first->second;
}

// (1-level) quantile of W(1)^2 / int (W(s) - s W(1))^2 ds.
inline double selfnorm_critical_value(double level, const SelfNormCriticalOptions& opt = {}) {
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("level must lie in (0,1)");
  return stats::quantile(selfnorm_null_draws(opt), 1.0 - level);
}

struct SelfNormCI {
  double theta_hat = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.05;
  double normalizer = 0.0;  // V_n
  double critical_value = 0.0;
  bool degenerate = false;  // V_n == 0: interval collapses to {theta_hat}
};

// theta_n +- sqrt(c V_n / n) with a precomputed critical value c.
inline SelfNormCI selfnorm_ci(const StationarySample& sample, double level, double critical_value) {
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("level must lie in (0,1)");
  if (sample.n() < 32) throw ParameterError("self-normalized interval needs n >= 32");
  const std::vector<double> theta = integral_functional(sample);
  SelfNormCI ci;
  ci.level = level;
  ci.theta_hat = theta.back();
  ci.normalizer = self_normalizer(theta);
  ci.critical_value = critical_value;
  ci.degenerate = ci.normalizer == 0.0;
  const double half = std::sqrt(critical_value * ci.normalizer / static_cast<double>(sample.n()));
  ci.lo = ci.theta_hat - half;
  ci.hi = ci.theta_hat + half;
  return ci;
}

inline SelfNormCI selfnorm_ci(const StationarySample& sample, double level, const SelfNormCriticalOptions& opt = {}) {
  return selfnorm_ci(sample, level, selfnorm_critical_value(level, opt));
}

}  // namespace seqemp
