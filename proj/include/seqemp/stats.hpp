#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "seqemp/error.hpp"

namespace seqemp::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Unbiased sample variance; 0 for fewer than two values.
inline double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size() - 1);
}

inline double covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ParameterError("covariance: length mismatch");
  if (x.size() < 2) return 0.0;
  const double mx = mean(x), my = mean(y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - mx) * (y[i] - my);
  return acc / static_cast<double>(x.size() - 1);
}

// Standard error of a Bernoulli frequency estimate.
inline double proportion_se(double p, std::size_t reps) {
  if (reps == 0) return 0.0;
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(reps));
}

// Empirical quantile by the order statistic of rank ceil(p * size), p in [0, 1].
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ParameterError("quantile of empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("quantile level outside [0,1]");
  const auto size = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(size)));
  rank = std::clamp<std::size_t>(rank, 1, size);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

// Two-sample Kolmogorov-Smirnov distance sup_x |F_a(x) - F_b(x)|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ParameterError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// One-sample Kolmogorov-Smirnov distance against Uniform[0,1].
inline double ks_uniform(std::vector<double> x) {
  if (x.empty()) throw ParameterError("ks_uniform: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
    d = std::max({d, hi - x[i], x[i] - lo});
  }
  return d;
}

// Survival function of the limiting Kolmogorov distribution,
// P(K > x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
inline double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;  // series converges slowly; the value is 1 to double precision
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// Asymptotic level-alpha critical values for the KS distances above.
inline double ks_uniform_critical(std::size_t n, double alpha) {
  // Bisection on the limiting survival function.
  double lo = 0.2, hi = 3.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_sf(mid) > alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi) / std::sqrt(static_cast<double>(n));
}

inline double ks_two_sample_critical(std::size_t na, std::size_t nb, double alpha) {
  const double eff = static_cast<double>(na) * static_cast<double>(nb) / static_cast<double>(na + nb);
  return ks_uniform_critical(1, alpha) / std::sqrt(eff);
}

}  // namespace seqemp::stats
