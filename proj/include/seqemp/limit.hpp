#pragma once

// Long-run covariance kernel
//   Gamma(u, v) = sum_{i in Z} Cov{1(U_0 <= u), 1(U_i <= v)}
// on a u-lattice, and simulation of the centered Gaussian field B_C with
// covariance (s ^ t) Gamma(u, v) on an (s, u) grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "seqemp/empirical.hpp"
#include "seqemp/error.hpp"
#include "seqemp/generators.hpp"
#include "seqemp/parallel.hpp"
#include "seqemp/rng.hpp"
#include "seqemp/stats.hpp"

namespace seqemp {

enum class LagKernel { Bartlett, Truncated };

struct CovKernelEstimate {
  std::vector<std::vector<double>> u_points;
  Eigen::MatrixXd gamma;
  std::size_t bandwidth = 0;
  LagKernel kernel = LagKernel::Truncated;

  Lattice lattice() const { return Lattice(u_points); }
};

// Default lag window floor(n^{1/3}).
inline std::size_t default_bandwidth(std::size_t n) {
  auto L = static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(n))));
  while ((L + 1) * (L + 1) * (L + 1) <= n) ++L;
  while (L > 0 && L * L * L > n) --L;
  return L;
}

namespace detail {

// Lattice points whose indicator is a.s. constant: some u_j = 0, or u = (1,...,1).
inline std::vector<bool> degenerate_points(const Lattice& lattice) {
  std::vector<bool> out(lattice.size(), false);
  std::vector<double> point(lattice.dim());
  for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
    lattice.point(idx, point);
    const bool has_zero = std::any_of(point.begin(), point.end(), [](double x) { return x == 0.0; });
    const bool all_one = std::all_of(point.begin(), point.end(), [](double x) { return x == 1.0; });
    out[idx] = has_zero || all_one;
  }
  return out;
}

// Symmetrize and clip negative eigenvalues at 0 on the non-degenerate block;
// degenerate rows and columns are set to exactly 0.
inline void project_psd(Eigen::MatrixXd& gamma, const std::vector<bool>& degenerate) {
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < degenerate.size(); ++i)
    if (!degenerate[i]) keep.push_back(static_cast<Eigen::Index>(i));
  Eigen::MatrixXd sym = 0.5 * (gamma + gamma.transpose());
  gamma.setZero();
  if (keep.empty()) return;
  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd block(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) block(a, b) = sym(keep[a], keep[b]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed during PSD projection");
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  block = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
  block = 0.5 * (block + block.transpose());
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) gamma(keep[a], keep[b]) = block(a, b);
}

}  // namespace detail

// gamma_hat(u, v) = sum_{|h| <= L} w(h) cov_h(u, v), cov_h the lag-h empirical
// cross-covariance of the centered indicators (divisor n), Bartlett weights
// w(h) = 1 - |h|/(L+1) or truncated weights w = 1; then PSD projection by
// eigenvalue clipping.
inline CovKernelEstimate estimate_gamma(const StationarySample& sample, const std::vector<std::vector<double>>& u_points,
                                        std::size_t bandwidth, LagKernel kernel = LagKernel::Bartlett) {
  const std::size_t n = sample.n();
  if (bandwidth >= n) throw ParameterError("bandwidth must be < n");
  const Lattice lattice(u_points);
  if (lattice.dim() != sample.dim()) throw ParameterError("lattice dimension does not match the sample");
  const auto P = static_cast<Eigen::Index>(lattice.size());
  const auto N = static_cast<Eigen::Index>(n);

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(N, P);
  std::vector<double> point(lattice.dim());
  for (Eigen::Index idx = 0; idx < P; ++idx) {
    lattice.point(static_cast<std::size_t>(idx), point);
    for (Eigen::Index i = 0; i < N; ++i) {
      bool below = true;
      for (std::size_t j = 0; j < point.size() && below; ++j) below = sample.at(static_cast<std::size_t>(i), j) <= point[j];
      X(i, idx) = below ? 1.0 : 0.0;
    }
  }
  X.rowwise() -= X.colwise().mean();

  const double nd = static_cast<double>(n);
  Eigen::MatrixXd gamma = X.transpose() * X / nd;
  for (std::size_t h = 1; h <= bandwidth; ++h) {
    const double w = kernel == LagKernel::Bartlett ? 1.0 - static_cast<double>(h) / static_cast<double>(bandwidth + 1) : 1.0;
    const auto H = static_cast<Eigen::Index>(h);
    const Eigen::MatrixXd lag = X.topRows(N - H).transpose() * X.bottomRows(N - H) / nd;
    gamma += w * (lag + lag.transpose());
  }
  detail::project_psd(gamma, detail::degenerate_points(lattice));
  return {u_points, std::move(gamma), bandwidth, kernel};
}

// Exact kernel of an iid sequence: Gamma(u, v) = C(u ^ v) - C(u) C(v).
inline CovKernelEstimate gamma_analytic_iid(const std::vector<std::vector<double>>& u_points, const SequenceSpec& spec) {
  if (spec.family != Family::IID) throw ParameterError("analytic kernel requires an iid spec");
  const Lattice lattice(u_points);
  if (lattice.dim() != spec.dim) throw ParameterError("lattice dimension does not match the spec");
  const auto P = static_cast<Eigen::Index>(lattice.size());
  std::vector<double> cdf(lattice.size());
  std::vector<std::vector<double>> points(lattice.size());
  for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
    points[idx] = lattice.point(idx);
    cdf[idx] = true_cdf(spec, points[idx]);
  }
  Eigen::MatrixXd gamma(P, P);
  std::vector<double> meet(lattice.dim());
  for (Eigen::Index a = 0; a < P; ++a) {
    for (Eigen::Index b = a; b < P; ++b) {
      for (std::size_t j = 0; j < meet.size(); ++j)
        meet[j] = std::min(points[static_cast<std::size_t>(a)][j], points[static_cast<std::size_t>(b)][j]);
      const double v = true_cdf(spec, meet) - cdf[static_cast<std::size_t>(a)] * cdf[static_cast<std::size_t>(b)];
      gamma(a, b) = v;
      gamma(b, a) = v;
    }
  }
  return {u_points, std::move(gamma), 0, LagKernel::Truncated};
}

struct LimitField {
  std::vector<double> values;  // |s_points| x |lattice|, row-major by s
  EvaluationGrid grid;
  std::uint64_t seed = 0;
  std::size_t replication = 0;

  std::size_t cols() const noexcept { return values.size() / grid.s_points.size(); }
  double at(std::size_t s_index, std::size_t u_index) const { return values[s_index * cols() + u_index]; }
};

// Lower-triangular R with R R^T = Gamma on the non-degenerate lattice points
// (zero rows elsewhere). Cholesky with diagonal jitter 1e-12, 1e-11, ..., 1e-8.
class LimitSampler {
 public:
  explicit LimitSampler(const CovKernelEstimate& kernel)
      : u_points_(kernel.u_points), size_(static_cast<std::size_t>(kernel.gamma.rows())) {
    if (kernel.gamma.rows() != kernel.gamma.cols()) throw ParameterError("kernel matrix must be square");
    const Lattice lattice(u_points_);
    if (lattice.size() != size_) throw ParameterError("kernel matrix does not match its lattice");
    for (std::size_t i = 0; i < size_; ++i)
      if (kernel.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) > 0.0)
        active_.push_back(static_cast<Eigen::Index>(i));
    const auto m = static_cast<Eigen::Index>(active_.size());
    Eigen::MatrixXd block(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) block(a, b) = kernel.gamma(active_[a], active_[b]);
    if (m == 0) return;
    for (double jitter = 0.0; jitter <= 1e-8 * 1.0001; jitter = jitter == 0.0 ? 1e-12 : jitter * 10.0) {
      Eigen::MatrixXd trial = block;
      trial.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(trial);
      if (llt.info() == Eigen::Success) {
        factor_ = llt.matrixL();
        jitter_ = jitter;
        return;
      }
    }
    throw NumericalError("covariance factorization failed after maximal jitter 1e-8");
  }

  double jitter() const noexcept { return jitter_; }
  std::size_t lattice_size() const noexcept { return size_; }

  // One field: B(s_m, .) = sum_{k <= m} sqrt(s_k - s_{k-1}) xi_k, xi_k ~ N(0, Gamma)
  // iid, with s_{-1} = 0.
  LimitField draw(const std::vector<double>& s_points, std::uint64_t seed, std::size_t rep) const {
    LimitField field{std::vector<double>(s_points.size() * size_, 0.0), EvaluationGrid{s_points, u_points_}, seed, rep};
    Stream stream(seed, rep);
    const auto m = static_cast<Eigen::Index>(active_.size());
    Eigen::VectorXd z(m), inc(m), level = Eigen::VectorXd::Zero(m);
    double prev = 0.0;
    for (std::size_t r = 0; r < s_points.size(); ++r) {
      const double ds = s_points[r] - prev;
      prev = s_points[r];
      if (ds > 0.0 && m > 0) {
        for (Eigen::Index a = 0; a < m; ++a) z(a) = stream.normal();
        inc.noalias() = factor_.triangularView<Eigen::Lower>() * z;
        level += std::sqrt(ds) * inc;
      }
      double* out = field.values.data() + r * size_;
      for (Eigen::Index a = 0; a < m; ++a) out[active_[a]] = level(a);
    }
    return field;
  }

 private:
  std::vector<std::vector<double>> u_points_;
  std::size_t size_;
  std::vector<Eigen::Index> active_;
  Eigen::MatrixXd factor_;
  double jitter_ = 0.0;
};

inline void validate_s_points(const std::vector<double>& s_points) {
  if (s_points.empty()) throw ParameterError("empty s grid");
  if (!std::is_sorted(s_points.begin(), s_points.end()) || s_points.front() < 0.0 || s_points.back() > 1.0)
    throw ParameterError("s grid must be sorted within [0,1]");
}

// reps independent limit fields; replication r uses Stream(seed, r).
inline std::vector<LimitField> simulate_limit(const CovKernelEstimate& kernel, const std::vector<double>& s_points,
                                              std::size_t reps, std::uint64_t seed, std::size_t threads = 1) {
  validate_s_points(s_points);
  const LimitSampler sampler(kernel);
  return parallel_map(reps, threads, [&](std::size_t r) { return sampler.draw(s_points, seed, r); });
}

enum class Functional { SupAbs, CvM };

// SupAbs: max |f| over the grid. CvM: mean of f^2 over the grid cells (a
// Riemann approximation of the integral of f^2 on the unit cube).
inline double apply_functional(Functional functional, std::span<const double> values) {
  if (functional == Functional::SupAbs) return sup_norm(values);
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

struct DiagnosticRow {
  std::size_t n = 0;
  double ks = 0.0;              // two-sample KS distance, B_n functional vs B_C functional
  double ks_critical_1pct = 0.0;
  double mean_process = 0.0;
  double mean_limit = 0.0;
};

struct DiagnosticReport {
  Functional functional = Functional::SupAbs;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  bool analytic_kernel = true;
  std::vector<DiagnosticRow> rows;
  // KS at the largest n does not exceed KS at the smallest n by more than slack.
  bool decreasing(double slack = 0.02) const {
    return rows.size() < 2 || rows.back().ks <= rows.front().ks + slack;
  }
};

struct DiagnosticOptions {
  std::size_t s_steps = 64;
  std::size_t u_steps = 64;
  std::size_t threads = 1;
  // Sample size used to estimate Gamma for non-iid specs.
  std::size_t kernel_sample_size = 20000;
};

// For each n: reps samples of B_n on a regular grid (true-CDF centering) vs
// reps draws of B_C on the same grid, compared through the distribution of a
// functional. The kernel is analytic for iid specs and estimated from one long
// sample otherwise.
inline DiagnosticReport weak_convergence_diagnostic(const SequenceSpec& spec, Functional functional,
                                                    const std::vector<std::size_t>& n_list, std::size_t reps,
                                                    std::uint64_t seed, const DiagnosticOptions& opt = {}) {
  spec.validate();
  if (reps < 100) throw ParameterError("diagnostic needs reps >= 100");
  if (n_list.empty()) throw ParameterError("empty n list");
  const EvaluationGrid grid = EvaluationGrid::regular(spec.dim, opt.s_steps, opt.u_steps);

  DiagnosticReport report{functional, reps, seed, spec.family == Family::IID, {}};
  const CovKernelEstimate kernel = [&] {
    if (report.analytic_kernel) return gamma_analytic_iid(grid.u_points, spec);
    const auto long_sample = generate(spec, opt.kernel_sample_size, derive_seed(seed, 0xC0FFEE));
    return estimate_gamma(long_sample, grid.u_points, default_bandwidth(opt.kernel_sample_size));
  }();
  const LimitSampler sampler(kernel);
  const std::uint64_t limit_seed = derive_seed(seed, 0x1111);
  const std::vector<double> limit_values = parallel_map(reps, opt.threads, [&](std::size_t r) {
    return apply_functional(functional, sampler.draw(grid.s_points, limit_seed, r).values);
  });

  for (std::size_t which = 0; which < n_list.size(); ++which) {
    const std::size_t n = n_list[which];
    const std::uint64_t n_seed = derive_seed(seed, 0x2000 + which);
    const std::vector<double> process_values = parallel_map(reps, opt.threads, [&](std::size_t r) {
      const auto sample = generate(spec, n, derive_seed(n_seed, r));
      return apply_functional(functional, eval_sequential(sample, Centering::TrueCdf, grid).values);
    });
    report.rows.push_back({n, stats::ks_two_sample(process_values, limit_values),
                           stats::ks_two_sample_critical(reps, reps, 0.01), stats::mean(process_values),
                           stats::mean(limit_values)});
  }
  return report;
}

}  // namespace seqemp
