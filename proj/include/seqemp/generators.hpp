#pragma once

// Strictly stationary d-dimensional sequences with standard-uniform marginals,
// their exact joint CDF C, and documented upper bounds on the strong mixing
// coefficients alpha_l.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "seqemp/error.hpp"
#include "seqemp/rng.hpp"

namespace seqemp {

enum class Family { IID, MDependent, GaussCopulaAR1 };
enum class CrossDependence { Independent, EquiCorrGaussCopula };

struct SequenceSpec {
  Family family = Family::IID;
  int m = 1;           // window length parameter, MDependent only
  double phi = 0.0;    // AR(1) coefficient, GaussCopulaAR1 only
  std::size_t dim = 1;
  CrossDependence cross = CrossDependence::Independent;
  double rho = 0.0;    // equicorrelation, EquiCorrGaussCopula only

  static SequenceSpec iid(std::size_t dim = 1) { return {Family::IID, 1, 0.0, dim}; }
  static SequenceSpec mdependent(int m, std::size_t dim = 1) {
    return {Family::MDependent, m, 0.0, dim};
  }
  static SequenceSpec ar1(double phi, std::size_t dim = 1) {
    return {Family::GaussCopulaAR1, 1, phi, dim};
  }
  SequenceSpec with_equicorrelation(double r) const {
    SequenceSpec out = *this;
    out.cross = CrossDependence::EquiCorrGaussCopula;
    out.rho = r;
    return out;
  }

  void validate() const {
    if (dim < 1) throw ParameterError("dimension must be >= 1");
    if (family == Family::MDependent && m < 1) throw ParameterError("m-dependent window requires m >= 1");
    if (family == Family::GaussCopulaAR1 && !(std::abs(phi) < 1.0))
      throw ParameterError("AR(1) coefficient must satisfy |phi| < 1");
    if (cross == CrossDependence::EquiCorrGaussCopula && !(rho >= 0.0 && rho < 1.0))
      throw ParameterError("equicorrelation must lie in [0, 1)");
  }

  std::string describe() const {
    std::ostringstream os;
    switch (family) {
      case Family::IID: os << "iid"; break;
      case Family::MDependent: os << "mdep(m=" << m << ")"; break;
      case Family::GaussCopulaAR1: os << "ar1(phi=" << phi << ")"; break;
    }
    os << ",d=" << dim;
    if (cross == CrossDependence::EquiCorrGaussCopula) os << ",equicorr(rho=" << rho << ")";
    return os.str();
  }

  friend bool operator==(const SequenceSpec&, const SequenceSpec&) = default;
};

// n x d observations, row-major.
class StationarySample {
 public:
  StationarySample(std::vector<double> data, std::size_t dim, SequenceSpec spec, std::uint64_t seed = 0)
      : data_(std::move(data)), dim_(dim), spec_(spec), seed_(seed) {
    if (dim_ == 0) throw ParameterError("sample dimension must be >= 1");
    if (spec_.dim != dim_) throw ParameterError("sample dimension does not match its spec");
    if (data_.empty() || data_.size() % dim_ != 0) throw ParameterError("sample must hold n >= 1 full rows");
    for (double v : data_)
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("sample entries must lie in [0,1]");
  }

  // Rows of an iid uniform model (C(u) = prod u_j); handy for hand-built data.
  static StationarySample from_rows(std::vector<double> data, std::size_t dim) {
    return StationarySample(std::move(data), dim, SequenceSpec::iid(dim));
  }

  std::size_t n() const noexcept { return data_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  const SequenceSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const double> data() const noexcept { return data_; }

  // Zero-based row index.
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  double at(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

  StationarySample prefix(std::size_t k) const {
    if (k < 1 || k > n()) throw ParameterError("prefix length out of range");
    return StationarySample({data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(k * dim_)}, dim_,
                            spec_, seed_);
  }

 private:
  std::vector<double> data_;
  std::size_t dim_;
  SequenceSpec spec_;
  std::uint64_t seed_;
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace detail {

// d standard normals with pairwise correlation rho: sqrt(rho) W + sqrt(1-rho) e_j.
inline void equicorrelated_normals(Stream& stream, double rho, std::span<double> out) {
  const double common = rho > 0.0 ? std::sqrt(rho) * stream.normal() : 0.0;
  const double idio = std::sqrt(1.0 - rho);
  for (double& z : out) z = common + idio * stream.normal();
}

// One row of the cross-sectional copula: uniforms that are either independent
// or coupled through an equicorrelated Gaussian copula.
inline void copula_row(Stream& stream, const SequenceSpec& spec, std::span<double> out) {
  if (spec.cross == CrossDependence::Independent) {
    for (double& u : out) u = stream.uniform();
    return;
  }
  equicorrelated_normals(stream, spec.rho, out);
  for (double& u : out) u = normal_cdf(u);
}

// Copula CDF of one row: prod v_j, or the equicorrelated Gaussian copula
//   int phi(w) prod_j Phi((Phi^{-1}(v_j) - sqrt(rho) w) / sqrt(1 - rho)) dw
// by adaptive Gauss-Kronrod quadrature (absolute error well below 1e-10).
inline double copula_cdf(const SequenceSpec& spec, std::span<const double> v) {
  std::vector<double> active;
  for (double x : v) {
    if (x <= 0.0) return 0.0;
    if (x < 1.0) active.push_back(x);
  }
  if (active.empty()) return 1.0;
  if (active.size() == 1) return active.front();
  if (spec.cross == CrossDependence::Independent || spec.rho == 0.0) {
    double p = 1.0;
    for (double x : active) p *= x;
    return p;
  }
  std::vector<double> thresholds;
  thresholds.reserve(active.size());
  for (double x : active) thresholds.push_back(normal_quantile(x));
  const double sr = std::sqrt(spec.rho), sc = std::sqrt(1.0 - spec.rho);
  auto integrand = [&](double w) {
    double p = std::exp(-0.5 * w * w) / std::sqrt(2.0 * std::numbers::pi);
    for (double a : thresholds) p *= normal_cdf((a - sr * w) / sc);
    return p;
  };
  double err = 0.0;
  // Beyond |w| = 12 the Gaussian weight is below 1e-31.
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, 12.0, 20, 1e-14, &err);
  return std::clamp(value, 0.0, 1.0);
}

}  // namespace detail

// Draws n rows of the sequence described by spec. Deterministic in
// (spec, n, seed): all randomness comes from Stream(seed, 0).
//
//   IID             rows are iid draws of the cross-sectional copula.
//   MDependent(m)   U_t,j = (max_{w=0..m} V_{t+w,j})^{m+1} over iid copula rows
//                   V; x^{m+1} is the exact CDF of the max of m+1 uniforms.
//   GaussCopulaAR1  latent X_t = phi X_{t-1} + sqrt(1-phi^2) e_t started in the
//                   stationary law, U_t = Phi(X_t) coordinatewise.
inline StationarySample generate(const SequenceSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw ParameterError("sample size must be >= 1");
  const std::size_t d = spec.dim;
  std::vector<double> data(n * d);
  Stream stream(seed, 0);

  switch (spec.family) {
    case Family::IID:
      for (std::size_t i = 0; i < n; ++i) detail::copula_row(stream, spec, {data.data() + i * d, d});
      break;

    case Family::MDependent: {
      const auto window = static_cast<std::size_t>(spec.m) + 1;
      std::vector<double> innov((n + window - 1) * d);
      for (std::size_t t = 0; t < n + window - 1; ++t)
        detail::copula_row(stream, spec, {innov.data() + t * d, d});
      const double power = static_cast<double>(window);
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < d; ++j) {
          double mx = 0.0;
          for (std::size_t w = 0; w < window; ++w) mx = std::max(mx, innov[(t + w) * d + j]);
          data[t * d + j] = std::pow(mx, power);
        }
      }
      break;
    }

    case Family::GaussCopulaAR1: {
      const double rho = spec.cross == CrossDependence::EquiCorrGaussCopula ? spec.rho : 0.0;
      const double scale = std::sqrt(1.0 - spec.phi * spec.phi);
      std::vector<double> state(d), shock(d);
      detail::equicorrelated_normals(stream, rho, state);
      for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) {
          detail::equicorrelated_normals(stream, rho, shock);
          for (std::size_t j = 0; j < d; ++j) state[j] = spec.phi * state[j] + scale * shock[j];
        }
        for (std::size_t j = 0; j < d; ++j) data[t * d + j] = normal_cdf(state[j]);
      }
      break;
    }
  }
  return StationarySample(std::move(data), d, spec, seed);
}

// Exact joint CDF C(u) of one row U_i.
inline double true_cdf(const SequenceSpec& spec, std::span<const double> u) {
  spec.validate();
  if (u.size() != spec.dim) throw DomainError("true_cdf: point dimension does not match spec");
  for (double x : u)
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("true_cdf: point outside the unit cube");
  if (spec.family != Family::MDependent) return detail::copula_cdf(spec, u);
  // Max of m+1 iid copula rows evaluated at u^{1/(m+1)}.
  const double power = static_cast<double>(spec.m + 1);
  std::vector<double> v(u.begin(), u.end());
  for (double& x : v) x = std::pow(x, 1.0 / power);
  return std::pow(detail::copula_cdf(spec, v), power);
}

// Documented upper bound on alpha_ell. alpha_0 = 1/2 by convention and every
// alpha_ell with ell >= 1 is at most 1/4, which caps all bounds below.
//   IID             0 for ell >= 1.
//   MDependent(m)   1/4 for 1 <= ell <= m, 0 beyond the window.
//   GaussCopulaAR1  min(|phi|^ell, 1/4): for Gaussian sequences alpha is bounded
//                   by the maximal correlation, which is |phi|^ell for AR(1).
//                   Constant 1 (conservative); a geometric rate satisfies any
//                   polynomial rate hypothesis alpha_n = O(n^{-(1+eta)}).
inline double mixing_bound(const SequenceSpec& spec, std::size_t ell) {
  if (ell == 0) return 0.5;
  switch (spec.family) {
    case Family::IID: return 0.0;
    case Family::MDependent: return ell <= static_cast<std::size_t>(spec.m) ? 0.25 : 0.0;
    case Family::GaussCopulaAR1:
      return std::min(0.25, std::pow(std::abs(spec.phi), static_cast<double>(ell)));
  }
  return 0.5;
}

// ell -> documented bound on alpha_ell for one spec.
struct MixingProfile {
  SequenceSpec spec;
  double operator()(std::size_t ell) const { return mixing_bound(spec, ell); }
};

}  // namespace seqemp
