#pragma once

// Sequential empirical process
//   B_n(s, u) = n^{-1/2} sum_{i <= floor(s n)} { 1(U_i <= u) - c(u) }
// on a finite (s, u) grid, with c the true CDF or the full-sample empirical
// CDF, plus grid functionals (sup norm, modulus of continuity) and the
// tied-down CUSUM field.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <vector>

#include "seqemp/error.hpp"
#include "seqemp/generators.hpp"

namespace seqemp {

enum class Centering { TrueCdf, EmpiricalCdf };

// {0, 1/steps, ..., 1}.
inline std::vector<double> regular_axis(std::size_t steps) {
  if (steps < 1) throw ParameterError("regular axis needs at least one step");
  std::vector<double> axis(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) axis[k] = static_cast<double>(k) / static_cast<double>(steps);
  axis.back() = 1.0;
  return axis;
}

// Largest k in [0, n] with k / n <= s, computed on the same double division
// that regular_axis uses so that s = k/n maps back to k exactly.
inline std::size_t floor_count(double s, std::size_t n) {
  const double nd = static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::clamp(std::floor(s * nd), 0.0, nd));
  while (k < n && static_cast<double>(k + 1) / nd <= s) ++k;
  while (k > 0 && static_cast<double>(k) / nd > s) --k;
  return k;
}

// Tensor lattice of u-points, row-major with the last dimension fastest.
class Lattice {
 public:
  Lattice() = default;
  explicit Lattice(std::vector<std::vector<double>> axes) : axes_(std::move(axes)) {
    if (axes_.empty()) throw ParameterError("lattice needs at least one axis");
    strides_.assign(axes_.size(), 1);
    size_ = 1;
    for (std::size_t j = axes_.size(); j-- > 0;) {
      if (axes_[j].empty()) throw ParameterError("empty lattice axis");
      strides_[j] = size_;
      size_ *= axes_[j].size();
    }
  }

  std::size_t dim() const noexcept { return axes_.size(); }
  std::size_t size() const noexcept { return size_; }
  const std::vector<std::vector<double>>& axes() const noexcept { return axes_; }
  const std::vector<double>& axis(std::size_t j) const { return axes_[j]; }
  std::size_t stride(std::size_t j) const { return strides_[j]; }

  std::size_t coordinate_index(std::size_t idx, std::size_t j) const {
    return (idx / strides_[j]) % axes_[j].size();
  }

  // Flat index of the point with per-axis positions pos.
  std::size_t index(std::span<const std::size_t> pos) const {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < axes_.size(); ++j) {
      if (pos[j] >= axes_[j].size()) throw ParameterError("lattice position out of range");
      idx += pos[j] * strides_[j];
    }
    return idx;
  }

  void point(std::size_t idx, std::span<double> out) const {
    for (std::size_t j = 0; j < axes_.size(); ++j) out[j] = axes_[j][coordinate_index(idx, j)];
  }
  std::vector<double> point(std::size_t idx) const {
    std::vector<double> out(dim());
    point(idx, out);
    return out;
  }

  // In-place dominance sums: a[q] <- sum_{p <= q coordinatewise} a[p].
  template <typename T>
  void dominance_prefix_sum(std::span<T> a) const {
    for (std::size_t j = 0; j < dim(); ++j) {
      const std::size_t stride = strides_[j];
      for (std::size_t idx = 0; idx < size_; ++idx)
        if (coordinate_index(idx, j) > 0) a[idx] += a[idx - stride];
    }
  }

 private:
  std::vector<std::vector<double>> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

namespace detail {

inline void validate_axis(const std::vector<double>& axis, const char* what) {
  if (axis.size() < 2) throw ParameterError(std::string(what) + " axis needs the endpoints 0 and 1");
  if (axis.front() != 0.0 || axis.back() != 1.0)
    throw ParameterError(std::string(what) + " axis must start at 0 and end at 1");
  if (!std::is_sorted(axis.begin(), axis.end()))
    throw ParameterError(std::string(what) + " axis must be sorted");
}

}  // namespace detail

struct EvaluationGrid {
  std::vector<double> s_points;
  std::vector<std::vector<double>> u_points;

  void validate() const {
    if (s_points.empty() || u_points.empty()) throw ParameterError("empty evaluation grid");
    detail::validate_axis(s_points, "s");
    for (const auto& axis : u_points) detail::validate_axis(axis, "u");
  }

  Lattice lattice() const { return Lattice(u_points); }
  std::size_t dim() const noexcept { return u_points.size(); }

  // s = k/s_steps, u_j = k/u_steps in every dimension.
  static EvaluationGrid regular(std::size_t dim, std::size_t s_steps, std::size_t u_steps) {
    return {regular_axis(s_steps), std::vector<std::vector<double>>(dim, regular_axis(u_steps))};
  }

  // s = k/n for k = 0..n; u-axis j = the sample values of coordinate j plus
  // {0, 1}. On this grid sup_u at fixed s of an indicator-based field is exact.
  static EvaluationGrid for_sample(const StationarySample& sample) {
    EvaluationGrid grid;
    grid.s_points = regular_axis(sample.n());
    grid.u_points.resize(sample.dim());
    for (std::size_t j = 0; j < sample.dim(); ++j) {
      auto& axis = grid.u_points[j];
      axis.reserve(sample.n() + 2);
      axis.push_back(0.0);
      axis.push_back(1.0);
      for (std::size_t i = 0; i < sample.n(); ++i) axis.push_back(sample.at(i, j));
      std::sort(axis.begin(), axis.end());
      axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
    }
    return grid;
  }
};

// |s_points| x |lattice| values, row-major by s.
struct ProcessField {
  std::vector<double> values;
  EvaluationGrid grid;
  std::size_t n = 0;
  Centering centering = Centering::TrueCdf;

  std::size_t rows() const noexcept { return grid.s_points.size(); }
  std::size_t cols() const noexcept { return rows() == 0 ? 0 : values.size() / rows(); }
  double at(std::size_t s_index, std::size_t u_index) const { return values[s_index * cols() + u_index]; }
  std::span<const double> row(std::size_t s_index) const { return {values.data() + s_index * cols(), cols()}; }
};

// c(u) on every lattice point.
inline std::vector<double> centering_values(const StationarySample& sample, Centering centering,
                                            const Lattice& lattice) {
  std::vector<double> c(lattice.size());
  if (centering == Centering::TrueCdf) {
    std::vector<double> point(lattice.dim());
    for (std::size_t idx = 0; idx < lattice.size(); ++idx) {
      lattice.point(idx, point);
      c[idx] = true_cdf(sample.spec(), point);
    }
    return c;
  }
  std::vector<std::int64_t> counts(lattice.size(), 0);
  for (std::size_t i = 0; i < sample.n(); ++i) {
    std::size_t corner = 0;
    for (std::size_t j = 0; j < lattice.dim(); ++j) {
      const auto& axis = lattice.axis(j);
      corner += static_cast<std::size_t>(std::lower_bound(axis.begin(), axis.end(), sample.at(i, j)) - axis.begin()) *
                lattice.stride(j);
    }
    ++counts[corner];
  }
  lattice.dominance_prefix_sum(std::span<std::int64_t>(counts));
  const double nd = static_cast<double>(sample.n());
  for (std::size_t idx = 0; idx < lattice.size(); ++idx) c[idx] = static_cast<double>(counts[idx]) / nd;
  return c;
}

// Single sweep over the observations. Each U_i adds one count at its corner
// cell (first lattice index >= U_i in every dimension); when the sweep reaches
// floor(s n) for the next s-point, the counts #{i <= k : U_i <= u} follow from
// a d-dimensional dominance prefix sum over those corner counts. Counts are
// integers, so each cell equals the naive double loop up to rounding of the
// final scaling.
inline ProcessField eval_sequential(const StationarySample& sample, Centering centering,
                                    const EvaluationGrid& grid) {
  grid.validate();
  if (grid.dim() != sample.dim()) throw ParameterError("grid dimension does not match the sample");
  const Lattice lattice = grid.lattice();
  const std::size_t n = sample.n();
  const std::size_t cols = lattice.size();
  const std::vector<double> c = centering_values(sample, centering, lattice);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));

  ProcessField field{std::vector<double>(grid.s_points.size() * cols, 0.0), grid, n, centering};
  std::vector<std::int64_t> corner_counts(cols, 0), counts(cols, 0);
  std::size_t consumed = 0;
  std::size_t last_k = static_cast<std::size_t>(-1);

  for (std::size_t r = 0; r < grid.s_points.size(); ++r) {
    const std::size_t k = floor_count(grid.s_points[r], n);
    for (; consumed < k; ++consumed) {
      std::size_t corner = 0;
      for (std::size_t j = 0; j < lattice.dim(); ++j) {
        const auto& axis = lattice.axis(j);
        const auto q = static_cast<std::size_t>(
            std::lower_bound(axis.begin(), axis.end(), sample.at(consumed, j)) - axis.begin());
        corner += q * lattice.stride(j);
      }
      ++corner_counts[corner];
    }
    if (k != last_k) {
      counts = corner_counts;
      lattice.dominance_prefix_sum(std::span<std::int64_t>(counts));
      last_k = k;
    }
    const double kd = static_cast<double>(k);
    double* out = field.values.data() + r * cols;
    for (std::size_t idx = 0; idx < cols; ++idx) out[idx] = (static_cast<double>(counts[idx]) - kd * c[idx]) * scale;
  }
  return field;
}

// D_n(u) = B_n(1, u) on the lattice spanned by u_points.
inline std::vector<double> eval_nonsequential(const StationarySample& sample, Centering centering,
                                              const std::vector<std::vector<double>>& u_points) {
  const ProcessField field = eval_sequential(sample, centering, EvaluationGrid{{0.0, 1.0}, u_points});
  const auto last = field.row(1);
  return {last.begin(), last.end()};
}

// B_n(k/n, .) - sqrt(k/n) D_k(.), where D_k uses only the first k rows. The
// identity makes this vanish up to rounding.
inline std::vector<double> rescale_identity_check(const StationarySample& sample, const ProcessField& field,
                                                  std::size_t k) {
  if (field.centering != Centering::TrueCdf)
    throw ParameterError("rescale identity requires TrueCdf centering");
  if (k < 1 || k > field.n || field.n != sample.n()) throw ParameterError("k out of range");
  std::size_t row = field.rows();
  for (std::size_t r = 0; r < field.rows(); ++r)
    if (floor_count(field.grid.s_points[r], field.n) == k) {
      row = r;
      break;
    }
  if (row == field.rows()) throw ParameterError("grid has no s-point with floor(s n) = k");
  const std::vector<double> dk = eval_nonsequential(sample.prefix(k), Centering::TrueCdf, field.grid.u_points);
  const double factor = std::sqrt(static_cast<double>(k) / static_cast<double>(field.n));
  std::vector<double> out(dk.size());
  for (std::size_t idx = 0; idx < dk.size(); ++idx) out[idx] = field.at(row, idx) - factor * dk[idx];
  return out;
}

namespace detail {

// Sliding-window extremum along one axis of a row-major tensor. The window of
// index q covers every p with |x_p - x_q| <= delta; both window ends are
// non-decreasing in q, so a monotone deque gives O(length) per line.
template <typename Better>
void window_extremum_along(std::span<double> values, const std::vector<std::size_t>& shape, std::size_t axis_id,
                           const std::vector<double>& x, double delta, Better better) {
  const std::size_t len = shape[axis_id];
  std::size_t stride = 1;
  for (std::size_t j = axis_id + 1; j < shape.size(); ++j) stride *= shape[j];
  const std::size_t total = values.size();
  const std::size_t block = stride * len;

  std::vector<double> line(len), result(len);
  std::deque<std::size_t> dq;
  for (std::size_t outer = 0; outer < total; outer += block) {
    for (std::size_t inner = 0; inner < stride; ++inner) {
      const std::size_t base = outer + inner;
      for (std::size_t q = 0; q < len; ++q) line[q] = values[base + q * stride];
      dq.clear();
      std::size_t next = 0;
      for (std::size_t q = 0; q < len; ++q) {
        while (next < len && std::abs(x[next] - x[q]) <= delta) {
          while (!dq.empty() && !better(line[dq.back()], line[next])) dq.pop_back();
          dq.push_back(next++);
        }
        while (std::abs(x[dq.front()] - x[q]) > delta) dq.pop_front();
        result[q] = line[dq.front()];
      }
      for (std::size_t q = 0; q < len; ++q) values[base + q * stride] = result[q];
    }
  }
}

}  // namespace detail

// w_delta(f) = max |f(x) - f(y)| over grid-point pairs with ||x - y||_inf <=
// delta. A lower bound for the supremum over the continuum. Computed as
// max_x max(boxmax(x) - f(x), f(x) - boxmin(x)) with separable window extrema.
inline double modulus_of_continuity(std::span<const double> values, const std::vector<std::vector<double>>& axes,
                                    double delta) {
  if (!(delta >= 0.0)) throw ParameterError("delta must be >= 0");
  std::vector<std::size_t> shape;
  std::size_t total = 1;
  for (const auto& a : axes) {
    shape.push_back(a.size());
    total *= a.size();
  }
  if (total != values.size()) throw ParameterError("field size does not match its axes");
  if (total == 0) return 0.0;

  std::vector<double> hi(values.begin(), values.end()), lo(values.begin(), values.end());
  for (std::size_t j = 0; j < axes.size(); ++j) {
    detail::window_extremum_along(hi, shape, j, axes[j], delta, [](double a, double b) { return a > b; });
    detail::window_extremum_along(lo, shape, j, axes[j], delta, [](double a, double b) { return a < b; });
  }
  double w = 0.0;
  for (std::size_t i = 0; i < total; ++i) w = std::max({w, hi[i] - values[i], values[i] - lo[i]});
  return w;
}

inline double modulus_of_continuity(const ProcessField& field, double delta) {
  std::vector<std::vector<double>> axes;
  axes.reserve(field.grid.dim() + 1);
  axes.push_back(field.grid.s_points);
  for (const auto& a : field.grid.u_points) axes.push_back(a);
  return modulus_of_continuity(field.values, axes, delta);
}

// (s, u) -> B(s, u) - (floor(s n)/n) B(1, u).
inline ProcessField cusum_field(const ProcessField& field) {
  if (field.rows() == 0 || field.grid.s_points.back() != 1.0)
    throw ParameterError("cusum_field needs the s = 1 slice");
  ProcessField out = field;
  const std::size_t last = field.rows() - 1;
  const double nd = static_cast<double>(field.n);
  for (std::size_t r = 0; r < field.rows(); ++r) {
    const double frac = static_cast<double>(floor_count(field.grid.s_points[r], field.n)) / nd;
    for (std::size_t idx = 0; idx < field.cols(); ++idx)
      out.values[r * field.cols() + idx] = field.at(r, idx) - frac * field.at(last, idx);
  }
  return out;
}

inline double sup_norm(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

inline double sup_norm(const ProcessField& field) { return sup_norm(field.values); }

}  // namespace seqemp
