#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvsde/common.hpp"
#include "mvsde/stats.hpp"

namespace mvsde {

// Values of a function on a uniform tensor grid over [0, side]^dim, dim <= 3.
// Node multi-indices are flattened with axis 0 most significant.
class GridFunction {
 public:
  GridFunction(int dim, double side, std::int64_t nodes_per_axis)
      : dim_(dim), side_(side), n_(nodes_per_axis) {
    require(dim >= 1 && dim <= 3, "grid: dim must be in [1, 3]");
    require(side > 0.0, "grid: side must be positive");
    require(nodes_per_axis >= 3, "grid: need at least 3 nodes per axis");
    std::int64_t total = 1;
    for (int a = 0; a < dim_; ++a) total *= n_;
    values_.assign(total, 0.0);
    strides_.assign(dim_, 1);
    for (int a = dim_ - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * n_;
  }

  template <class F>
  static GridFunction sample(int dim, double side, std::int64_t nodes_per_axis, F&& f) {
    GridFunction g(dim, side, nodes_per_axis);
    std::vector<double> x(dim);
    std::vector<std::int64_t> idx(dim, 0);
    for (std::int64_t flat = 0; flat < g.size(); ++flat) {
      g.coords(flat, idx);
      for (int a = 0; a < dim; ++a) x[a] = g.node_coord(idx[a]);
      double v = f(std::span<const double>(x));
      if (!std::isfinite(v))
        throw NumericalAbort("grid: non-finite sample at node " + std::to_string(flat));
      g.values_[flat] = v;
    }
    return g;
  }

  int dim() const noexcept { return dim_; }
  double side() const noexcept { return side_; }
  std::int64_t nodes() const noexcept { return n_; }
  std::int64_t size() const noexcept { return std::int64_t(values_.size()); }
  double spacing() const noexcept { return side_ / double(n_ - 1); }
  double node_coord(std::int64_t i) const noexcept { return side_ * double(i) / double(n_ - 1); }

  void coords(std::int64_t flat, std::span<std::int64_t> out) const {
    for (int a = dim_ - 1; a >= 0; --a) {
      out[a] = flat % n_;
      flat /= n_;
    }
  }
  std::int64_t flat_index(std::span<const std::int64_t> idx) const {
    std::int64_t f = 0;
    for (int a = 0; a < dim_; ++a) {
      require(idx[a] >= 0 && idx[a] < n_, "grid: node index out of range");
      f += idx[a] * strides_[a];
    }
    return f;
  }

  double at(std::span<const std::int64_t> idx) const { return values_[flat_index(idx)]; }
  double& at(std::span<const std::int64_t> idx) { return values_[flat_index(idx)]; }
  const std::vector<double>& raw() const noexcept { return values_; }
  std::vector<double>& raw() noexcept { return values_; }

  // Nearest grid node of a coordinate; off-node values are a hard error so
  // the corner-sum identities stay exact.
  std::int64_t node_of(double t, double tol = 1e-9) const {
    double pos = t / spacing();
    auto i = std::int64_t(std::llround(pos));
    require(i >= 0 && i < n_ && std::fabs(pos - double(i)) <= tol / spacing(),
            "grid: coordinate " + std::to_string(t) + " is not a grid node");
    return i;
  }

  // Iterated cumulative trapezoid from 0 along every axis; the result
  // vanishes on all lower faces.
  GridFunction cumulative_primitive() const {
    GridFunction out = *this;
    double h = spacing();
    for (int a = 0; a < dim_; ++a) {
      std::int64_t s = out.strides_[a];
      for_each_line(a, [&](std::int64_t base) {
        double prev = out.values_[base];
        out.values_[base] = 0.0;
        for (std::int64_t i = 1; i < n_; ++i) {
          double cur = out.values_[base + i * s];
          out.values_[base + i * s] = out.values_[base + (i - 1) * s] + 0.5 * h * (prev + cur);
          prev = cur;
        }
      });
    }
    return out;
  }

  // Second-order finite-difference derivative along one axis: central in the
  // interior, one-sided at the two boundary nodes.
  GridFunction derivative(int axis) const {
    require(axis >= 0 && axis < dim_, "grid: bad derivative axis");
    GridFunction out = *this;
    double h = spacing();
    std::int64_t s = strides_[axis];
    for_each_line(axis, [&](std::int64_t base) {
      auto v = [&](std::int64_t i) { return values_[base + i * s]; };
      out.values_[base] = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
      for (std::int64_t i = 1; i < n_ - 1; ++i)
        out.values_[base + i * s] = (v(i + 1) - v(i - 1)) / (2.0 * h);
      out.values_[base + (n_ - 1) * s] =
          (3.0 * v(n_ - 1) - 4.0 * v(n_ - 2) + v(n_ - 3)) / (2.0 * h);
    });
    return out;
  }

  GridFunction pointwise_product(const GridFunction& o) const {
    require(dim_ == o.dim_ && n_ == o.n_ && side_ == o.side_, "grid: shape mismatch");
    GridFunction out = *this;
    for (std::size_t i = 0; i < values_.size(); ++i) out.values_[i] *= o.values_[i];
    return out;
  }

  // Full-domain tensor trapezoid quadrature.
  double trapezoid_integral() const {
    KahanSum s;
    std::vector<std::int64_t> idx(dim_);
    for (std::int64_t flat = 0; flat < size(); ++flat) {
      coords(flat, idx);
      double wt = 1.0;
      for (int a = 0; a < dim_; ++a)
        if (idx[a] == 0 || idx[a] == n_ - 1) wt *= 0.5;
      s.add(wt * values_[flat]);
    }
    return s.get() * std::pow(spacing(), dim_);
  }

  // Restriction to the face where the axes in `fixed_mask` are pinned at
  // their top node; the result lives on the remaining axes (dim 0 becomes a
  // single stored value, queried via face value helpers below).
  GridFunction top_face(std::uint32_t fixed_mask) const {
    int free_dim = 0;
    for (int a = 0; a < dim_; ++a)
      if (!(fixed_mask >> a & 1u)) ++free_dim;
    require(free_dim >= 1, "grid: use corner_value for the zero-dimensional face");
    GridFunction out(free_dim, side_, n_);
    std::vector<std::int64_t> src(dim_), dst(free_dim);
    for (std::int64_t flat = 0; flat < out.size(); ++flat) {
      out.coords(flat, dst);
      int fa = 0;
      for (int a = 0; a < dim_; ++a)
        src[a] = (fixed_mask >> a & 1u) ? n_ - 1 : dst[fa++];
      out.values_[flat] = at(src);
    }
    return out;
  }

  double corner_value() const {  // value at (side, ..., side)
    return values_.back();
  }

 private:
  template <class Fn>
  void for_each_line(int axis, Fn&& fn) const {
    std::int64_t s = strides_[axis];
    std::int64_t total = size();
    // Walk every flat index whose coordinate along `axis` is 0.
    for (std::int64_t flat = 0; flat < total; ++flat) {
      if ((flat / s) % n_ != 0) continue;
      fn(flat);
    }
  }

  int dim_;
  double side_;
  std::int64_t n_;
  std::vector<double> values_;
  std::vector<std::int64_t> strides_;
};

// Integral of the underlying function over the box (lo, hi] recovered from
// its primitive by the alternating corner sum.
inline double l_volume(const GridFunction& F, std::span<const std::int64_t> lo,
                       std::span<const std::int64_t> hi) {
  int dim = F.dim();
  require(std::int64_t(lo.size()) == dim && std::int64_t(hi.size()) == dim,
          "l_volume: corner dimension mismatch");
  for (int a = 0; a < dim; ++a)
    require(lo[a] <= hi[a], "l_volume: box corners out of order");
  KahanSum s;
  std::vector<std::int64_t> idx(dim);
  for (std::uint32_t eps = 0; eps < (1u << dim); ++eps) {
    int zeros = 0;
    for (int a = 0; a < dim; ++a) {
      bool hi_corner = eps >> a & 1u;
      idx[a] = hi_corner ? hi[a] : lo[a];
      if (!hi_corner) ++zeros;
    }
    s.add((zeros % 2 ? -1.0 : 1.0) * F.at(idx));
  }
  return s.get();
}

inline double l_volume(const GridFunction& F, std::span<const double> lo,
                       std::span<const double> hi) {
  std::vector<std::int64_t> li(F.dim()), hi_i(F.dim());
  for (int a = 0; a < F.dim(); ++a) {
    li[a] = F.node_of(lo[a]);
    hi_i[a] = F.node_of(hi[a]);
  }
  return l_volume(F, li, hi_i);
}

}  // namespace mvsde
