#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvsde/catalog.hpp"
#include "mvsde/grid_function.hpp"
#include "mvsde/measure.hpp"

namespace mvsde {

// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
// on the Legendre polynomial (converges to full precision in a few steps).
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  require(n >= 1, "quadrature: order must be positive");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (double(i) + 0.75) / (double(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / double(k);
        p0 = p1;
        p1 = p2;
      }
      dp = double(n) * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

// Tensor Gauss-Legendre integral of fn over the box [lo, hi] in the listed
// axes, with the remaining coordinates of x already fixed by the caller.
template <class Fn>
inline double box_quadrature(std::span<const int> axes, std::span<const double> lo,
                             std::span<const double> hi, std::vector<double>& x, Fn&& fn,
                             int order = 16) {
  std::vector<double> gn, gw;
  gauss_legendre(order, gn, gw);
  int na = int(axes.size());
  if (na == 0) return fn(std::span<const double>(x));
  std::vector<int> g(na, 0);
  KahanSum total;
  while (true) {
    double wt = 1.0;
    for (int a = 0; a < na; ++a) {
      double half = 0.5 * (hi[a] - lo[a]);
      x[axes[a]] = lo[a] + half * (1.0 + gn[g[a]]);
      wt *= half * gw[g[a]];
    }
    total.add(wt * fn(std::span<const double>(x)));
    int a = 0;
    for (; a < na; ++a) {
      if (++g[a] < order) break;
      g[a] = 0;
    }
    if (a == na) break;
  }
  return total.get();
}

// Pointwise check of the iterated product-derivative identity
//   u * d^n v = sum over subsets I of (-1)^|I| d_{I^c}(v * d_I u)
// with the same second-order finite differences on both sides. The max is
// over nodes at least `margin` away from every boundary so only central
// stencils contribute, which keeps the residual cleanly second order.
inline double iterated_ibp_check(const GridFunction& u, const GridFunction& v,
                                 std::int64_t margin = 2) {
  require(u.dim() == v.dim() && u.nodes() == v.nodes() && u.side() == v.side(),
          "ibp: u and v must share a grid");
  int dim = u.dim();
  auto apply_subset = [&](const GridFunction& g, std::uint32_t mask) {
    GridFunction out = g;
    for (int a = 0; a < dim; ++a)
      if (mask >> a & 1u) out = out.derivative(a);
    return out;
  };

  GridFunction lhs = u.pointwise_product(apply_subset(v, (1u << dim) - 1));
  GridFunction rhs(u.dim(), u.side(), u.nodes());
  for (std::uint32_t mask = 0; mask < (1u << dim); ++mask) {
    int bits = 0;
    for (int a = 0; a < dim; ++a) bits += int(mask >> a & 1u);
    double sign = bits % 2 ? -1.0 : 1.0;
    GridFunction term = apply_subset(v.pointwise_product(apply_subset(u, mask)),
                                     ~mask & ((1u << dim) - 1));
    for (std::int64_t i = 0; i < rhs.size(); ++i) rhs.raw()[i] += sign * term.raw()[i];
  }

  double worst = 0.0;
  std::vector<std::int64_t> idx(dim);
  for (std::int64_t flat = 0; flat < lhs.size(); ++flat) {
    lhs.coords(flat, idx);
    bool interior = true;
    for (int a = 0; a < dim; ++a)
      if (idx[a] < margin || idx[a] >= u.nodes() - margin) interior = false;
    if (!interior) continue;
    worst = std::max(worst, std::fabs(lhs.raw()[flat] - rhs.raw()[flat]));
  }
  return worst;
}

// Right-hand side of the boundary-face expansion
//   integral of f*u = sum over subsets I of
//     (-1)^|I| integral over the I-face (others pinned at T) of F * d_I u,
// with F the iterated primitive of f. Terms where any pinned coordinate sits
// at 0 vanish because F does, so only top faces appear. u is a catalog
// function so the face integrand uses its analytic mixed partials.
inline double boundary_face_expansion(const GridFunction& f, const XFunction& u) {
  int dim = f.dim();
  require(u.dim() == dim && u.side() == f.side(), "ibp: u domain mismatch");
  GridFunction F = f.cumulative_primitive();
  double T = f.side();
  KahanSum total;
  std::vector<double> x(dim, T);
  total.add(F.corner_value() * u.eval(x));
  for (std::uint32_t mask = 1; mask < (1u << dim); ++mask) {
    int bits = 0;
    for (int a = 0; a < dim; ++a) bits += int(mask >> a & 1u);
    double sign = bits % 2 ? -1.0 : 1.0;
    GridFunction face = F.top_face(~mask & ((1u << dim) - 1));
    // integrate F * d_I u over the face grid by trapezoid
    std::vector<std::int64_t> idx(face.dim());
    GridFunction integrand = face;
    for (std::int64_t flat = 0; flat < face.size(); ++flat) {
      face.coords(flat, idx);
      int fa = 0;
      for (int a = 0; a < dim; ++a)
        x[a] = (mask >> a & 1u) ? face.node_coord(idx[fa++]) : T;
      integrand.raw()[flat] = face.raw()[flat] * u.partial(x, mask);
    }
    total.add(sign * integrand.trapezoid_integral());
  }
  return total.get();
}

struct FaceTerm {
  std::uint32_t mask = 0;  // axes integrated over
  double value = 0.0;      // signed face contribution
  double bound = 0.0;      // sup|d_I g| * T^|I| * max corner difference
};

struct PairingBoundReport {
  std::vector<FaceTerm> faces;
  double face_sum = 0.0;        // signed sum, equals the pairing difference
  double direct = 0.0;          // pairing difference computed directly
  double identity_error = 0.0;  // |face_sum - direct|, quadrature-level
  double max_corner_diff = 0.0; // sup over box corners of the two states' gap
  double bound_total = 0.0;     // eps'' (T+1)^dim * max_corner_diff
  bool bound_holds = false;
};

// Decomposes the pairing difference (c1 - c2)[g] into the boundary-face
// terms driven by the states' box "distribution function" differences, and
// checks the aggregated bound. Exact for partition measures up to the box
// quadrature of the analytic partials of g.
inline PairingBoundReport ibp_pairing_bound_terms(const PartitionMeasure& c1,
                                                  const PartitionMeasure& c2,
                                                  const XFunction& g, double eps_dblprime) {
  require(c1.partition == c2.partition, "ibp: states must share a partition");
  const Partition& p = c1.partition;
  int dim = p.dim();
  require(dim <= 3, "ibp: dimension capped at 3");
  require(g.dim() == dim && g.side() == p.side(), "ibp: g domain mismatch");
  double T = p.side();
  auto n = p.n_cells();

  std::vector<double> dw(n);
  for (std::int64_t c = 0; c < n; ++c) dw[c] = c1.weights[c] - c2.weights[c];

  // Distribution-function gap on the corner lattice: constant between
  // lattice points, so the lattice max is the true sup.
  PairingBoundReport rep;
  {
    auto m = p.cells_per_axis();
    double cw = p.cell_width();
    std::vector<double> corner(dim);
    std::vector<std::int64_t> ci(dim, 0), atom(dim);
    while (true) {
      for (int a = 0; a < dim; ++a) corner[a] = ci[a] < m ? double(ci[a]) * cw : T;
      KahanSum cdf;
      for (std::int64_t c = 0; c < n; ++c) {
        p.cell_coords(c, atom);
        bool inside = true;
        for (int a = 0; a < dim; ++a)
          if (double(atom[a]) * cw > corner[a]) inside = false;
        if (inside) cdf.add(dw[c]);
      }
      rep.max_corner_diff = std::max(rep.max_corner_diff, std::fabs(cdf.get()));
      int a = 0;
      for (; a < dim; ++a) {
        if (++ci[a] <= m) break;
        ci[a] = 0;
      }
      if (a == dim) break;
    }
  }

  KahanSum face_sum;
  std::vector<double> x(dim, T), lo, hi;
  std::vector<int> axes;
  for (std::uint32_t mask = 0; mask < (1u << dim); ++mask) {
    int bits = 0;
    axes.clear();
    for (int a = 0; a < dim; ++a)
      if (mask >> a & 1u) {
        axes.push_back(a);
        ++bits;
      }
    double sign = bits % 2 ? -1.0 : 1.0;
    KahanSum val;
    lo.assign(axes.size(), 0.0);
    hi.assign(axes.size(), T);
    for (std::int64_t c = 0; c < n; ++c) {
      if (dw[c] == 0.0) continue;
      auto a_k = p.lower_corner(c);
      std::fill(x.begin(), x.end(), T);
      for (std::size_t a = 0; a < axes.size(); ++a) lo[a] = a_k[axes[a]];
      double q = box_quadrature(
          axes, lo, hi, x, [&](std::span<const double> pt) { return g.partial(pt, mask); });
      val.add(dw[c] * q);
    }
    FaceTerm term;
    term.mask = mask;
    term.value = sign * val.get();
    term.bound = g.partial_bound(bits) * std::pow(T, bits) * rep.max_corner_diff;
    rep.faces.push_back(term);
    face_sum.add(term.value);
  }
  rep.face_sum = face_sum.get();

  KahanSum direct;
  for (std::int64_t c = 0; c < n; ++c) {
    auto a_k = p.lower_corner(c);
    direct.add(dw[c] * g.eval(a_k));
  }
  rep.direct = direct.get();
  rep.identity_error = std::fabs(rep.face_sum - rep.direct);

  rep.bound_total = eps_dblprime * std::pow(T + 1.0, dim) * rep.max_corner_diff;
  KahanSum abs_sum;
  for (const auto& t : rep.faces) abs_sum.add(std::fabs(t.value));
  rep.bound_holds = abs_sum.get() <= rep.bound_total + 1e-12;
  return rep;
}

}  // namespace mvsde
