#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mvsde/partition.hpp"
#include "mvsde/stats.hpp"
#include "mvsde/test_function.hpp"

namespace mvsde {

// Nonnegative measure on a dyadic partition: one weight per cell.
struct PartitionMeasure {
  Partition partition;
  std::vector<double> weights;

  PartitionMeasure(Partition p, std::vector<double> w)
      : partition(std::move(p)), weights(std::move(w)) {
    require(std::int64_t(weights.size()) == partition.n_cells(),
            "measure: weight count != cell count");
  }

  static PartitionMeasure uniform(const Partition& p) {
    return PartitionMeasure(p, std::vector<double>(p.n_cells(), 1.0 / double(p.n_cells())));
  }

  // Cell weights from a density on the box, by fixed-order Gauss-Legendre
  // quadrature per cell, normalized to total mass one.
  template <class Density>
  static PartitionMeasure from_density(const Partition& p, Density&& dens) {
    static constexpr double kNodes[4] = {-0.861136311594052575224, -0.339981043584856264803,
                                         0.339981043584856264803, 0.861136311594052575224};
    static constexpr double kWts[4] = {0.347854845137453857373, 0.652145154862546142627,
                                       0.652145154862546142627, 0.347854845137453857373};
    int dim = p.dim();
    double h = p.cell_width();
    std::vector<double> w(p.n_cells(), 0.0);
    std::vector<double> x(dim);
    std::vector<int> g(dim, 0);
    for (std::int64_t c = 0; c < p.n_cells(); ++c) {
      auto lo = p.lower_corner(c);
      KahanSum cell;
      g.assign(dim, 0);
      while (true) {
        double wt = 1.0;
        for (int a = 0; a < dim; ++a) {
          x[a] = lo[a] + 0.5 * h * (1.0 + kNodes[g[a]]);
          wt *= 0.5 * h * kWts[g[a]];
        }
        cell.add(wt * dens(std::span<const double>(x)));
        int a = 0;
        for (; a < dim; ++a) {
          if (++g[a] < 4) break;
          g[a] = 0;
        }
        if (a == dim) break;
      }
      w[c] = cell.get();
      require(w[c] >= 0.0, "measure: density integrates to a negative cell weight");
    }
    double total = kahan_total(w);
    require(total > 0.0, "measure: density integrates to zero");
    for (auto& v : w) v /= total;
    return PartitionMeasure(p, std::move(w));
  }

  double total_mass() const { return kahan_total(weights); }
  double min_weight() const {
    double m = weights.empty() ? 0.0 : weights[0];
    for (double w : weights) m = std::min(m, w);
    return m;
  }
  bool is_probability(double tol = 1e-12) const {
    if (min_weight() < -tol) return false;
    return std::fabs(total_mass() - 1.0) <= tol;
  }
};

// f evaluated at every cell representative; the pairing reduces to a dot
// product against these values.
inline std::vector<double> representative_values(const Partition& p, const TestFunction& f) {
  std::vector<double> v(p.n_cells());
  for (std::int64_t c = 0; c < p.n_cells(); ++c) {
    auto x = p.lower_corner(c);
    v[c] = f.eval(x);
  }
  return v;
}

inline double pairing(const PartitionMeasure& m, const TestFunction& f) {
  require(f.dim() == m.partition.dim() && f.side() == m.partition.side(),
          "pairing: function domain mismatch");
  KahanSum s;
  for (std::int64_t c = 0; c < m.partition.n_cells(); ++c) {
    auto x = m.partition.lower_corner(c);
    s.add(m.weights[c] * f.eval(x));
  }
  return s.get();
}

// Exactness flag: representative evaluation is exact precisely when f is
// constant on every cell.
inline bool pairing_is_exact(const PartitionMeasure& m, const TestFunction& f) {
  return f.measurable_at(m.partition);
}

// Push a fine measure down to a coarser partition of the same box by summing
// descendant weights.
inline PartitionMeasure aggregate(const PartitionMeasure& fine, const Partition& coarse) {
  require(fine.partition.is_refinement_of(coarse),
          "aggregate: partitions are not nested over the same box");
  std::vector<KahanSum> acc(coarse.n_cells());
  for (std::int64_t c = 0; c < fine.partition.n_cells(); ++c)
    acc[fine.partition.ancestor_of(c, coarse)].add(fine.weights[c]);
  std::vector<double> w(coarse.n_cells());
  for (std::int64_t c = 0; c < coarse.n_cells(); ++c) w[c] = acc[c].get();
  return PartitionMeasure(coarse, std::move(w));
}

// Spread coarse weights evenly over descendants; right inverse of aggregate.
inline PartitionMeasure embed(const PartitionMeasure& coarse, const Partition& fine) {
  require(fine.is_refinement_of(coarse.partition),
          "embed: partitions are not nested over the same box");
  double share = double(coarse.partition.n_cells()) / double(fine.n_cells());
  std::vector<double> w(fine.n_cells());
  for (std::int64_t c = 0; c < fine.n_cells(); ++c)
    w[c] = coarse.weights[fine.ancestor_of(c, coarse.partition)] * share;
  return PartitionMeasure(fine, std::move(w));
}

}  // namespace mvsde
