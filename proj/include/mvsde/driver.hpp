#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvsde/common.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

enum class ComponentKind { Brownian, CompensatedPoisson, Mixed };

inline bool has_brownian_part(ComponentKind k) {
  return k != ComponentKind::CompensatedPoisson;
}
inline bool has_jump_part(ComponentKind k) { return k != ComponentKind::Brownian; }

struct DriverConfig {
  std::string kind = "brownian";  // brownian | cpoisson | mixed
  int d = 1;
  double horizon = 1.0;
  int n_steps = 1000;
  double lambda = 1.0;  // jump intensity per component
  double beta = 0.1;    // jump size
  std::uint64_t seed = 1;

  ComponentKind component_kind() const {
    if (kind == "brownian") return ComponentKind::Brownian;
    if (kind == "cpoisson") return ComponentKind::CompensatedPoisson;
    if (kind == "mixed") return ComponentKind::Mixed;
    throw SpecError("unknown driver kind: " + kind);
  }

  void validate() const {
    require(d >= 1, "driver: d must be positive");
    require(horizon > 0.0, "driver: horizon must be positive");
    require(n_steps >= 1, "driver: n_steps must be positive");
    component_kind();
    if (kind != "brownian") {
      require(lambda >= 0.0, "driver: lambda must be nonnegative");
      require(beta != 0.0, "driver: beta must be nonzero");
    }
  }

  json to_json() const {
    return {{"kind", kind},     {"d", d},       {"horizon", horizon},
            {"n_steps", n_steps}, {"lambda", lambda}, {"beta", beta},
            {"seed", seed}};
  }

  static DriverConfig from_json(const json& j) {
    DriverConfig c;
    c.kind = j.value("kind", c.kind);
    c.d = j.value("d", c.d);
    c.horizon = j.value("horizon", c.horizon);
    c.n_steps = j.value("n_steps", c.n_steps);
    c.lambda = j.value("lambda", c.lambda);
    c.beta = j.value("beta", c.beta);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  }
};

// One sampled path of the d-dimensional driver on a finite grid. Jump times
// are grid nodes; the martingale part of a jump component carries its
// compensator as drift inside the continuous increments.
struct DriverPath {
  std::vector<double> times;            // n+1 nodes
  std::vector<double> cont;             // n*d: continuous increment per step/component
  std::vector<double> quad_var;         // n*d: predictable bracket of the continuous part
  std::vector<ComponentKind> kinds;     // d
  std::vector<std::int64_t> uniform_index;  // per node: index on the uniform grid, -1 if inserted
  struct Jump {
    std::size_t node;  // jump happens at times[node]
    std::vector<double> delta;
  };
  std::vector<Jump> jumps;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  std::size_t n_steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
  int d() const noexcept { return int(kinds.size()); }
  double horizon() const noexcept { return times.empty() ? 0.0 : times.back(); }

  const Jump* jump_at(std::size_t node) const noexcept {
    for (const auto& j : jumps)
      if (j.node == node) return &j;
    return nullptr;
  }

  // Component value at a node (increments plus jumps up to and including it).
  std::vector<double> value_at(std::size_t node) const {
    std::vector<double> v(kinds.size(), 0.0);
    for (std::size_t i = 0; i < node; ++i)
      for (int e = 0; e < d(); ++e) v[e] += cont[i * kinds.size() + e];
    for (const auto& j : jumps)
      if (j.node <= node)
        for (int e = 0; e < d(); ++e) v[e] += j.delta[e];
    return v;
  }
};

namespace detail {

// RNG stream ids per path: jumps first so the grid(s) are fixed before any
// gaussian is drawn, keeping refinements consistent.
inline constexpr std::uint32_t kStreamJumps = 0;
inline constexpr std::uint32_t kStreamGauss = 1;

struct JumpDraw {
  double time;
  int component;
};

inline std::vector<JumpDraw> draw_jumps(const DriverConfig& cfg, std::uint64_t path_index) {
  std::vector<JumpDraw> out;
  if (!has_jump_part(cfg.component_kind()) || cfg.lambda <= 0.0) return out;
  CounterRng rng(cfg.seed, path_index, kStreamJumps);
  for (int e = 0; e < cfg.d; ++e) {
    std::uint32_t k = rng.poisson(cfg.lambda * cfg.horizon);
    for (std::uint32_t i = 0; i < k; ++i) {
      double t = cfg.horizon * rng.uniform();
      if (t > 0.0 && t < cfg.horizon) out.push_back({t, e});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const JumpDraw& a, const JumpDraw& b) { return a.time < b.time; });
  return out;
}

}  // namespace detail

// Samples a path on the uniform n_steps grid with every jump time inserted
// as an extra node. Pure function of (config, path_index): bitwise
// reproducible, and distinct paths use disjoint counter streams.
inline DriverPath sample_driver(const DriverConfig& cfg, std::uint64_t path_index,
                                int steps_override = 0) {
  cfg.validate();
  int n_uniform = steps_override > 0 ? steps_override : cfg.n_steps;
  auto ckind = cfg.component_kind();
  auto jumps = detail::draw_jumps(cfg, path_index);

  DriverPath p;
  p.seed = cfg.seed;
  p.path_index = path_index;
  p.kinds.assign(cfg.d, ckind);

  // merge uniform nodes with jump times
  p.times.reserve(n_uniform + 1 + jumps.size());
  p.uniform_index.reserve(n_uniform + 1 + jumps.size());
  std::size_t jpos = 0;
  for (int i = 0; i <= n_uniform; ++i) {
    double t = cfg.horizon * double(i) / double(n_uniform);
    while (jpos < jumps.size() && jumps[jpos].time < t) {
      if (p.times.empty() || jumps[jpos].time > p.times.back()) {
        p.times.push_back(jumps[jpos].time);
        p.uniform_index.push_back(-1);
      }
      ++jpos;
    }
    if (p.times.empty() || t > p.times.back()) {
      p.times.push_back(t);
      p.uniform_index.push_back(i);
    }
  }

  // register jumps on their nodes (components jumping at the same node merge)
  for (const auto& jd : jumps) {
    auto it = std::lower_bound(p.times.begin(), p.times.end(), jd.time);
    std::size_t node = std::size_t(it - p.times.begin());
    if (node < p.times.size() && p.times[node] == jd.time) {
      if (!p.jumps.empty() && p.jumps.back().node == node) {
        p.jumps.back().delta[jd.component] += cfg.beta;
      } else {
        DriverPath::Jump j;
        j.node = node;
        j.delta.assign(cfg.d, 0.0);
        j.delta[jd.component] = cfg.beta;
        p.jumps.push_back(std::move(j));
      }
    }
  }

  std::size_t n = p.n_steps();
  p.cont.assign(n * cfg.d, 0.0);
  p.quad_var.assign(n * cfg.d, 0.0);
  CounterRng gauss(cfg.seed, path_index, detail::kStreamGauss);
  bool brownian = has_brownian_part(ckind);
  bool jumpy = has_jump_part(ckind);
  for (std::size_t i = 0; i < n; ++i) {
    double dt = p.times[i + 1] - p.times[i];
    for (int e = 0; e < cfg.d; ++e) {
      double inc = 0.0;
      if (brownian) {
        inc += std::sqrt(dt) * gauss.gaussian();
        p.quad_var[i * cfg.d + e] = dt;
      }
      if (jumpy) inc -= cfg.lambda * cfg.beta * dt;  // compensator drift
      p.cont[i * cfg.d + e] = inc;
    }
  }
  return p;
}

// Merge steps of a refined path back to the coarser uniform grid (jump nodes
// stay). This is the common-randomness coupling used by step-size studies:
// the coarse increments are exact sums of the fine ones.
inline DriverPath coarsen_driver(const DriverPath& fine, int factor) {
  require(factor >= 1, "coarsen: factor must be >= 1");
  if (factor == 1) return fine;
  DriverPath p;
  p.seed = fine.seed;
  p.path_index = fine.path_index;
  p.kinds = fine.kinds;
  int d = fine.d();

  std::vector<std::size_t> keep;  // node indices kept
  for (std::size_t i = 0; i < fine.times.size(); ++i) {
    bool uniform_kept = fine.uniform_index[i] >= 0 && fine.uniform_index[i] % factor == 0;
    bool jump_node = fine.jump_at(i) != nullptr;
    if (uniform_kept || jump_node || i == 0 || i + 1 == fine.times.size()) keep.push_back(i);
  }

  p.times.reserve(keep.size());
  p.uniform_index.reserve(keep.size());
  for (std::size_t i : keep) {
    p.times.push_back(fine.times[i]);
    auto u = fine.uniform_index[i];
    p.uniform_index.push_back(u >= 0 && u % factor == 0 ? u / factor : -1);
  }
  std::size_t n = p.n_steps();
  p.cont.assign(n * d, 0.0);
  p.quad_var.assign(n * d, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = keep[s]; i < keep[s + 1]; ++i)
      for (int e = 0; e < d; ++e) {
        p.cont[s * d + e] += fine.cont[i * d + e];
        p.quad_var[s * d + e] += fine.quad_var[i * d + e];
      }
  }
  for (const auto& j : fine.jumps) {
    auto it = std::lower_bound(keep.begin(), keep.end(), j.node);
    require(it != keep.end() && *it == j.node, "coarsen: jump node lost");
    DriverPath::Jump cj;
    cj.node = std::size_t(it - keep.begin());
    cj.delta = j.delta;
    p.jumps.push_back(std::move(cj));
  }
  return p;
}

// Segment plan: breakpoints[0] = 0 < ... < breakpoints.back() = horizon.
struct Segmentation {
  std::vector<double> breakpoints;
  std::vector<std::size_t> break_nodes;  // node index of each breakpoint
  double activity_bound = 0.0;

  std::size_t n_segments() const noexcept {
    return breakpoints.empty() ? 0 : breakpoints.size() - 1;
  }
};

// Greedy per-component activity segmentation. The activity surrogate over a
// stretch is sqrt(sum of squared increments) plus the largest single
// increment; a segment closes just before the bound would be exceeded.
// Jumps sit at breakpoints and count toward neither side, so a fresh
// accumulation starts after each one.
inline Segmentation segment(const DriverPath& path, double a) {
  require(a > 0.0, "segment: activity bound must be positive");
  int d = path.d();
  Segmentation seg;
  seg.activity_bound = a;
  seg.breakpoints.push_back(path.times.front());
  seg.break_nodes.push_back(0);

  std::vector<double> sumsq(d, 0.0), maxinc(d, 0.0);
  auto reset = [&] {
    std::fill(sumsq.begin(), sumsq.end(), 0.0);
    std::fill(maxinc.begin(), maxinc.end(), 0.0);
  };
  auto fits = [&](int e, double inc) {
    double s = sumsq[e] + inc * inc;
    double m = std::max(maxinc[e], std::fabs(inc));
    return std::sqrt(s) + m <= a;
  };
  auto close_at = [&](std::size_t node) {
    if (path.times[node] > seg.breakpoints.back()) {
      seg.breakpoints.push_back(path.times[node]);
      seg.break_nodes.push_back(node);
    }
    reset();
  };

  std::size_t n = path.n_steps();
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = true;
    for (int e = 0; e < d; ++e)
      if (!fits(e, path.cont[i * d + e])) ok = false;
    if (!ok) {
      close_at(i);
      for (int e = 0; e < d; ++e) {
        double inc = path.cont[i * d + e];
        if (2.0 * std::fabs(inc) > a)
          throw NumericalAbort("segment: a single step's activity exceeds the bound at t=" +
                               std::to_string(path.times[i]) +
                               "; use smaller steps or a larger bound");
      }
    }
    for (int e = 0; e < d; ++e) {
      double inc = path.cont[i * d + e];
      sumsq[e] += inc * inc;
      maxinc[e] = std::max(maxinc[e], std::fabs(inc));
    }
    if (const auto* j = path.jump_at(i + 1)) {
      bool jump_fits = true;
      for (int e = 0; e < d; ++e)
        if (!fits(e, j->delta[e])) jump_fits = false;
      if (!jump_fits) {
        close_at(i + 1);  // jump belongs to neither accumulation
      } else {
        for (int e = 0; e < d; ++e) {
          double inc = j->delta[e];
          sumsq[e] += inc * inc;
          maxinc[e] = std::max(maxinc[e], std::fabs(inc));
        }
      }
    }
  }
  close_at(n);
  return seg;
}

}  // namespace mvsde
