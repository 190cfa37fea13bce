#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "mvsde/catalog.hpp"
#include "mvsde/measure.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

// Total-mass floor in the normalizing denominator of the centered
// coefficient. Below this mass the centering is frozen rather than divided
// by a vanishing total.
inline constexpr double kMassFloor = 1.0 / 3.0;

// Spatial argument map: identity, or snapping to the lower corner of the
// dyadic cell at a fixed level (which makes the composed function
// partition-measurable at that level or finer).
struct VMap {
  enum class Kind { Identity, Snap };
  Kind kind = Kind::Identity;
  int level = 0;

  static VMap identity() { return VMap{}; }
  static VMap snap(int level) {
    require(level >= 0, "v-map: snap level must be nonnegative");
    return VMap{Kind::Snap, level};
  }

  void apply(std::span<const double> x, double side, std::span<double> out) const {
    if (kind == Kind::Identity) {
      std::copy(x.begin(), x.end(), out.begin());
    } else {
      snap_point(x, side, level, out);
    }
  }

  json to_json() const {
    if (kind == Kind::Identity) return {{"kind", "identity"}};
    return {{"kind", "snap"}, {"level", level}};
  }

  static VMap from_json(const json& j) {
    if (j.is_null()) return identity();
    std::string kind = j.value("kind", "identity");
    if (kind == "identity") return identity();
    if (kind == "snap") {
      require(j.contains("level"), "v-map: snap needs a level");
      return snap(j.at("level").get<int>());
    }
    throw SpecError("unknown v-map kind: " + kind);
  }
};

// One separated summand of the coefficient: per driver component e,
//   g_e(y, x) = cutoff(y_1) * gbar_e(y) * gcheck_e(v(x)).
struct CoefficientTerm {
  std::vector<YFunction> gbar;    // one per driver component
  std::vector<XFunction> gcheck;  // one per driver component
  VMap v;
};

// The centered kernel driving the weight dynamics:
//   k_e(c, x) = sum over terms of
//       cutoff(y_1) gbar_e(y) (gcheck_e(v(x)) - c[gcheck_e o v] / max(1/3, c(X)))
// with y_i = c[h_i] and h_1 = 1. Centering kills the integral of k against c
// whenever the total mass is at least the floor, which is what conserves
// mass in the linear scheme.
class CoefficientSpec {
 public:
  int d = 1;          // driver components
  int dim = 1;        // state box dimension
  double side = 1.0;  // state box side length
  std::vector<TestFunction> h;
  std::vector<CoefficientTerm> terms;
  Cutoff cutoff;
  double eps_prime = 0.0;     // declared Lipschitz constant (l1, in y)
  double eps_dblprime = 0.0;  // declared uniform bound
  double jump_margin = 0.05;  // distance kept from the positivity boundary

  std::size_t n_moments() const noexcept { return h.size(); }
  std::size_t n_terms() const noexcept { return terms.size(); }

  void validate() const {
    require(d >= 1, "spec: d must be positive");
    require(dim >= 1, "spec: dim must be positive");
    require(side > 0.0, "spec: side must be positive");
    require(!h.empty() && h.front().kind() == TestFunction::Kind::One,
            "spec: h must start with the constant function 1");
    for (const auto& f : h)
      require(f.dim() == dim && f.side() == side, "spec: h domain mismatch");
    require(!terms.empty(), "spec: needs at least one coefficient term");
    for (const auto& t : terms) {
      require(int(t.gbar.size()) == d, "spec: gbar count != d");
      require(int(t.gcheck.size()) == d, "spec: gcheck count != d");
      for (const auto& g : t.gcheck) {
        require(g.dim() == dim && g.side() == side, "spec: gcheck domain mismatch");
        require(g.sup_abs() <= 1.0 + 1e-9, "spec: gcheck must be bounded by 1");
      }
    }
    cutoff.validate();
    require(eps_prime >= 0.0, "spec: eps_prime must be nonnegative");
    require(eps_dblprime > 0.0, "spec: eps_dblprime must be positive");
    require(jump_margin > 0.0 && jump_margin < 1.0, "spec: jump_margin must be in (0,1)");
  }

  json to_json() const {
    json jt = json::array();
    for (const auto& t : terms) {
      json gb = json::array(), gc = json::array();
      for (const auto& g : t.gbar) gb.push_back(g.to_json());
      for (const auto& g : t.gcheck) gc.push_back(g.to_json());
      jt.push_back({{"gbar", gb}, {"gcheck", gc}, {"v", t.v.to_json()}});
    }
    json jh = json::array();
    for (const auto& f : h) jh.push_back(f.to_json());
    return {{"d", d},
            {"dim", dim},
            {"side", side},
            {"h", jh},
            {"terms", jt},
            {"cutoff", cutoff.to_json()},
            {"eps_prime", eps_prime},
            {"eps_dblprime", eps_dblprime},
            {"jump_margin", jump_margin}};
  }

  static CoefficientSpec from_json(const json& j) {
    CoefficientSpec s;
    try {
      s.d = j.at("d").get<int>();
      s.dim = j.value("dim", 1);
      s.side = j.value("side", 1.0);
      for (const auto& e : j.at("h")) s.h.push_back(TestFunction::from_json(e, s.dim, s.side));
      const json* jterms = nullptr;
      json single;
      if (j.contains("terms")) {
        jterms = &j.at("terms");
      } else {
        // single-term shorthand: gbar/gcheck/v at top level
        single = json::array({{{"gbar", j.at("gbar")},
                               {"gcheck", j.at("gcheck")},
                               {"v", j.value("v", json())}}});
        jterms = &single;
      }
      for (const auto& e : *jterms) {
        CoefficientTerm t;
        for (const auto& g : e.at("gbar"))
          t.gbar.push_back(YFunction::from_json(g, int(s.h.size())));
        for (const auto& g : e.at("gcheck"))
          t.gcheck.push_back(XFunction::from_json(g, s.dim, s.side));
        t.v = VMap::from_json(e.value("v", json()));
        s.terms.push_back(std::move(t));
      }
      s.cutoff = Cutoff::from_json(j.value("cutoff", json()));
      s.eps_prime = j.at("eps_prime").get<double>();
      s.eps_dblprime = j.at("eps_dblprime").get<double>();
      s.jump_margin = j.value("jump_margin", 0.05);
    } catch (const json::exception& e) {
      throw SpecError(std::string("spec document: ") + e.what());
    }
    s.validate();
    return s;
  }
};

// Sum of coefficients sharing the driver dimension and moment family; the
// kernel of the sum is the sum of the kernels.
inline CoefficientSpec sum_specs(std::span<const CoefficientSpec> parts) {
  require(!parts.empty(), "sum_specs: empty list");
  CoefficientSpec out = parts.front();
  json h0 = json::array();
  for (const auto& f : out.h) h0.push_back(f.to_json());
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto& p = parts[i];
    require(p.d == out.d && p.dim == out.dim && p.side == out.side,
            "sum_specs: mismatched dimensions");
    json hi = json::array();
    for (const auto& f : p.h) hi.push_back(f.to_json());
    require(hi == h0, "sum_specs: members must share the moment family h");
    for (const auto& t : p.terms) out.terms.push_back(t);
    out.eps_prime += p.eps_prime;
    out.eps_dblprime += p.eps_dblprime;
    out.jump_margin = std::min(out.jump_margin, p.jump_margin);
  }
  out.validate();
  return out;
}

// Precomputed representative values for fast kernel evaluation on a fixed
// partition: moments and term pairings reduce to dot products.
class KernelEvaluator {
 public:
  KernelEvaluator(const CoefficientSpec& spec, const Partition& p)
      : spec_(&spec), n_(p.n_cells()), n_h_(spec.h.size()), n_terms_(spec.terms.size()) {
    require(spec.dim == p.dim() && spec.side == p.side(),
            "kernel: spec domain does not match the partition");
    hv_.resize(n_h_ * n_);
    for (std::size_t i = 0; i < n_h_; ++i) {
      auto v = representative_values(p, spec.h[i]);
      std::copy(v.begin(), v.end(), hv_.begin() + std::int64_t(i) * n_);
    }
    gv_.resize(n_terms_ * spec.d * n_);
    std::vector<double> mapped(p.dim());
    for (std::size_t t = 0; t < n_terms_; ++t) {
      for (std::int64_t c = 0; c < n_; ++c) {
        auto x = p.lower_corner(c);
        spec.terms[t].v.apply(x, spec.side, mapped);
        for (int e = 0; e < spec.d; ++e)
          gv_[(t * spec.d + e) * n_ + c] = spec.terms[t].gcheck[e].eval(mapped);
      }
    }
  }

  std::int64_t n_cells() const noexcept { return n_; }
  std::size_t n_moments() const noexcept { return n_h_; }
  std::size_t n_terms() const noexcept { return n_terms_; }
  const CoefficientSpec& spec() const noexcept { return *spec_; }

  // y_i = c[h_i]
  void moments(std::span<const double> w, std::span<double> y) const {
    for (std::size_t i = 0; i < n_h_; ++i)
      y[i] = kahan_dot(w, std::span<const double>(hv_).subspan(i * n_, n_));
  }

  // S[t*d+e] = c[gcheck_{t,e} o v_t]
  void term_pairings(std::span<const double> w, std::span<double> S) const {
    std::size_t rows = n_terms_ * std::size_t(spec_->d);
    for (std::size_t r = 0; r < rows; ++r)
      S[r] = kahan_dot(w, std::span<const double>(gv_).subspan(r * n_, n_));
  }

  // Fills k[e*n_cells + c]; mass is the current total.
  void eval(std::span<const double> y, std::span<const double> S, double mass,
            std::span<double> k) const {
    std::fill(k.begin(), k.end(), 0.0);
    double denom = std::max(kMassFloor, mass);
    double chi = spec_->cutoff.eval(y[0]);
    for (std::size_t t = 0; t < n_terms_; ++t) {
      for (int e = 0; e < spec_->d; ++e) {
        double gb = chi * spec_->terms[t].gbar[e].eval(y);
        if (gb == 0.0) continue;
        double center = S[t * spec_->d + e] / denom;
        const double* gvrow = gv_.data() + (t * spec_->d + e) * n_;
        double* krow = k.data() + std::size_t(e) * n_;
        for (std::int64_t c = 0; c < n_; ++c) krow[c] += gb * (gvrow[c] - center);
      }
    }
  }

  // gcheck values at an arbitrary point, one row per (term, component);
  // pair with eval_point for off-grid kernel evaluation.
  std::vector<double> point_values(std::span<const double> x) const {
    std::vector<double> out(n_terms_ * spec_->d);
    std::vector<double> mapped(spec_->dim);
    for (std::size_t t = 0; t < n_terms_; ++t) {
      spec_->terms[t].v.apply(x, spec_->side, mapped);
      for (int e = 0; e < spec_->d; ++e)
        out[t * spec_->d + e] = spec_->terms[t].gcheck[e].eval(mapped);
    }
    return out;
  }

  double eval_point(std::span<const double> y, std::span<const double> S, double mass,
                    std::span<const double> pv, int e) const {
    double denom = std::max(kMassFloor, mass);
    double chi = spec_->cutoff.eval(y[0]);
    double k = 0.0;
    for (std::size_t t = 0; t < n_terms_; ++t) {
      double gb = chi * spec_->terms[t].gbar[e].eval(y);
      if (gb == 0.0) continue;
      k += gb * (pv[t * spec_->d + e] - S[t * spec_->d + e] / denom);
    }
    return k;
  }

  // max_e |integral of k_e against the state|; zero (to roundoff) whenever
  // the mass is at or above the floor.
  double condition2_residual(std::span<const double> w, std::span<const double> k) const {
    double worst = 0.0;
    for (int e = 0; e < spec_->d; ++e) {
      double r = kahan_dot(w, k.subspan(std::size_t(e) * n_, n_));
      worst = std::max(worst, std::fabs(r));
    }
    return worst;
  }

 private:
  const CoefficientSpec* spec_;
  std::int64_t n_;
  std::size_t n_h_, n_terms_;
  std::vector<double> hv_;  // n_h x n_cells
  std::vector<double> gv_;  // (n_terms*d) x n_cells
};

// min over cells of <k(cell), dY>; the positivity condition needs this > -1.
inline double condition1_min_dot(std::span<const double> k, std::span<const double> dY,
                                 int d, std::int64_t n) {
  double worst = 0.0;
  for (std::int64_t c = 0; c < n; ++c) {
    double dot = 0.0;
    for (int e = 0; e < d; ++e) dot += k[std::size_t(e) * n + c] * dY[e];
    worst = std::min(worst, dot);
  }
  return worst;
}

inline bool condition1_check(std::span<const double> k, std::span<const double> dY, int d,
                             std::int64_t n) {
  return condition1_min_dot(k, dY, d, n) > -1.0;
}

// Largest lambda in (0, 1] with lambda * min_dot >= -1 + margin.
inline double condition1_scale(double min_dot, double margin) {
  if (min_dot > -1.0 + margin) return 1.0;
  return (1.0 - margin) / (-min_dot);
}

struct ConstantsEstimate {
  double eps_prime_emp = 0.0;
  double eps_dblprime_emp = 0.0;
  std::string worst_lipschitz;
  std::string worst_bound;
};

// Sampled checks of the declared constants. The Lipschitz ratio is taken on
// the cutoff plateau (where any probability-scale state lives, so the
// cutoff contributes no slope); the uniform bound samples both the state
// part alone and the full centered kernel over random sub-probability
// states.
inline ConstantsEstimate estimate_constants(const CoefficientSpec& spec,
                                            std::size_t n_samples = 4096,
                                            std::uint64_t seed = 20260822) {
  ConstantsEstimate est;
  CounterRng rng(seed, 0, 7);
  std::size_t nh = spec.h.size();
  double y1_lo = std::max(0.3, spec.cutoff.c_lo);
  double y1_hi = std::min(1.2, spec.cutoff.c_hi);

  auto sample_y = [&](std::span<double> y) {
    y[0] = y1_lo + (y1_hi - y1_lo) * rng.uniform();
    for (std::size_t i = 1; i < nh; ++i) y[i] = 2.0 * rng.uniform() - 1.0;
  };
  auto state_part = [&](std::span<const double> y, int e) {
    double g = 0.0;
    double chi = spec.cutoff.eval(y[0]);
    for (const auto& t : spec.terms) g += chi * t.gbar[e].eval(y);
    return g;
  };

  std::vector<double> y(nh), y2(nh);
  char buf[160];
  for (std::size_t s = 0; s < n_samples; ++s) {
    sample_y(y);
    sample_y(y2);
    double l1 = 0.0;
    for (std::size_t i = 0; i < nh; ++i) l1 += std::fabs(y[i] - y2[i]);
    if (l1 < 1e-9) continue;
    for (int e = 0; e < spec.d; ++e) {
      double ratio = std::fabs(state_part(y, e) - state_part(y2, e)) / l1;
      if (ratio > est.eps_prime_emp) {
        est.eps_prime_emp = ratio;
        std::snprintf(buf, sizeof buf, "component %d, y1=%.6g vs %.6g: ratio %.6g", e, y[0],
                      y2[0], ratio);
        est.worst_lipschitz = buf;
      }
      double b = std::fabs(state_part(y, e));
      if (b > est.eps_dblprime_emp) {
        est.eps_dblprime_emp = b;
        std::snprintf(buf, sizeof buf, "state part, component %d: |g|=%.6g", e, b);
        est.worst_bound = buf;
      }
    }
  }

  // Full kernel over random states on a probe partition.
  int probe_level = std::min(4, 12 / spec.dim);
  Partition probe(spec.dim, spec.side, probe_level);
  KernelEvaluator ke(spec, probe);
  auto n = probe.n_cells();
  std::vector<double> w(n), ys(nh), S(spec.terms.size() * spec.d), k(std::size_t(spec.d) * n);
  std::size_t n_states = std::max<std::size_t>(64, n_samples / 16);
  for (std::size_t s = 0; s < n_states; ++s) {
    double total = 0.0;
    for (auto& v : w) total += (v = rng.uniform());
    double mass = 0.2 + rng.uniform();  // sub-probability through slightly super
    for (auto& v : w) v *= mass / total;
    ke.moments(w, ys);
    ke.term_pairings(w, S);
    ke.eval(ys, S, kahan_total(w), k);
    for (std::size_t i = 0; i < k.size(); ++i) {
      double b = std::fabs(k[i]);
      if (b > est.eps_dblprime_emp) {
        est.eps_dblprime_emp = b;
        std::snprintf(buf, sizeof buf, "kernel sample: mass %.4g, cell %lld: |k|=%.6g", mass,
                      (long long)(i % std::size_t(n)), b);
        est.worst_bound = buf;
      }
    }
  }
  return est;
}

// Declared-constant validation; exceedance is a spec error naming the sample.
inline ConstantsEstimate validate_constants(const CoefficientSpec& spec,
                                            std::size_t n_samples = 4096,
                                            std::uint64_t seed = 20260822) {
  auto est = estimate_constants(spec, n_samples, seed);
  if (est.eps_prime_emp > spec.eps_prime + 1e-9)
    throw SpecError("declared eps_prime " + std::to_string(spec.eps_prime) +
                    " exceeded: " + est.worst_lipschitz);
  if (est.eps_dblprime_emp > spec.eps_dblprime + 1e-9)
    throw SpecError("declared eps_dblprime " + std::to_string(spec.eps_dblprime) +
                    " exceeded: " + est.worst_bound);
  return est;
}

}  // namespace mvsde
