#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mvsde/solver.hpp"
#include "mvsde/test_function.hpp"

namespace mvsde {

// Runs fn(path_index) once for every index. Workers pull indices from a
// shared counter and write only to per-path slots owned by the caller, so
// results do not depend on the thread count.
template <class Fn>
inline void run_paths(std::size_t n_paths, int threads, Fn&& fn) {
  if (threads <= 1 || n_paths <= 1) {
    for (std::size_t p = 0; p < n_paths; ++p) fn(p);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    while (true) {
      std::size_t p = next.fetch_add(1);
      if (p >= n_paths || failed.load()) break;
      try {
        fn(p);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  int n = std::min<int>(threads, int(n_paths));
  pool.reserve(std::size_t(n));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

// One solvable configuration entering a comparison: the coefficient data,
// its partition, the initial state and the discretization choices.
struct VerifySystem {
  CoefficientSpec spec;
  Partition partition;
  PartitionMeasure mu;
  SolverOptions opts;

  VerifySystem(CoefficientSpec s, Partition p, PartitionMeasure m, SolverOptions o = {})
      : spec(std::move(s)), partition(p), mu(std::move(m)), opts(o) {
    spec.validate();
    require(spec.dim == partition.dim() && spec.side == partition.side(),
            "system: spec and partition domains differ");
    require(mu.partition == partition, "system: initial state partition mismatch");
  }
};

struct SeminormEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::size_t argmax_f = 0;
  std::vector<double> per_f_mean, per_f_se;
  std::size_t n_paths = 0;
  double mean_r = 0.0;     // average stopping time actually used
  int segment_index = 0;

  json to_json() const {
    return {{"value", value},
            {"standard_error", standard_error},
            {"argmax_f", argmax_f},
            {"per_f_mean", per_f_mean},
            {"per_f_se", per_f_se},
            {"n_paths", n_paths},
            {"mean_r", mean_r},
            {"segment_index", segment_index}};
  }
};

namespace detail {

// Per-path supremum of pairing differences over grid times strictly before
// R, for each requested system pair and test function; plus the R used.
struct PairSupPass {
  std::span<const VerifySystem> systems;
  std::span<const std::pair<std::size_t, std::size_t>> pairs;
  std::span<const TestFunction> family;
  const DriverConfig* cfg = nullptr;
  double activity_bound = 0.0;  // <= 0 disables segmentation (R past the horizon)
  int segment_index = 0;

  std::vector<KernelEvaluator> kes;
  std::vector<std::vector<double>> fv;  // [system][f * n_cells + c]

  void prepare() {
    for (const auto& s : systems) {
      kes.emplace_back(s.spec, s.partition);
      std::vector<double> rows;
      for (const auto& f : family) {
        require(f.dim() == s.partition.dim() && f.side() == s.partition.side(),
                "seminorm: test function domain mismatch");
        auto v = representative_values(s.partition, f);
        rows.insert(rows.end(), v.begin(), v.end());
      }
      fv.push_back(std::move(rows));
    }
  }

  // sups: pairs.size()*family.size() running maxima, filled per path.
  double run_one(std::size_t path_index, std::span<double> sups) const {
    DriverPath path = sample_driver(*cfg, path_index);
    double R = std::numeric_limits<double>::infinity();
    if (activity_bound > 0.0) {
      Segmentation seg = segment(path, activity_bound);
      // the window is [0, end of segment #segment_index), a left limit
      std::size_t si = std::min<std::size_t>(std::size_t(segment_index) + 1,
                                             seg.breakpoints.size() - 1);
      R = seg.breakpoints[si];
    }
    std::vector<PathStepper> st;
    st.reserve(systems.size());
    for (std::size_t s = 0; s < systems.size(); ++s)
      st.emplace_back(kes[s], systems[s].mu, systems[s].opts);

    std::size_t nf = family.size();
    std::vector<double> vals(systems.size() * nf);
    std::fill(sups.begin(), sups.end(), 0.0);
    auto scan = [&](double t) {
      if (t >= R) return;
      for (std::size_t s = 0; s < systems.size(); ++s) {
        auto n = std::size_t(kes[s].n_cells());
        std::span<const double> rows(fv[s]);
        for (std::size_t j = 0; j < nf; ++j)
          vals[s * nf + j] = kahan_dot(st[s].weights(), rows.subspan(j * n, n));
      }
      for (std::size_t q = 0; q < pairs.size(); ++q)
        for (std::size_t j = 0; j < nf; ++j) {
          double diff = std::fabs(vals[pairs[q].first * nf + j] -
                                  vals[pairs[q].second * nf + j]);
          sups[q * nf + j] = std::max(sups[q * nf + j], diff);
        }
    };
    scan(path.times[0]);
    for (std::size_t i = 0; i < path.n_steps() && path.times[i] < R; ++i) {
      for (auto& s : st) s.advance(path, i);
      scan(path.times[i + 1]);
    }
    return std::isfinite(R) ? R : path.horizon();
  }
};

}  // namespace detail

// Monte-Carlo pairwise seminorms over common driver paths. All systems are
// solved once per path; every requested pair is reduced from the same pass.
inline std::vector<SeminormEstimate> pairwise_seminorms(
    std::span<const VerifySystem> systems,
    std::span<const std::pair<std::size_t, std::size_t>> pairs,
    std::span<const TestFunction> family, const DriverConfig& cfg, std::size_t n_paths,
    double activity_bound, int segment_index = 0, int threads = 1) {
  require(!systems.empty() && !pairs.empty() && !family.empty(),
          "seminorm: nothing to compare");
  require(n_paths >= 1, "seminorm: need at least one path");
  for (const auto& s : systems)
    require(s.spec.d == cfg.d, "seminorm: driver dimension mismatch");
  for (const auto& pr : pairs)
    require(pr.first < systems.size() && pr.second < systems.size(),
            "seminorm: pair index out of range");

  detail::PairSupPass pass{systems, pairs, family, &cfg, activity_bound, segment_index};
  pass.prepare();

  std::size_t nf = family.size();
  std::vector<std::vector<double>> slot(n_paths);
  std::vector<double> r_slot(n_paths, 0.0);
  run_paths(n_paths, threads, [&](std::size_t p) {
    slot[p].assign(pairs.size() * nf, 0.0);
    r_slot[p] = pass.run_one(p, slot[p]);
  });

  std::vector<SeminormEstimate> out;
  MeanAccumulator r_acc;
  for (std::size_t p = 0; p < n_paths; ++p) r_acc.add(r_slot[p]);
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    SeminormEstimate est;
    est.n_paths = n_paths;
    est.segment_index = segment_index;
    est.mean_r = r_acc.mean();
    for (std::size_t j = 0; j < nf; ++j) {
      MeanAccumulator acc;
      for (std::size_t p = 0; p < n_paths; ++p) acc.add(slot[p][q * nf + j]);
      est.per_f_mean.push_back(acc.mean());
      est.per_f_se.push_back(acc.standard_error());
      if (acc.mean() > est.value) {
        est.value = acc.mean();
        est.standard_error = acc.standard_error();
        est.argmax_f = j;
      }
    }
    out.push_back(std::move(est));
  }
  return out;
}

inline SeminormEstimate estimate_seminorm(const VerifySystem& s1, const VerifySystem& s2,
                                          std::span<const TestFunction> family,
                                          const DriverConfig& cfg, std::size_t n_paths,
                                          double activity_bound, int segment_index = 0,
                                          int threads = 1) {
  std::vector<VerifySystem> sys{s1, s2};
  std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 1}};
  return pairwise_seminorms(sys, pairs, family, cfg, n_paths, activity_bound,
                            segment_index, threads)[0];
}

// Sup of |f1 - f2| over a uniform sample grid on [0, side]^dim (endpoints
// included); the practical stand-in for the sup norm of catalog data.
template <class F1, class F2>
inline double sup_diff_on_grid(F1&& f1, F2&& f2, int dim, double side,
                               std::int64_t nodes_per_axis = 0) {
  if (nodes_per_axis <= 0)
    nodes_per_axis = dim == 1 ? 1025 : (dim == 2 ? 65 : 17);
  std::vector<double> x(dim);
  std::vector<std::int64_t> g(dim, 0);
  double worst = 0.0;
  while (true) {
    for (int a = 0; a < dim; ++a)
      x[a] = side * double(g[a]) / double(nodes_per_axis - 1);
    worst = std::max(worst, std::fabs(f1(std::span<const double>(x)) -
                                      f2(std::span<const double>(x))));
    int a = 0;
    for (; a < dim; ++a) {
      if (++g[a] < nodes_per_axis) break;
      g[a] = 0;
    }
    if (a == dim) break;
  }
  return worst;
}

struct InequalityReport {
  std::string name;
  double lhs = 0.0, rhs = 0.0, factor = 0.0;
  double seminorm = 0.0, seminorm_se = 0.0;
  json inputs;
  std::vector<double> term_norms;
  double critical_a_prime = 0.0;
  bool regime_valid = true;
  bool pass = false;

  json to_json() const {
    return {{"name", name},
            {"lhs", lhs},
            {"rhs", rhs},
            {"factor", factor},
            {"seminorm", seminorm},
            {"seminorm_se", seminorm_se},
            {"inputs", inputs},
            {"term_norms", term_norms},
            {"critical_a_prime", critical_a_prime},
            {"regime_valid", regime_valid},
            {"pass", pass}};
  }
};

namespace detail {

inline void require_separated(const VerifySystem& s, const char* who) {
  require(s.spec.terms.size() == 1,
          std::string(who) + ": needs the single-term separated coefficient form");
}

inline double composed_gcheck(const VerifySystem& s, int e, std::span<const double> x,
                              std::vector<double>& scratch) {
  const auto& t = s.spec.terms.front();
  scratch.resize(x.size());
  t.v.apply(x, s.spec.side, scratch);
  return t.gcheck[std::size_t(e)].eval(scratch);
}

}  // namespace detail

// First comparison inequality: three systems sharing the separated form,
// differing in their moment families and composed spatial factors. The
// seminorm on the left couples the primed and double-primed systems; the
// right side is built from static sup-norm differences.
inline InequalityReport check_ineq1(const VerifySystem& base, const VerifySystem& prime,
                                    const VerifySystem& dprime,
                                    std::span<const TestFunction> family,
                                    const DriverConfig& cfg, std::size_t n_paths, double a,
                                    double a_prime, int threads = 1) {
  detail::require_separated(base, "ineq1");
  detail::require_separated(prime, "ineq1");
  detail::require_separated(dprime, "ineq1");
  require(base.spec.d == prime.spec.d && base.spec.d == dprime.spec.d,
          "ineq1: driver dimensions differ");
  require(base.spec.h.size() == prime.spec.h.size() &&
              base.spec.h.size() == dprime.spec.h.size(),
          "ineq1: moment families differ in size");
  require(a > 0.0 && a_prime > 0.0, "ineq1: a and a' must be positive");

  int d = base.spec.d;
  std::size_t k = base.spec.h.size();
  double epsp = std::max({base.spec.eps_prime, prime.spec.eps_prime, dprime.spec.eps_prime});
  double epsd = std::max(
      {base.spec.eps_dblprime, prime.spec.eps_dblprime, dprime.spec.eps_dblprime});
  int dim = base.spec.dim;
  double side = base.spec.side;

  auto h_diff = [&](const VerifySystem& s1, const VerifySystem& s2) {
    KahanSum sum;
    for (std::size_t i = 0; i < k; ++i)
      sum.add(sup_diff_on_grid([&](std::span<const double> x) { return s1.spec.h[i].eval(x); },
                               [&](std::span<const double> x) { return s2.spec.h[i].eval(x); },
                               dim, side));
    return sum.get();
  };
  std::vector<double> scratch;
  auto g_diff = [&](const VerifySystem& s1, const VerifySystem& s2) {
    KahanSum sum;
    for (int e = 0; e < d; ++e)
      sum.add(sup_diff_on_grid(
          [&](std::span<const double> x) { return detail::composed_gcheck(s1, e, x, scratch); },
          [&](std::span<const double> x) { return detail::composed_gcheck(s2, e, x, scratch); },
          dim, side));
    return sum.get();
  };

  double s1 = h_diff(base, prime);
  double s2 = h_diff(prime, dprime);
  double s3 = g_diff(prime, base);
  double s4 = g_diff(prime, dprime);

  double rho = 2.0 * double(k) * epsp + 3.0 * epsd;
  InequalityReport rep;
  rep.name = "ineq1";
  rep.factor = 1.0 - double(d) * a_prime * a * rho;
  rep.term_norms = {s1, s2, s3, s4};
  double tau = 4.0 * d * a * epsp * s1 + 2.0 * d * a * epsp * s2 + 2.0 * a * epsd * s3 +
               2.0 * a * epsd * s4;  // rhs per unit a'
  rep.rhs = a_prime * tau;

  auto est = estimate_seminorm(prime, dprime, family, cfg, n_paths, a, 0, threads);
  rep.seminorm = est.value;
  rep.seminorm_se = est.standard_error;
  rep.lhs = rep.factor * est.value;
  rep.regime_valid = rep.factor > 0.0;
  double denom = tau + double(d) * a * rho * est.value;
  rep.critical_a_prime = denom > 0.0 ? est.value / denom : 0.0;
  rep.pass = !rep.regime_valid ||
             rep.lhs <= rep.rhs + 3.0 * rep.factor * est.standard_error;
  rep.inputs = {{"a", a},          {"a_prime", a_prime}, {"eps_prime", epsp},
                {"eps_dblprime", epsd}, {"d", d},         {"k", k},
                {"T", side},       {"n_paths", n_paths}, {"mean_r", est.mean_r}};
  return rep;
}

// Second comparison inequality, for differentiable coefficients: the right
// side is the expected running sup over x of the two coefficients' gap,
// evaluated along each system's own solution.
inline InequalityReport check_ineq2(const VerifySystem& prime, const VerifySystem& dprime,
                                    std::span<const TestFunction> family,
                                    const DriverConfig& cfg, std::size_t n_paths, double a,
                                    double a_prime, int threads = 1,
                                    std::int64_t sup_nodes = 0) {
  require(prime.spec.d == dprime.spec.d, "ineq2: driver dimensions differ");
  require(prime.spec.dim == dprime.spec.dim && prime.spec.side == dprime.spec.side,
          "ineq2: domains differ");
  require(a > 0.0 && a_prime > 0.0, "ineq2: a and a' must be positive");
  int d = prime.spec.d;
  int dim = prime.spec.dim;
  double side = prime.spec.side;
  if (sup_nodes <= 0) sup_nodes = dim == 1 ? 1025 : (dim == 2 ? 33 : 9);
  double epsd = std::max(prime.spec.eps_dblprime, dprime.spec.eps_dblprime);

  // x sample grid and the two systems' per-term spatial factor values on it
  std::int64_t n_grid = 1;
  for (int aexp = 0; aexp < dim; ++aexp) n_grid *= sup_nodes;
  auto term_values = [&](const VerifySystem& s) {
    std::size_t nt = s.spec.terms.size();
    std::vector<double> v(nt * std::size_t(d) * std::size_t(n_grid));
    std::vector<double> x(dim), mapped(dim);
    std::vector<std::int64_t> g(dim, 0);
    for (std::int64_t p = 0; p < n_grid; ++p) {
      std::int64_t rem = p;
      for (int ax = dim - 1; ax >= 0; --ax) {
        g[ax] = rem % sup_nodes;
        rem /= sup_nodes;
      }
      for (int ax = 0; ax < dim; ++ax)
        x[ax] = side * double(g[ax]) / double(sup_nodes - 1);
      for (std::size_t t = 0; t < nt; ++t) {
        s.spec.terms[t].v.apply(x, side, mapped);
        for (int e = 0; e < d; ++e)
          v[(t * std::size_t(d) + std::size_t(e)) * std::size_t(n_grid) + std::size_t(p)] =
              s.spec.terms[t].gcheck[std::size_t(e)].eval(mapped);
      }
    }
    return v;
  };
  std::vector<double> g1 = term_values(prime), g2 = term_values(dprime);
  std::size_t nt1 = prime.spec.terms.size(), nt2 = dprime.spec.terms.size();

  std::vector<VerifySystem> systems{prime, dprime};
  std::vector<KernelEvaluator> kes;
  kes.emplace_back(systems[0].spec, systems[0].partition);
  kes.emplace_back(systems[1].spec, systems[1].partition);
  std::vector<std::vector<double>> fv(2);
  for (int s = 0; s < 2; ++s)
    for (const auto& f : family) {
      auto v = representative_values(systems[std::size_t(s)].partition, f);
      fv[std::size_t(s)].insert(fv[std::size_t(s)].end(), v.begin(), v.end());
    }

  std::size_t nf = family.size();
  // slots: per path, nf pairing sups followed by d coefficient-gap sups, then R
  std::vector<std::vector<double>> slot(n_paths);
  run_paths(n_paths, threads, [&](std::size_t p) {
    DriverPath path = sample_driver(cfg, p);
    Segmentation seg = segment(path, a);
    double R = seg.breakpoints[std::min<std::size_t>(1, seg.breakpoints.size() - 1)];
    PathStepper st1(kes[0], systems[0].mu, systems[0].opts);
    PathStepper st2(kes[1], systems[1].mu, systems[1].opts);
    std::vector<double> sups(nf + std::size_t(d) + 1, 0.0);
    std::vector<double> y1(kes[0].n_moments()), y2(kes[1].n_moments());
    std::vector<double> c1(nt1), c2(nt2);

    auto scan = [&](double t) {
      if (t >= R) return;
      for (std::size_t j = 0; j < nf; ++j) {
        auto n1 = std::size_t(kes[0].n_cells()), n2 = std::size_t(kes[1].n_cells());
        double v1 = kahan_dot(st1.weights(), std::span<const double>(fv[0]).subspan(j * n1, n1));
        double v2 = kahan_dot(st2.weights(), std::span<const double>(fv[1]).subspan(j * n2, n2));
        sups[j] = std::max(sups[j], std::fabs(v1 - v2));
      }
      kes[0].moments(st1.weights(), y1);
      kes[1].moments(st2.weights(), y2);
      double chi1 = systems[0].spec.cutoff.eval(y1[0]);
      double chi2 = systems[1].spec.cutoff.eval(y2[0]);
      for (int e = 0; e < d; ++e) {
        for (std::size_t t1 = 0; t1 < nt1; ++t1)
          c1[t1] = chi1 * systems[0].spec.terms[t1].gbar[std::size_t(e)].eval(y1);
        for (std::size_t t2 = 0; t2 < nt2; ++t2)
          c2[t2] = chi2 * systems[1].spec.terms[t2].gbar[std::size_t(e)].eval(y2);
        double worst = 0.0;
        const double* b1 = g1.data() + std::size_t(e) * std::size_t(n_grid);
        const double* b2 = g2.data() + std::size_t(e) * std::size_t(n_grid);
        for (std::int64_t q = 0; q < n_grid; ++q) {
          double val = 0.0;
          for (std::size_t t1 = 0; t1 < nt1; ++t1)
            val += c1[t1] * b1[t1 * std::size_t(d) * std::size_t(n_grid) + std::size_t(q)];
          for (std::size_t t2 = 0; t2 < nt2; ++t2)
            val -= c2[t2] * b2[t2 * std::size_t(d) * std::size_t(n_grid) + std::size_t(q)];
          worst = std::max(worst, std::fabs(val));
        }
        sups[nf + std::size_t(e)] = std::max(sups[nf + std::size_t(e)], worst);
      }
    };
    scan(path.times[0]);
    for (std::size_t i = 0; i < path.n_steps() && path.times[i] < R; ++i) {
      st1.advance(path, i);
      st2.advance(path, i);
      scan(path.times[i + 1]);
    }
    sups[nf + std::size_t(d)] = R;
    slot[p] = std::move(sups);
  });

  InequalityReport rep;
  rep.name = "ineq2";
  double rho = 2.0 * epsd * std::pow(side + 1.0, dim) + epsd;
  rep.factor = 1.0 - double(d) * a_prime * a * rho;

  SeminormEstimate est;
  est.n_paths = n_paths;
  for (std::size_t j = 0; j < nf; ++j) {
    MeanAccumulator acc;
    for (std::size_t p = 0; p < n_paths; ++p) acc.add(slot[p][j]);
    est.per_f_mean.push_back(acc.mean());
    est.per_f_se.push_back(acc.standard_error());
    if (acc.mean() > est.value) {
      est.value = acc.mean();
      est.standard_error = acc.standard_error();
      est.argmax_f = j;
    }
  }
  MeanAccumulator racc;
  for (std::size_t p = 0; p < n_paths; ++p) racc.add(slot[p][nf + std::size_t(d)]);
  est.mean_r = racc.mean();

  double tau = 0.0;  // rhs per unit a'
  for (int e = 0; e < d; ++e) {
    MeanAccumulator acc;
    for (std::size_t p = 0; p < n_paths; ++p) acc.add(slot[p][nf + std::size_t(e)]);
    rep.term_norms.push_back(acc.mean());
    tau += 2.0 * a * acc.mean();
  }
  rep.rhs = a_prime * tau;
  rep.seminorm = est.value;
  rep.seminorm_se = est.standard_error;
  rep.lhs = rep.factor * est.value;
  rep.regime_valid = rep.factor > 0.0;
  double denom = tau + double(d) * a * rho * est.value;
  rep.critical_a_prime = denom > 0.0 ? est.value / denom : 0.0;
  rep.pass = !rep.regime_valid ||
             rep.lhs <= rep.rhs + 3.0 * rep.factor * est.standard_error;
  rep.inputs = {{"a", a},
                {"a_prime", a_prime},
                {"eps_dblprime", epsd},
                {"d", d},
                {"l", dim},
                {"T", side},
                {"n_paths", n_paths},
                {"mean_r", est.mean_r}};
  return rep;
}

struct ConvergenceRow {
  int level_lo = 0, level_hi = 0;
  double seminorm = 0.0, se = 0.0;
  double bound = 0.0;   // ineq1 right side over its contraction factor
  double factor = 0.0;
  double ratio_to_prev = 0.0;  // seminorm ratio vs the previous row
  bool bounded = false;

  json to_json() const {
    return {{"level_lo", level_lo}, {"level_hi", level_hi}, {"seminorm", seminorm},
            {"se", se},             {"bound", bound},       {"factor", factor},
            {"ratio_to_prev", ratio_to_prev}, {"bounded", bounded}};
  }
};

struct ConvergenceStudy {
  int n0 = 0, n1 = 0;
  bool n0_bumped = false;
  std::vector<double> approx_err;  // per level, h part + composed part
  std::vector<ConvergenceRow> rows;
  bool cauchy_ok = true;

  json to_json() const {
    json jr = json::array();
    for (const auto& r : rows) jr.push_back(r.to_json());
    return {{"n0", n0},
            {"n1", n1},
            {"n0_bumped", n0_bumped},
            {"approx_err", approx_err},
            {"rows", jr},
            {"cauchy_ok", cauchy_ok}};
  }
};

// Dyadic approximation ladder for a continuous target: level n snaps the
// spatial data to the level-n partition. Consecutive seminorms must decrease
// and stay below the first inequality's right side.
inline ConvergenceStudy convergence_study(const CoefficientSpec& target, int n0, int n1,
                                          std::span<const TestFunction> family,
                                          const DriverConfig& cfg, std::size_t n_paths,
                                          double a, double a_prime, int threads = 1) {
  target.validate();
  require(n0 >= 1 && n1 > n0, "convergence: need an increasing level range");
  int dim = target.dim;
  double side = target.side;
  int d = target.d;
  std::size_t k = target.h.size();

  auto level_spec = [&](int n) {
    CoefficientSpec s = target;
    for (std::size_t i = 0; i < s.h.size(); ++i)
      if (s.h[i].kind() != TestFunction::Kind::One)
        s.h[i] = TestFunction::snapped(s.h[i], n);
    for (auto& t : s.terms) t.v = VMap::snap(n);
    return s;
  };
  std::vector<double> scratch;
  auto approx_err = [&](int n) {
    CoefficientSpec sn = level_spec(n);
    KahanSum sum;
    for (std::size_t i = 0; i < k; ++i)
      sum.add(sup_diff_on_grid(
          [&](std::span<const double> x) { return target.h[i].eval(x); },
          [&](std::span<const double> x) { return sn.h[i].eval(x); }, dim, side));
    for (const auto& t : sn.terms)
      for (int e = 0; e < d; ++e)
        sum.add(sup_diff_on_grid(
            [&](std::span<const double> x) {
              return target.terms.front().gcheck[std::size_t(e)].eval(x);
            },
            [&](std::span<const double> x) {
              scratch.resize(x.size());
              t.v.apply(x, side, scratch);
              return t.gcheck[std::size_t(e)].eval(scratch);
            },
            dim, side));
    return sum.get();
  };

  ConvergenceStudy study;
  // the ladder starts where the 2^-n approximation quality first holds
  int start = n0;
  while (start < n1 && approx_err(start) >= std::pow(0.5, start)) {
    ++start;
    study.n0_bumped = true;
  }
  study.n0 = start;
  study.n1 = n1;

  std::vector<VerifySystem> systems;
  std::vector<std::pair<std::size_t, std::size_t>> prs;
  for (int n = start; n <= n1; ++n) {
    Partition p(dim, side, n);
    systems.emplace_back(level_spec(n), p, PartitionMeasure::uniform(p));
    study.approx_err.push_back(approx_err(n));
  }
  for (std::size_t s = 0; s + 1 < systems.size(); ++s) prs.push_back({s, s + 1});

  auto est = pairwise_seminorms(systems, prs, family, cfg, n_paths, a, 0, threads);

  double epsp = target.eps_prime, epsd = target.eps_dblprime;
  double rho = 2.0 * double(k) * epsp + 3.0 * epsd;
  double factor = 1.0 - double(d) * a_prime * a * rho;
  for (std::size_t r = 0; r < prs.size(); ++r) {
    ConvergenceRow row;
    row.level_lo = start + int(r);
    row.level_hi = row.level_lo + 1;
    row.seminorm = est[r].value;
    row.se = est[r].standard_error;
    row.factor = factor;
    double em = study.approx_err[r], en = study.approx_err[r + 1];
    double rhs = 4.0 * d * a_prime * a * epsp * double(k) * em +
                 2.0 * d * a_prime * a * epsp * double(k) * (em + en) +
                 2.0 * a_prime * a * epsd * double(d) * em +
                 2.0 * a_prime * a * epsd * double(d) * (em + en);
    row.bound = rhs;
    row.bounded = factor <= 0.0 ||
                  factor * row.seminorm <= rhs + 3.0 * factor * row.se;
    if (r > 0) {
      const auto& prev = study.rows.back();
      row.ratio_to_prev = prev.seminorm > 0.0 ? row.seminorm / prev.seminorm : 0.0;
      double se_comb = std::sqrt(row.se * row.se + prev.se * prev.se);
      if (row.seminorm > prev.seminorm + 3.0 * se_comb) study.cauchy_ok = false;
    }
    if (!row.bounded) study.cauchy_ok = false;
    study.rows.push_back(row);
  }
  return study;
}

struct UniquenessReport {
  SeminormEstimate coarse_vs_mid;  // dt vs dt/2
  SeminormEstimate mid_vs_fine;    // dt/2 vs dt/4
  double ratio = 0.0;

  json to_json() const {
    return {{"coarse_vs_mid", coarse_vs_mid.to_json()},
            {"mid_vs_fine", mid_vs_fine.to_json()},
            {"ratio", ratio}};
  }
};

// One spec solved at three nested step sizes over shared randomness; the
// two adjacent seminorms and their ratio expose the scheme's strong order.
inline UniquenessReport uniqueness_probe(const VerifySystem& sys,
                                         std::span<const TestFunction> family,
                                         const DriverConfig& cfg, std::size_t n_paths,
                                         int threads = 1) {
  require(sys.spec.d == cfg.d, "uniqueness: driver dimension mismatch");
  require(cfg.n_steps >= 2, "uniqueness: need at least 2 steps");
  KernelEvaluator ke(sys.spec, sys.partition);
  std::vector<double> fv;
  std::size_t nf = family.size();
  for (const auto& f : family) {
    auto v = representative_values(sys.partition, f);
    fv.insert(fv.end(), v.begin(), v.end());
  }
  auto n = std::size_t(ke.n_cells());

  // per path: 2*nf running sups (coarse-vs-mid at coarse nodes, mid-vs-fine
  // at mid nodes)
  std::vector<std::vector<double>> slot(n_paths);
  run_paths(n_paths, threads, [&](std::size_t p) {
    DriverPath fine = sample_driver(cfg, p, cfg.n_steps * 4);
    DriverPath mid = coarsen_driver(fine, 2);
    DriverPath coarse = coarsen_driver(fine, 4);
    PathStepper stf(ke, sys.mu, sys.opts), stm(ke, sys.mu, sys.opts),
        stc(ke, sys.mu, sys.opts);
    std::vector<double> sups(2 * nf, 0.0);
    std::vector<double> pc(nf), pm(nf), pf(nf);
    auto pairings = [&](const PathStepper& st, std::span<double> out) {
      for (std::size_t j = 0; j < nf; ++j)
        out[j] = kahan_dot(st.weights(), std::span<const double>(fv).subspan(j * n, n));
    };
    std::size_t im = 0, ic = 0;  // node cursors on mid and coarse grids
    auto scan = [&](std::size_t fine_node) {
      double t = fine.times[fine_node];
      bool on_mid = im < mid.times.size() && mid.times[im] == t;
      bool on_coarse = ic < coarse.times.size() && coarse.times[ic] == t;
      if (on_mid) {
        pairings(stf, pf);
        pairings(stm, pm);
        for (std::size_t j = 0; j < nf; ++j)
          sups[nf + j] = std::max(sups[nf + j], std::fabs(pm[j] - pf[j]));
      }
      if (on_coarse) {
        pairings(stc, pc);
        if (!on_mid) pairings(stm, pm);
        for (std::size_t j = 0; j < nf; ++j)
          sups[j] = std::max(sups[j], std::fabs(pc[j] - pm[j]));
      }
      if (on_mid) {
        if (im + 1 < mid.times.size()) stm.advance(mid, im);
        ++im;
      }
      if (on_coarse) {
        if (ic + 1 < coarse.times.size()) stc.advance(coarse, ic);
        ++ic;
      }
    };
    for (std::size_t i = 0; i + 1 < fine.times.size(); ++i) {
      scan(i);
      stf.advance(fine, i);
    }
    scan(fine.times.size() - 1);
    slot[p] = std::move(sups);
  });

  UniquenessReport rep;
  auto reduce = [&](std::size_t off) {
    SeminormEstimate est;
    est.n_paths = n_paths;
    for (std::size_t j = 0; j < nf; ++j) {
      MeanAccumulator acc;
      for (std::size_t p = 0; p < n_paths; ++p) acc.add(slot[p][off + j]);
      est.per_f_mean.push_back(acc.mean());
      est.per_f_se.push_back(acc.standard_error());
      if (acc.mean() > est.value) {
        est.value = acc.mean();
        est.standard_error = acc.standard_error();
        est.argmax_f = j;
      }
    }
    return est;
  };
  rep.coarse_vs_mid = reduce(0);
  rep.mid_vs_fine = reduce(nf);
  rep.ratio = rep.mid_vs_fine.value > 0.0 ? rep.coarse_vs_mid.value / rep.mid_vs_fine.value
                                          : 0.0;
  return rep;
}

struct ZScoreReport {
  std::vector<double> checkpoint_times;
  std::size_t n_f = 0;
  std::vector<double> mean, se, z;   // checkpoint-major [t * n_f + j]
  std::vector<std::uint8_t> exact;   // variance at noise level: conservation is exact
  std::vector<double> reference;     // initial pairings per f
  std::size_t n_paths = 0;
  double max_abs_z = 0.0;

  json to_json() const {
    return {{"checkpoint_times", checkpoint_times},
            {"n_f", n_f},
            {"mean", mean},
            {"se", se},
            {"z", z},
            {"exact", exact},
            {"reference", reference},
            {"n_paths", n_paths},
            {"max_abs_z", max_abs_z}};
  }
};

// Sample means of the pairings at fixed times against their initial values:
// each pairing is a martingale, so the z-scores should stay small.
inline ZScoreReport martingale_zscores(const VerifySystem& sys,
                                       std::span<const TestFunction> family,
                                       std::span<const double> checkpoints,
                                       const DriverConfig& cfg, std::size_t n_paths,
                                       int threads = 1) {
  require(n_paths >= 100, "zscores: need at least 100 paths");
  require(!checkpoints.empty(), "zscores: need at least one checkpoint");
  KernelEvaluator ke(sys.spec, sys.partition);
  std::vector<double> fv;
  std::size_t nf = family.size();
  for (const auto& f : family) {
    auto v = representative_values(sys.partition, f);
    fv.insert(fv.end(), v.begin(), v.end());
  }
  auto n = std::size_t(ke.n_cells());
  std::size_t nt = checkpoints.size();

  std::vector<std::vector<double>> slot(n_paths);
  run_paths(n_paths, threads, [&](std::size_t p) {
    DriverPath path = sample_driver(cfg, p);
    PathStepper st(ke, sys.mu, sys.opts);
    std::vector<double> vals(nt * nf, 0.0);
    std::size_t next = 0;
    auto maybe_record = [&](std::size_t node) {
      while (next < nt && path.times[node] >= checkpoints[next] - 1e-12) {
        for (std::size_t j = 0; j < nf; ++j)
          vals[next * nf + j] =
              kahan_dot(st.weights(), std::span<const double>(fv).subspan(j * n, n));
        ++next;
      }
    };
    maybe_record(0);
    for (std::size_t i = 0; i < path.n_steps() && next < nt; ++i) {
      st.advance(path, i);
      maybe_record(i + 1);
    }
    slot[p] = std::move(vals);
  });

  ZScoreReport rep;
  rep.checkpoint_times.assign(checkpoints.begin(), checkpoints.end());
  rep.n_f = nf;
  rep.n_paths = n_paths;
  for (std::size_t j = 0; j < nf; ++j)
    rep.reference.push_back(
        kahan_dot(sys.mu.weights, std::span<const double>(fv).subspan(j * n, n)));
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t j = 0; j < nf; ++j) {
      MeanAccumulator acc;
      for (std::size_t p = 0; p < n_paths; ++p) acc.add(slot[p][t * nf + j]);
      double m = acc.mean(), s = acc.standard_error();
      double ref = rep.reference[j];
      double scale = std::max(1.0, std::fabs(ref));
      bool ex = s < 1e-13 * scale;
      double zv = ex ? 0.0 : (m - ref) / s;
      rep.mean.push_back(m);
      rep.se.push_back(s);
      rep.z.push_back(zv);
      rep.exact.push_back(ex ? 1 : 0);
      rep.max_abs_z = std::max(rep.max_abs_z, std::fabs(zv));
    }
  return rep;
}

}  // namespace mvsde
