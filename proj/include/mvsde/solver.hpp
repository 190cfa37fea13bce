#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvsde/coefficient.hpp"
#include "mvsde/driver.hpp"

namespace mvsde {

enum class SchemeKind { Linear, Exponential };

inline SchemeKind scheme_from_string(const std::string& s) {
  if (s == "linear") return SchemeKind::Linear;
  if (s == "exponential") return SchemeKind::Exponential;
  throw SpecError("unknown scheme: " + s);
}
inline const char* scheme_name(SchemeKind s) {
  return s == SchemeKind::Linear ? "linear" : "exponential";
}

struct SolverOptions {
  SchemeKind scheme = SchemeKind::Linear;
  bool condition1_scaling = true;
  bool abort_below_mass_floor = true;
};

struct Diagnostics {
  double max_mass_error = 0.0;       // vs the initial total
  double min_weight = std::numeric_limits<double>::infinity();
  double max_cond2_residual = 0.0;   // worst |integral of k against the state|
  double max_reconcile_rel = 0.0;    // weights vs mu * running factors
  long scaling_events = 0;           // positivity rescues taken
  std::size_t n_steps = 0;

  void merge(const Diagnostics& o) noexcept {
    max_mass_error = std::max(max_mass_error, o.max_mass_error);
    min_weight = std::min(min_weight, o.min_weight);
    max_cond2_residual = std::max(max_cond2_residual, o.max_cond2_residual);
    max_reconcile_rel = std::max(max_reconcile_rel, o.max_reconcile_rel);
    scaling_events += o.scaling_events;
    n_steps += o.n_steps;
  }
};

// Left-limit context in which the kernel was evaluated for one step; enough
// to replay the same multiplicative updates at any query point.
struct StepRecord {
  std::vector<double> y, S;
  double mass = 0.0;
  double lambda_cont = 1.0;
  bool has_jump = false;
  std::vector<double> y_jump, S_jump;
  double mass_jump = 0.0;
  double lambda_jump = 1.0;
};

// Advances one weight vector along a driver path. Kernel evaluation is
// always at the left limit; a step applies the continuous increment first
// and then, if the right node carries a jump, re-evaluates and applies it.
class PathStepper {
 public:
  PathStepper(const KernelEvaluator& ke, const PartitionMeasure& mu, SolverOptions opts)
      : ke_(&ke),
        opts_(opts),
        mu_(mu.weights),
        w_(mu.weights),
        factors_(mu.weights.size(), 1.0),
        y_(ke.n_moments()),
        S_(ke.n_terms() * std::size_t(ke.spec().d)),
        k_(std::size_t(ke.spec().d) * ke.n_cells()) {
    require(std::int64_t(mu_.size()) == ke.n_cells(), "stepper: state size mismatch");
    mu_mass_ = kahan_total(mu_);
    observe(0);
  }

  const std::vector<double>& weights() const noexcept { return w_; }
  const std::vector<double>& factors() const noexcept { return factors_; }
  const Diagnostics& diagnostics() const noexcept { return diag_; }
  double mass() const noexcept { return mass_; }

  void advance(const DriverPath& path, std::size_t i, StepRecord* rec = nullptr) {
    int d = ke_->spec().d;
    auto n = ke_->n_cells();
    const double* dYc = path.cont.data() + i * d;
    const double* qv = path.quad_var.data() + i * d;

    left_context(i);
    if (rec) {
      rec->y = y_;
      rec->S = S_;
      rec->mass = mass_;
      rec->has_jump = false;
      rec->lambda_cont = 1.0;
      rec->lambda_jump = 1.0;
    }
    ke_->eval(y_, S_, mass_, k_);
    diag_.max_cond2_residual =
        std::max(diag_.max_cond2_residual, ke_->condition2_residual(w_, k_));

    if (opts_.scheme == SchemeKind::Linear) {
      double lambda = guard(std::span<const double>(dYc, d));
      if (rec) rec->lambda_cont = lambda;
      for (std::int64_t c = 0; c < n; ++c) {
        double dot = 0.0;
        for (int e = 0; e < d; ++e) dot += k_[std::size_t(e) * n + c] * dYc[e];
        double f = 1.0 + lambda * dot;
        if (f < 0.0 && !opts_.condition1_scaling)
          throw NumericalAbort("solver: negative factor at step " + std::to_string(i) +
                               ", cell " + std::to_string(c) + " (scaling disabled)");
        w_[c] *= f;
        factors_[c] *= f;
      }
    } else {
      for (std::int64_t c = 0; c < n; ++c) {
        double arg = 0.0;
        for (int e = 0; e < d; ++e) {
          double kec = k_[std::size_t(e) * n + c];
          arg += kec * dYc[e] - 0.5 * kec * kec * qv[e];
        }
        double f = std::exp(arg);
        w_[c] *= f;
        factors_[c] *= f;
      }
    }

    if (const auto* j = path.jump_at(i + 1)) {
      left_context(i);  // refresh pairings at the post-continuous state
      if (rec) {
        rec->has_jump = true;
        rec->y_jump = y_;
        rec->S_jump = S_;
        rec->mass_jump = mass_;
      }
      ke_->eval(y_, S_, mass_, k_);
      diag_.max_cond2_residual =
          std::max(diag_.max_cond2_residual, ke_->condition2_residual(w_, k_));
      double lambda = guard(j->delta);
      if (rec) rec->lambda_jump = lambda;
      for (std::int64_t c = 0; c < n; ++c) {
        double dot = 0.0;
        for (int e = 0; e < d; ++e) dot += k_[std::size_t(e) * n + c] * j->delta[e];
        double f = 1.0 + lambda * dot;
        if (f < 0.0 && !opts_.condition1_scaling)
          throw NumericalAbort("solver: negative jump factor at step " + std::to_string(i) +
                               ", cell " + std::to_string(c) + " (scaling disabled)");
        w_[c] *= f;
        factors_[c] *= f;
      }
    }
    observe(i + 1);
    ++diag_.n_steps;
  }

 private:
  void left_context(std::size_t step) {
    ke_->moments(w_, y_);
    ke_->term_pairings(w_, S_);
    mass_ = y_[0];  // h starts with the constant 1
    if (!std::isfinite(mass_))
      throw NumericalAbort("solver: non-finite mass before step " + std::to_string(step));
    if (opts_.abort_below_mass_floor && mass_ < kMassFloor)
      throw NumericalAbort("solver: total mass " + std::to_string(mass_) +
                           " fell below the floor 1/3 before step " + std::to_string(step));
  }

  // Positivity guard for a multiplicative update: scales the whole kernel so
  // every cell factor stays at least jump_margin away from zero. Scaling is
  // uniform across cells, so the centering identity is preserved.
  double guard(std::span<const double> dY) {
    if (!opts_.condition1_scaling) return 1.0;
    int d = ke_->spec().d;
    double mind = condition1_min_dot(k_, dY, d, ke_->n_cells());
    double lambda = condition1_scale(mind, ke_->spec().jump_margin);
    if (lambda < 1.0) ++diag_.scaling_events;
    return lambda;
  }

  void observe(std::size_t step) {
    double m = kahan_total(w_);
    if (!std::isfinite(m))
      throw NumericalAbort("solver: non-finite mass after step " + std::to_string(step));
    diag_.max_mass_error = std::max(diag_.max_mass_error, std::fabs(m - mu_mass_));
    for (std::size_t c = 0; c < w_.size(); ++c) {
      diag_.min_weight = std::min(diag_.min_weight, w_[c]);
      diag_.max_reconcile_rel =
          std::max(diag_.max_reconcile_rel, rel_diff(w_[c], mu_[c] * factors_[c]));
    }
  }

  const KernelEvaluator* ke_;
  SolverOptions opts_;
  std::vector<double> mu_, w_, factors_;
  std::vector<double> y_, S_, k_;
  double mu_mass_ = 0.0;
  double mass_ = 0.0;
  Diagnostics diag_;
};

struct SolutionPath {
  std::optional<Partition> partition;
  std::vector<double> checkpoint_times;
  std::vector<std::size_t> checkpoint_nodes;
  std::vector<std::vector<double>> states;   // weights per checkpoint
  std::vector<std::vector<double>> factors;  // running factors per checkpoint
  Diagnostics diagnostics;

  PartitionMeasure state_at(std::size_t i) const {
    require(partition.has_value() && i < states.size(), "solution: no such checkpoint");
    return PartitionMeasure(*partition, states[i]);
  }
};

// Node indices at which states are recorded: the user-requested times
// (snapped to the first grid node at or past each), plus both endpoints,
// every jump node, and any segmentation breakpoints.
inline std::vector<std::size_t> checkpoint_nodes(const DriverPath& path,
                                                 std::span<const double> requested,
                                                 const Segmentation* seg = nullptr) {
  std::vector<std::size_t> nodes;
  nodes.push_back(0);
  nodes.push_back(path.times.size() - 1);
  for (double t : requested) {
    auto it = std::lower_bound(path.times.begin(), path.times.end(), t - 1e-12);
    if (it != path.times.end()) nodes.push_back(std::size_t(it - path.times.begin()));
  }
  for (const auto& j : path.jumps) nodes.push_back(j.node);
  if (seg)
    for (std::size_t b : seg->break_nodes) nodes.push_back(b);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

inline SolutionPath solve_path(const KernelEvaluator& ke, const PartitionMeasure& mu,
                               const DriverPath& path, SolverOptions opts,
                               std::span<const double> requested_checkpoints = {},
                               const Segmentation* seg = nullptr) {
  auto nodes = checkpoint_nodes(path, requested_checkpoints, seg);
  PathStepper st(ke, mu, opts);
  SolutionPath out;
  out.partition = mu.partition;
  std::size_t next = 0;
  auto record = [&](std::size_t node) {
    while (next < nodes.size() && nodes[next] == node) {
      out.checkpoint_nodes.push_back(node);
      out.checkpoint_times.push_back(path.times[node]);
      out.states.push_back(st.weights());
      out.factors.push_back(st.factors());
      ++next;
    }
  };
  record(0);
  for (std::size_t i = 0; i < path.n_steps(); ++i) {
    st.advance(path, i);
    record(i + 1);
  }
  out.diagnostics = st.diagnostics();
  return out;
}

inline SolutionPath solve_path(const CoefficientSpec& spec, const Partition& p,
                               const PartitionMeasure& mu, const DriverPath& path,
                               SolverOptions opts,
                               std::span<const double> requested_checkpoints = {},
                               const Segmentation* seg = nullptr) {
  KernelEvaluator ke(spec, p);
  return solve_path(ke, mu, path, opts, requested_checkpoints, seg);
}

struct DensityTrace {
  std::vector<double> checkpoint_times;
  std::vector<std::size_t> checkpoint_nodes;
  std::vector<std::vector<double>> values;  // one row per checkpoint, column per query
  // The per-cell positivity guard does not see arbitrary query points, so a
  // jump can in principle push a pointwise factor to zero or below. The
  // paper's condition excludes this; it is surfaced rather than repaired.
  bool nonpositive_flag = false;
  std::size_t nonpositive_step = 0;
};

// Pointwise multiplicative-factor process at query points, driven by the
// kernel evaluated along the solved partition state. Replays the same
// scheme, increments and positivity scalings as the state solve, so at a
// cell representative it reproduces weight / initial weight exactly.
inline DensityTrace density_at(const KernelEvaluator& ke, const PartitionMeasure& mu,
                               const DriverPath& path, SolverOptions opts,
                               std::span<const std::vector<double>> queries,
                               std::span<const double> requested_checkpoints) {
  auto nodes = checkpoint_nodes(path, requested_checkpoints);
  int d = ke.spec().d;
  std::size_t nq = queries.size();
  std::vector<std::vector<double>> pv;
  pv.reserve(nq);
  for (const auto& q : queries) pv.push_back(ke.point_values(q));

  std::vector<double> dens(nq, 1.0);
  DensityTrace out;
  PathStepper st(ke, mu, opts);
  StepRecord rec;
  std::size_t next = 0;
  auto record = [&](std::size_t node) {
    while (next < nodes.size() && nodes[next] == node) {
      out.checkpoint_nodes.push_back(node);
      out.checkpoint_times.push_back(path.times[node]);
      out.values.push_back(dens);
      ++next;
    }
  };
  record(0);
  for (std::size_t i = 0; i < path.n_steps(); ++i) {
    st.advance(path, i, &rec);
    const double* dYc = path.cont.data() + i * d;
    const double* qv = path.quad_var.data() + i * d;
    for (std::size_t q = 0; q < nq; ++q) {
      if (opts.scheme == SchemeKind::Linear) {
        double dot = 0.0;
        for (int e = 0; e < d; ++e)
          dot += ke.eval_point(rec.y, rec.S, rec.mass, pv[q], e) * dYc[e];
        dens[q] *= 1.0 + rec.lambda_cont * dot;
      } else {
        double arg = 0.0;
        for (int e = 0; e < d; ++e) {
          double kx = ke.eval_point(rec.y, rec.S, rec.mass, pv[q], e);
          arg += kx * dYc[e] - 0.5 * kx * kx * qv[e];
        }
        dens[q] *= std::exp(arg);
      }
      if (rec.has_jump) {
        const auto* j = path.jump_at(i + 1);
        double dot = 0.0;
        for (int e = 0; e < d; ++e)
          dot += ke.eval_point(rec.y_jump, rec.S_jump, rec.mass_jump, pv[q], e) * j->delta[e];
        double f = 1.0 + rec.lambda_jump * dot;
        if (f <= 0.0 && !out.nonpositive_flag) {
          out.nonpositive_flag = true;
          out.nonpositive_step = i;
        }
        dens[q] *= f;
      }
    }
    record(i + 1);
  }
  return out;
}

struct RefinementReport {
  SolutionPath coarse;
  SolutionPath fine;
  double max_discrepancy = 0.0;      // sup over nodes and coarse cells
  std::ptrdiff_t first_breach_node = -1;
  double first_breach_time = 0.0;
  double tolerance = 1e-10;
  bool pass = true;
};

// Solves the same spec on nested partitions over one path and checks that
// aggregating the fine state reproduces the coarse state at every node.
// Requires the coefficient data to be coarse-measurable, otherwise the two
// runs genuinely differ and the comparison is meaningless.
inline RefinementReport solve_refined(const CoefficientSpec& spec, const Partition& coarse,
                                      const Partition& fine, const PartitionMeasure& mu_fine,
                                      const DriverPath& path, SolverOptions opts,
                                      std::span<const double> requested_checkpoints = {},
                                      double tolerance = 1e-10) {
  require(fine.is_refinement_of(coarse), "solve_refined: partitions are not nested");
  for (const auto& f : spec.h)
    require(f.measurable_at(coarse),
            "solve_refined: h must be measurable on the coarse partition");
  for (const auto& t : spec.terms) {
    bool snap_ok = t.v.kind == VMap::Kind::Snap && t.v.level <= coarse.level();
    bool const_ok = true;
    for (const auto& g : t.gcheck)
      if (g.kind() != XFunction::Kind::Constant) const_ok = false;
    require(snap_ok || const_ok,
            "solve_refined: gcheck o v must be measurable on the coarse partition");
  }

  KernelEvaluator ke_c(spec, coarse), ke_f(spec, fine);
  PartitionMeasure mu_coarse = aggregate(mu_fine, coarse);
  auto nodes = checkpoint_nodes(path, requested_checkpoints);

  PathStepper st_c(ke_c, mu_coarse, opts), st_f(ke_f, mu_fine, opts);
  RefinementReport rep;
  rep.tolerance = tolerance;
  rep.coarse.partition = coarse;
  rep.fine.partition = fine;
  std::size_t next = 0;

  auto compare = [&](std::size_t node) {
    PartitionMeasure fine_now(fine, st_f.weights());
    auto agg = aggregate(fine_now, coarse);
    double worst = 0.0;
    for (std::int64_t c = 0; c < coarse.n_cells(); ++c)
      worst = std::max(worst, std::fabs(agg.weights[c] - st_c.weights()[c]));
    rep.max_discrepancy = std::max(rep.max_discrepancy, worst);
    if (worst > tolerance && rep.first_breach_node < 0) {
      rep.first_breach_node = std::ptrdiff_t(node);
      rep.first_breach_time = path.times[node];
      rep.pass = false;
    }
    while (next < nodes.size() && nodes[next] == node) {
      rep.coarse.checkpoint_nodes.push_back(node);
      rep.coarse.checkpoint_times.push_back(path.times[node]);
      rep.coarse.states.push_back(st_c.weights());
      rep.coarse.factors.push_back(st_c.factors());
      rep.fine.checkpoint_nodes.push_back(node);
      rep.fine.checkpoint_times.push_back(path.times[node]);
      rep.fine.states.push_back(st_f.weights());
      rep.fine.factors.push_back(st_f.factors());
      ++next;
    }
  };

  compare(0);
  for (std::size_t i = 0; i < path.n_steps(); ++i) {
    st_c.advance(path, i);
    st_f.advance(path, i);
    compare(i + 1);
  }
  rep.coarse.diagnostics = st_c.diagnostics();
  rep.fine.diagnostics = st_f.diagnostics();
  return rep;
}

}  // namespace mvsde
