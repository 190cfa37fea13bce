#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "mvsde/config.hpp"
#include "mvsde/ibp.hpp"
#include "mvsde/io.hpp"
#include "mvsde/verification.hpp"

// Experiment driver. run() resolves a RunConfig into artifacts under the
// output directory (report.json, paths/*.csv, tables/*.csv) and an exit
// status: 0 ok, 2 config error, 3 numerical abort, 4 a check failed.
// Artifacts are byte-stable for a fixed config and independent of the
// parallelism degree.

namespace mvsde {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kNumericalAbort = 3,
  kCheckFailed = 4,
};

namespace detail {

inline void write_solution_csv(const std::string& file, const SolutionPath& sol) {
  std::vector<std::string> cols{"node", "time", "mass"};
  std::size_t nc = sol.states.empty() ? 0 : sol.states.front().size();
  bool full = nc <= 64;
  if (full)
    for (std::size_t c = 0; c < nc; ++c) cols.push_back("w" + std::to_string(c));
  else {
    cols.push_back("min_weight");
    cols.push_back("max_weight");
  }
  CsvWriter csv(file, cols);
  std::vector<double> r;
  for (std::size_t i = 0; i < sol.checkpoint_nodes.size(); ++i) {
    const auto& w = sol.states[i];
    r.clear();
    r.push_back(double(sol.checkpoint_nodes[i]));
    r.push_back(sol.checkpoint_times[i]);
    r.push_back(kahan_total(w));
    if (full)
      r.insert(r.end(), w.begin(), w.end());
    else {
      auto [lo, hi] = std::minmax_element(w.begin(), w.end());
      r.push_back(*lo);
      r.push_back(*hi);
    }
    csv.row(r);
  }
}

inline bool run_simulate(const RunConfig& cfg, const Partition& part,
                         const PartitionMeasure& mu, json& results,
                         const std::string& out) {
  KernelEvaluator ke(cfg.spec, part);
  SolverOptions opts = cfg.solver_options();
  auto requested = cfg.resolved_checkpoints();
  std::size_t n_save = std::min<std::size_t>(4, cfg.n_paths);

  struct Slot {
    Diagnostics diag;
    double final_mass = 0.0;
  };
  std::vector<Slot> slots(cfg.n_paths);
  std::vector<SolutionPath> saved(n_save);
  run_paths(cfg.n_paths, cfg.resolved_threads(), [&](std::size_t p) {
    DriverPath dp = sample_driver(cfg.driver, int(p));
    SolutionPath sol = solve_path(ke, mu, dp, opts, requested);
    slots[p].diag = sol.diagnostics;
    slots[p].final_mass = kahan_total(sol.states.back());
    if (p < n_save) saved[p] = std::move(sol);
  });

  Diagnostics total;
  {
    std::vector<std::string> cols{"path",          "max_mass_error", "min_weight",
                                  "max_reconcile", "max_residual",   "scaling_events",
                                  "final_mass"};
    CsvWriter csv(out + "/tables/simulate_summary.csv", cols);
    for (std::size_t p = 0; p < slots.size(); ++p) {
      const auto& d = slots[p].diag;
      total.merge(d);
      std::vector<double> r{double(p),          d.max_mass_error,
                            d.min_weight,       d.max_reconcile_rel,
                            d.max_cond2_residual, double(d.scaling_events),
                            slots[p].final_mass};
      csv.row(r);
    }
  }
  for (std::size_t p = 0; p < n_save; ++p)
    write_solution_csv(out + "/paths/path_" + std::to_string(p) + ".csv", saved[p]);

  double mass_tol = cfg.extra.is_object() ? cfg.extra.value("mass_tol", 1e-12) : 1e-12;
  double rec_tol = cfg.extra.is_object() ? cfg.extra.value("reconcile_tol", 1e-10) : 1e-10;
  bool mass_ok = true;
  if (cfg.scheme == SchemeKind::Linear) mass_ok = total.max_mass_error <= mass_tol;
  bool weight_ok = total.min_weight > 0.0;
  bool rec_ok = total.max_reconcile_rel <= rec_tol;
  bool pass = mass_ok && weight_ok && rec_ok;

  results = {{"n_paths", cfg.n_paths},
             {"max_mass_error", total.max_mass_error},
             {"min_weight", total.min_weight},
             {"max_reconcile_rel", total.max_reconcile_rel},
             {"max_cond2_residual", total.max_cond2_residual},
             {"scaling_events", total.scaling_events},
             {"checks",
              {{"mass_tol", mass_tol},
               {"mass_ok", mass_ok},
               {"min_weight_positive", weight_ok},
               {"reconcile_tol", rec_tol},
               {"reconcile_ok", rec_ok}}},
             {"saved_paths", n_save}};
  return pass;
}

inline bool run_density(const RunConfig& cfg, const Partition& part,
                        const PartitionMeasure& mu, json& results,
                        const std::string& out) {
  int dim = part.dim();
  std::int64_t cpa = part.cells_per_axis();
  std::int64_t def = dim == 1 ? 256 : (dim == 2 ? 32 : 8);
  if (def < cpa) def = cpa;
  std::int64_t bins = cfg.extra.is_object() ? cfg.extra.value("query_bins", def) : def;
  require(bins >= cpa && bins % cpa == 0,
          "density: query bins per axis must be a multiple of " + std::to_string(cpa));
  std::int64_t nq = 1;
  for (int a = 0; a < dim; ++a) {
    nq *= bins;
    require(nq <= (std::int64_t(1) << 22), "density: too many query points");
  }

  // bin midpoints, axis 0 fastest, and the initial mass each bin carries
  double bw = part.side() / double(bins);
  double sub_cells = std::pow(double(bins / cpa), dim);
  std::size_t nqs = std::size_t(nq);
  std::vector<std::vector<double>> queries(nqs);
  std::vector<double> bin_mass(nqs);
  {
    std::vector<std::int64_t> idx(dim, 0);
    for (std::int64_t q = 0; q < nq; ++q) {
      auto& x = queries[std::size_t(q)];
      x.resize(dim);
      for (int a = 0; a < dim; ++a) x[a] = (double(idx[a]) + 0.5) * bw;
      bin_mass[std::size_t(q)] = mu.weights[std::size_t(part.locate(x))] / sub_cells;
      int a = 0;
      for (; a < dim; ++a) {
        if (++idx[a] < bins) break;
        idx[a] = 0;
      }
    }
  }

  KernelEvaluator ke(cfg.spec, part);
  SolverOptions opts = cfg.solver_options();
  auto requested = cfg.resolved_checkpoints();
  std::size_t ncp = 0;  // checkpoint count, fixed across paths of one driver config

  struct Slot {
    std::vector<double> integral;  // per checkpoint
    std::vector<double> recon;     // |integral - state mass|
    bool flagged = false;
  };
  std::vector<Slot> slots(cfg.n_paths);
  DensityTrace trace0;
  run_paths(cfg.n_paths, cfg.resolved_threads(), [&](std::size_t p) {
    DriverPath dp = sample_driver(cfg.driver, int(p));
    DensityTrace tr = density_at(ke, mu, dp, opts, queries, requested);
    SolutionPath sol = solve_path(ke, mu, dp, opts, requested);
    auto& s = slots[p];
    s.flagged = tr.nonpositive_flag;
    s.integral.resize(tr.values.size());
    s.recon.resize(tr.values.size());
    for (std::size_t i = 0; i < tr.values.size(); ++i) {
      KahanSum acc;
      for (std::int64_t q = 0; q < nq; ++q)
        acc.add(tr.values[i][std::size_t(q)] * bin_mass[std::size_t(q)]);
      s.integral[i] = acc.get();
      s.recon[i] = std::fabs(acc.get() - kahan_total(sol.states[i]));
    }
    if (p == 0) trace0 = std::move(tr);
  });

  ncp = slots[0].integral.size();
  std::vector<MeanAccumulator> mean(ncp);
  double max_recon = 0.0;
  std::size_t flagged = 0;
  for (const auto& s : slots) {
    require(s.integral.size() == ncp, "density: checkpoint count varies across paths");
    for (std::size_t i = 0; i < ncp; ++i) {
      mean[i].add(s.integral[i]);
      max_recon = std::max(max_recon, s.recon[i]);
    }
    if (s.flagged) ++flagged;
  }

  double tol = cfg.extra.is_object() ? cfg.extra.value("integral_tol", 1e-3) : 1e-3;
  double rec_tol = cfg.extra.is_object() ? cfg.extra.value("recon_tol", 1e-9) : 1e-9;
  bool pass = max_recon <= rec_tol;
  json rows = json::array();
  {
    std::vector<std::string> cols{"time", "mean_integral", "se", "abs_error"};
    CsvWriter csv(out + "/tables/density_integrals.csv", cols);
    for (std::size_t i = 0; i < ncp; ++i) {
      double m = mean[i].mean();
      double err = std::fabs(m - 1.0);
      pass = pass && err <= tol;
      std::vector<double> r{trace0.checkpoint_times[i], m, mean[i].standard_error(), err};
      csv.row(r);
      rows.push_back({{"time", trace0.checkpoint_times[i]},
                      {"mean_integral", m},
                      {"se", mean[i].standard_error()},
                      {"abs_error", err}});
    }
  }
  {
    // sample profile along path 0
    std::vector<std::string> cols;
    for (int a = 0; a < dim; ++a) cols.push_back("x" + std::to_string(a));
    for (std::size_t i = 0; i < ncp; ++i)
      cols.push_back("t" + std::to_string(i));
    CsvWriter csv(out + "/paths/density_path_0.csv", cols);
    std::vector<double> r;
    for (std::int64_t q = 0; q < nq; ++q) {
      r.assign(queries[std::size_t(q)].begin(), queries[std::size_t(q)].end());
      for (std::size_t i = 0; i < ncp; ++i) r.push_back(trace0.values[i][std::size_t(q)]);
      csv.row(r);
    }
  }

  results = {{"query_bins", bins},
             {"n_queries", nq},
             {"integral_tol", tol},
             {"recon_tol", rec_tol},
             {"max_recon", max_recon},
             {"nonpositive_paths", flagged},
             {"checkpoints", rows}};
  return pass;
}

inline bool run_refine(const RunConfig& cfg, const Partition& part,
                       const PartitionMeasure& /*mu*/, json& results,
                       const std::string& out) {
  int fine_level =
      cfg.extra.is_object() ? cfg.extra.value("fine_level", part.level() + 2) : part.level() + 2;
  require(fine_level > part.level() && fine_level <= cfg.partition.max_level,
          "refine: fine level must exceed the base level and stay within max_level");
  Partition fine(part.dim(), part.side(), fine_level, cfg.partition.max_level);
  PartitionMeasure mu_fine = cfg.mu.build(fine);
  double tol = cfg.extra.is_object() ? cfg.extra.value("tolerance", 1e-10) : 1e-10;
  SolverOptions opts = cfg.solver_options();
  auto requested = cfg.resolved_checkpoints();

  struct Slot {
    double max_disc = 0.0;
    double breach_time = 0.0;
    std::ptrdiff_t breach_node = -1;
    bool pass = true;
  };
  std::vector<Slot> slots(cfg.n_paths);
  run_paths(cfg.n_paths, cfg.resolved_threads(), [&](std::size_t p) {
    DriverPath dp = sample_driver(cfg.driver, int(p));
    RefinementReport rep =
        solve_refined(cfg.spec, part, fine, mu_fine, dp, opts, requested, tol);
    slots[p] = {rep.max_discrepancy, rep.first_breach_time, rep.first_breach_node, rep.pass};
  });

  double worst = 0.0;
  std::size_t breaches = 0;
  {
    std::vector<std::string> cols{"path", "max_discrepancy", "breach_node", "breach_time"};
    CsvWriter csv(out + "/tables/refine_summary.csv", cols);
    for (std::size_t p = 0; p < slots.size(); ++p) {
      worst = std::max(worst, slots[p].max_disc);
      if (!slots[p].pass) ++breaches;
      std::vector<double> r{double(p), slots[p].max_disc, double(slots[p].breach_node),
                            slots[p].breach_time};
      csv.row(r);
    }
  }
  results = {{"coarse_level", part.level()},
             {"fine_level", fine_level},
             {"tolerance", tol},
             {"max_discrepancy", worst},
             {"paths_breaching", breaches}};
  return breaches == 0;
}

inline bool run_converge(const RunConfig& cfg, const Partition& part,
                         const PartitionMeasure& /*mu*/, json& results,
                         const std::string& out) {
  int n0 = cfg.extra.is_object() ? cfg.extra.value("level_lo", 2) : 2;
  int n1 = cfg.extra.is_object() ? cfg.extra.value("level_hi", 5) : 5;
  auto family = default_test_family(part.dim(), part.side());
  ConvergenceStudy study = convergence_study(cfg.spec, n0, n1, family, cfg.driver,
                                             cfg.n_paths, cfg.a, cfg.a_prime,
                                             cfg.resolved_threads());
  {
    std::vector<std::string> cols{"level_lo", "level_hi", "seminorm", "se",
                                  "bound",    "factor",   "ratio",    "bounded"};
    CsvWriter csv(out + "/tables/convergence.csv", cols);
    for (const auto& row : study.rows) {
      std::vector<double> r{double(row.level_lo), double(row.level_hi), row.seminorm,
                            row.se,               row.bound,            row.factor,
                            row.ratio_to_prev,    row.bounded ? 1.0 : 0.0};
      csv.row(r);
    }
  }
  results = study.to_json();
  return study.cauchy_ok;
}

inline bool run_inequalities(const RunConfig& cfg, const Partition& part,
                             const PartitionMeasure& mu, json& results,
                             const std::string& out) {
  require(cfg.spec_prime.has_value(),
          "verify-inequalities: needs spec_prime (and spec_dblprime for the "
          "three-system comparison)");
  SolverOptions opts = cfg.solver_options();
  auto family = default_test_family(part.dim(), part.side());
  int threads = cfg.resolved_threads();

  json ineqs = json::array();
  json semis = json::array();
  bool pass = true;
  auto push = [&](const InequalityReport& rep, const char* lo, const char* hi) {
    ineqs.push_back(rep.to_json());
    semis.push_back({{"pair", {lo, hi}},
                     {"value", rep.seminorm},
                     {"se", rep.seminorm_se}});
    pass = pass && rep.pass;
  };

  if (cfg.spec_dblprime) {
    VerifySystem base(cfg.spec, part, mu, opts);
    VerifySystem prime(*cfg.spec_prime, part, mu, opts);
    VerifySystem dprime(*cfg.spec_dblprime, part, mu, opts);
    push(check_ineq1(base, prime, dprime, family, cfg.driver, cfg.n_paths, cfg.a,
                     cfg.a_prime, threads),
         "spec_prime", "spec_dblprime");
    push(check_ineq2(prime, dprime, family, cfg.driver, cfg.n_paths, cfg.a, cfg.a_prime,
                     threads),
         "spec_prime", "spec_dblprime");
  } else {
    VerifySystem prime(cfg.spec, part, mu, opts);
    VerifySystem dprime(*cfg.spec_prime, part, mu, opts);
    push(check_ineq2(prime, dprime, family, cfg.driver, cfg.n_paths, cfg.a, cfg.a_prime,
                     threads),
         "spec", "spec_prime");
  }

  {
    std::vector<std::string> cols{"name",     "lhs",  "rhs",          "factor",
                                  "seminorm", "se",   "critical_a_prime", "valid_regime",
                                  "pass"};
    CsvWriter csv(out + "/tables/inequalities.csv", cols);
    for (const auto& r : ineqs) {
      std::vector<std::string> labels{r.at("name").get<std::string>()};
      std::vector<double> vals{r.at("lhs").get<double>(),
                               r.at("rhs").get<double>(),
                               r.at("factor").get<double>(),
                               r.at("seminorm").get<double>(),
                               r.at("seminorm_se").get<double>(),
                               r.at("critical_a_prime").get<double>(),
                               r.at("regime_valid").get<bool>() ? 1.0 : 0.0,
                               r.at("pass").get<bool>() ? 1.0 : 0.0};
      csv.row(labels, vals);
    }
  }
  json fam = json::array();
  for (const auto& f : family) fam.push_back(f.to_json());
  results = {{"seminorms", semis}, {"inequalities", ineqs}, {"zscores", json::array()},
             {"f_family", fam}};
  return pass;
}

inline bool run_martingale(const RunConfig& cfg, const Partition& part,
                           const PartitionMeasure& mu, json& results,
                           const std::string& out) {
  VerifySystem sys(cfg.spec, part, mu, cfg.solver_options());
  auto family = default_test_family(part.dim(), part.side());
  auto checkpoints = cfg.resolved_checkpoints();
  ZScoreReport rep = martingale_zscores(sys, family, checkpoints, cfg.driver, cfg.n_paths,
                                        cfg.resolved_threads());
  double z_max = cfg.extra.is_object() ? cfg.extra.value("z_max", 4.0) : 4.0;
  {
    std::vector<std::string> cols{"time", "f", "mean", "se", "z", "exact"};
    CsvWriter csv(out + "/tables/zscores.csv", cols);
    for (std::size_t t = 0; t < rep.checkpoint_times.size(); ++t)
      for (std::size_t f = 0; f < rep.n_f; ++f) {
        std::size_t i = t * rep.n_f + f;
        std::vector<double> r{rep.checkpoint_times[t], double(f),       rep.mean[i],
                              rep.se[i],               rep.z[i],        rep.exact[i] ? 1.0 : 0.0};
        csv.row(r);
      }
  }
  results = rep.to_json();
  results["z_max"] = z_max;
  return rep.max_abs_z <= z_max;
}

inline bool run_ibp(const RunConfig& cfg, const Partition& part, const PartitionMeasure& mu,
                    json& results, const std::string& out) {
  int dim = part.dim();
  double side = part.side();
  require(dim <= 3, "ibp-check: dimension capped at 3");
  constexpr double pi = 3.14159265358979323846;

  double pair_tol = cfg.extra.is_object() ? cfg.extra.value("identity_tol", 1e-8) : 1e-8;
  double iter_tol = cfg.extra.is_object() ? cfg.extra.value("iterated_tol", 1e-2) : 1e-2;
  double face_tol = cfg.extra.is_object() ? cfg.extra.value("face_tol", 5e-3) : 5e-3;
  std::int64_t n = dim == 1 ? 257 : (dim == 2 ? 65 : 17);
  if (cfg.extra.is_object()) n = cfg.extra.value("grid_nodes", n);
  require(n >= 5, "ibp-check: grid too coarse");

  bool pass = true;

  // 1. face decomposition of a pairing difference, against a second state
  PartitionMeasure c1 = mu;
  if (cfg.mu.kind == MuSpec::Kind::Uniform) {
    auto ncells = part.n_cells();
    for (std::int64_t c = 0; c < ncells; ++c)
      c1.weights[std::size_t(c)] *= 1.0 + 0.3 * std::cos(2.0 * pi * (double(c) + 0.5) /
                                                         double(ncells));
  }
  PartitionMeasure uni = PartitionMeasure::uniform(part);
  json pair_rows = json::array();
  {
    std::vector<std::string> cols{"term",     "component",  "identity_error",
                                  "face_sum", "direct",     "max_corner_diff",
                                  "bound",    "bound_holds"};
    CsvWriter csv(out + "/tables/ibp_faces.csv", cols);
    for (std::size_t t = 0; t < cfg.spec.terms.size(); ++t)
      for (int e = 0; e < cfg.spec.d; ++e) {
        const XFunction& g = cfg.spec.terms[t].gcheck[std::size_t(e)];
        double eps_b = 0.0;
        for (int o = 0; o <= dim; ++o) eps_b = std::max(eps_b, g.partial_bound(o));
        PairingBoundReport rep = ibp_pairing_bound_terms(c1, uni, g, eps_b);
        bool ok = rep.identity_error <= pair_tol && rep.bound_holds;
        pass = pass && ok;
        std::vector<double> r{double(t),          double(e),       rep.identity_error,
                              rep.face_sum,       rep.direct,      rep.max_corner_diff,
                              rep.bound_total,    ok ? 1.0 : 0.0};
        csv.row(r);
        pair_rows.push_back({{"term", t},
                             {"component", e},
                             {"identity_error", rep.identity_error},
                             {"face_sum", rep.face_sum},
                             {"direct", rep.direct},
                             {"max_corner_diff", rep.max_corner_diff},
                             {"bound", rep.bound_total},
                             {"bound_holds", rep.bound_holds},
                             {"partial_bound", eps_b}});
      }
  }

  // 2. iterated product-derivative identity at two resolutions
  const XFunction& u = cfg.spec.terms.front().gcheck.front();
  XFunction v = XFunction::gauss_bump(dim, side, 0.9, std::vector<double>(dim, 0.45), 0.3);
  auto sample_pair = [&](std::int64_t nodes) {
    GridFunction gu = GridFunction::sample(dim, side, nodes,
                                           [&](std::span<const double> x) { return u.eval(x); });
    GridFunction gv = GridFunction::sample(dim, side, nodes,
                                           [&](std::span<const double> x) { return v.eval(x); });
    return iterated_ibp_check(gu, gv);
  };
  double e_coarse = sample_pair(n);
  double e_fine = sample_pair(2 * (n - 1) + 1);
  double ratio = e_fine > 0.0 ? e_coarse / e_fine : 0.0;
  pass = pass && e_coarse <= iter_tol;

  // 3. boundary-face expansion against the direct product integral
  XFunction f = cfg.mu.density ? *cfg.mu.density : XFunction::constant(dim, side, 1.0);
  GridFunction gf =
      GridFunction::sample(dim, side, n, [&](std::span<const double> x) { return f.eval(x); });
  GridFunction gfu = GridFunction::sample(
      dim, side, n, [&](std::span<const double> x) { return f.eval(x) * u.eval(x); });
  double direct = gfu.trapezoid_integral();
  double face = boundary_face_expansion(gf, u);
  double face_err = std::fabs(direct - face);
  pass = pass && face_err <= face_tol;

  results = {{"pairing", pair_rows},
             {"iterated",
              {{"grid_nodes", n},
               {"error", e_coarse},
               {"error_refined", e_fine},
               {"ratio", ratio},
               {"tolerance", iter_tol}}},
             {"face_expansion",
              {{"grid_nodes", n},
               {"direct", direct},
               {"expansion", face},
               {"abs_error", face_err},
               {"tolerance", face_tol}}}};
  return pass;
}

}  // namespace detail

inline int run(const RunConfig& cfg) {
  json report;
  report["version"] = MVSDE_VERSION;
  try {
    validate_constants(cfg.spec);
    if (cfg.spec_prime) validate_constants(*cfg.spec_prime);
    if (cfg.spec_dblprime) validate_constants(*cfg.spec_dblprime);
    Partition part = cfg.partition.make();
    PartitionMeasure mu = cfg.mu.build(part);
    ensure_dir(cfg.out_dir);
    ensure_dir(cfg.out_dir + "/paths");
    ensure_dir(cfg.out_dir + "/tables");

    json results;
    bool pass = false;
    if (cfg.experiment == "simulate")
      pass = detail::run_simulate(cfg, part, mu, results, cfg.out_dir);
    else if (cfg.experiment == "density")
      pass = detail::run_density(cfg, part, mu, results, cfg.out_dir);
    else if (cfg.experiment == "refine-consistency")
      pass = detail::run_refine(cfg, part, mu, results, cfg.out_dir);
    else if (cfg.experiment == "converge")
      pass = detail::run_converge(cfg, part, mu, results, cfg.out_dir);
    else if (cfg.experiment == "verify-inequalities")
      pass = detail::run_inequalities(cfg, part, mu, results, cfg.out_dir);
    else if (cfg.experiment == "martingale-test")
      pass = detail::run_martingale(cfg, part, mu, results, cfg.out_dir);
    else if (cfg.experiment == "ibp-check")
      pass = detail::run_ibp(cfg, part, mu, results, cfg.out_dir);
    else
      throw SpecError("unknown experiment kind: " + cfg.experiment);

    report["experiment"] = cfg.experiment;
    report["config"] = cfg.echo();
    report["seeds"] = {{"master", cfg.seed}, {"driver", cfg.driver.seed}};
    report["results"] = results;
    report["status"] = pass ? "ok" : "check-failed";
    write_json_file(cfg.out_dir + "/report.json", report);
    return pass ? kOk : kCheckFailed;
  } catch (const SpecError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const NumericalAbort& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    try {
      report["experiment"] = cfg.experiment;
      report["config"] = cfg.echo();
      report["seeds"] = {{"master", cfg.seed}, {"driver", cfg.driver.seed}};
      report["status"] = "aborted";
      report["error"] = e.what();
      ensure_dir(cfg.out_dir);
      write_json_file(cfg.out_dir + "/report.json", report);
    } catch (...) {
    }
    return kNumericalAbort;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  }
}

// Resolved-parameter summary for a config, without running anything heavy.
// Prints the declared and sampled coefficient constants, the comparison
// factor at the configured (a, a'), and the segment plan of probe path 0.
inline void describe(const RunConfig& cfg, std::FILE* out = stdout) {
  const CoefficientSpec& spec = cfg.spec;
  Partition part = cfg.partition.make();
  PartitionMeasure mu = cfg.mu.build(part);
  ConstantsEstimate est = estimate_constants(spec);

  std::fprintf(out, "experiment: %s\n", cfg.experiment.c_str());
  if (!cfg.catalog.empty()) std::fprintf(out, "catalog: %s\n", cfg.catalog.c_str());
  std::fprintf(out, "domain: [0, %g]^%d, partition level %d (%lld cells)\n", spec.side,
               spec.dim, part.level(), (long long)part.n_cells());
  const char* mu_kind = cfg.mu.kind == MuSpec::Kind::Uniform
                            ? "uniform"
                            : (cfg.mu.kind == MuSpec::Kind::Weights ? "weights" : "density");
  std::fprintf(out, "initial state: %s, mass %.12g\n", mu_kind, kahan_total(mu.weights));
  std::fprintf(out, "coefficients: %d driver component(s), %zu moment function(s), %zu term(s)\n",
               spec.d, spec.h.size(), spec.terms.size());
  std::fprintf(out, "driver: %s, %d component(s), horizon %g, %d steps", cfg.driver.kind.c_str(),
               cfg.driver.d, cfg.driver.horizon, cfg.driver.n_steps);
  if (cfg.driver.kind != "brownian")
    std::fprintf(out, ", rate %g, jump size %g", cfg.driver.lambda, cfg.driver.beta);
  std::fprintf(out, ", seed %llu\n", (unsigned long long)cfg.seed);
  std::fprintf(out, "scheme: %s, paths: %zu, threads: %d, out: %s\n",
               scheme_name(cfg.scheme), cfg.n_paths, cfg.resolved_threads(),
               cfg.out_dir.c_str());
  {
    auto cps = cfg.resolved_checkpoints();
    std::fprintf(out, "checkpoints:");
    for (double t : cps) std::fprintf(out, " %g", t);
    std::fprintf(out, "\n");
  }

  std::fprintf(out, "eps' declared %.6g, sampled %.6g; eps'' declared %.6g, sampled %.6g\n",
               spec.eps_prime, est.eps_prime_emp, spec.eps_dblprime, est.eps_dblprime_emp);
  double k = double(spec.h.size());
  double rho = 2.0 * k * spec.eps_prime + 3.0 * spec.eps_dblprime;
  double factor = 1.0 - double(spec.d) * cfg.a_prime * cfg.a * rho;
  std::fprintf(out, "comparison factor at a=%g, a'=%g: 1 - d*a'*a*(2k*eps' + 3*eps'') = %.6g\n",
               cfg.a, cfg.a_prime, factor);
  if (factor <= 0.5)
    std::fprintf(out,
                 "warning: comparison factor %.4g is not above 1/2; the per-segment "
                 "contraction argument needs it > 1/2, so lower the activity bound a "
                 "or the coefficient constants\n",
                 factor);
  if (cfg.driver.kind != "brownian") {
    double jump_dot = double(spec.d) * spec.eps_dblprime * std::fabs(cfg.driver.beta);
    std::fprintf(out,
                 "worst-case jump dot d*eps''*|beta| = %.6g (scaled down when a jump "
                 "factor would reach %g)\n",
                 jump_dot, spec.jump_margin - 1.0);
  }

  if (cfg.experiment == "ibp-check") {
    std::int64_t n = spec.dim == 1 ? 257 : (spec.dim == 2 ? 65 : 17);
    if (cfg.extra.is_object()) n = cfg.extra.value("grid_nodes", n);
    std::fprintf(out,
                 "grid plan: %lld nodes per axis (refined pass %lld), corner lattice "
                 "%lld^%d\n",
                 (long long)n, (long long)(2 * (n - 1) + 1),
                 (long long)(part.cells_per_axis() + 1), spec.dim);
    return;
  }

  DriverPath probe = sample_driver(cfg.driver, 0);
  Segmentation seg = segment(probe, cfg.a);
  std::size_t ns = seg.n_segments();
  std::fprintf(out, "segment plan (probe path 0, activity bound a=%g): %zu segment(s)\n",
               cfg.a, ns);
  std::size_t shown = std::min<std::size_t>(ns, 12);
  for (std::size_t i = 0; i < shown; ++i)
    std::fprintf(out, "  segment %zu: [%.6g, %.6g], nodes %zu..%zu\n", i,
                 seg.breakpoints[i], seg.breakpoints[i + 1], seg.break_nodes[i],
                 seg.break_nodes[i + 1]);
  if (shown < ns) std::fprintf(out, "  ... %zu more\n", ns - shown);
}

}  // namespace mvsde
