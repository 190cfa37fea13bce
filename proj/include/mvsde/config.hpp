#pragma once

#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mvsde/presets.hpp"

namespace mvsde {

struct PartitionSpec {
  int dim = 1;
  double side = 1.0;
  int level = 1;
  int max_level = 12;

  Partition make() const { return Partition(dim, side, level, max_level); }

  json to_json() const {
    return {{"dim", dim}, {"side", side}, {"level", level}, {"max_level", max_level}};
  }
  static PartitionSpec from_json(const json& j) {
    PartitionSpec p;
    p.dim = j.value("dim", p.dim);
    p.side = j.value("side", p.side);
    p.level = j.value("level", p.level);
    p.max_level = j.value("max_level", p.max_level);
    return p;
  }
};

// Initial state: uniform, explicit cell weights, or a catalog density
// integrated over the cells.
struct MuSpec {
  enum class Kind { Uniform, Weights, Density };
  Kind kind = Kind::Uniform;
  std::vector<double> weights;
  std::optional<XFunction> density;
  bool normalize = true;

  PartitionMeasure build(const Partition& p) const {
    switch (kind) {
      case Kind::Uniform:
        return PartitionMeasure::uniform(p);
      case Kind::Weights: {
        require(std::int64_t(weights.size()) == p.n_cells(),
                "mu: weight count != cell count");
        return PartitionMeasure(p, weights);
      }
      case Kind::Density: {
        const XFunction& dens = *density;
        auto m = PartitionMeasure::from_density(
            p, [&dens](std::span<const double> x) { return dens.eval(x); });
        if (normalize) {
          double total = m.total_mass();
          require(total > 0.0, "mu: density integrates to zero");
          for (auto& w : m.weights) w /= total;
        }
        return m;
      }
    }
    throw SpecError("mu: unknown kind");
  }

  json to_json() const {
    switch (kind) {
      case Kind::Uniform:
        return {{"kind", "uniform"}};
      case Kind::Weights:
        return {{"kind", "weights"}, {"values", weights}};
      case Kind::Density:
        return {{"kind", "density"}, {"fn", density->to_json()}, {"normalize", normalize}};
    }
    return {};
  }
  static MuSpec from_json(const json& j, int dim, double side) {
    MuSpec m;
    if (j.is_null()) return m;
    std::string kind = j.value("kind", "uniform");
    if (kind == "uniform") return m;
    if (kind == "weights") {
      m.kind = Kind::Weights;
      m.weights = j.at("values").get<std::vector<double>>();
      return m;
    }
    if (kind == "density") {
      m.kind = Kind::Density;
      m.density = XFunction::from_json(j.at("fn"), dim, side);
      m.normalize = j.value("normalize", true);
      return m;
    }
    throw SpecError("mu: unknown kind '" + kind + "'");
  }
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {
      "simulate",  "density",  "refine-consistency",  "converge",
      "verify-inequalities", "ibp-check", "martingale-test"};
  return kinds;
}

// Everything one experiment needs, resolvable from a single JSON document.
// A catalog name fills spec/partition/driver/scheme; explicit sections
// override the named defaults field by field.
struct RunConfig {
  std::string experiment = "simulate";
  std::string catalog;  // empty when the spec was given inline
  CoefficientSpec spec;
  std::optional<CoefficientSpec> spec_prime, spec_dblprime;
  PartitionSpec partition;
  MuSpec mu;
  DriverConfig driver;
  SchemeKind scheme = SchemeKind::Linear;
  std::size_t n_paths = 100;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::vector<double> checkpoints;  // empty: five equispaced up to the horizon
  double a = 0.5;        // segment activity bound
  double a_prime = 1.0;  // comparison weight; 1 unless overridden
  int threads = 0;       // 0: hardware concurrency
  json extra;            // experiment-specific knobs, echoed verbatim

  std::vector<double> resolved_checkpoints() const {
    if (!checkpoints.empty()) return checkpoints;
    std::vector<double> c;
    for (int i = 1; i <= 5; ++i) c.push_back(driver.horizon * double(i) / 5.0);
    return c;
  }

  int resolved_threads() const {
    if (threads > 0) return threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
  }

  SolverOptions solver_options() const {
    SolverOptions o;
    o.scheme = scheme;
    return o;
  }

  // the verbatim record embedded in every artifact
  json echo() const {
    json j = {{"experiment", experiment},
              {"spec", spec.to_json()},
              {"partition", partition.to_json()},
              {"mu", mu.to_json()},
              {"driver", driver.to_json()},
              {"scheme", scheme_name(scheme)},
              {"n_paths", n_paths},
              {"seed", seed},
              {"out", out_dir},
              {"checkpoints", resolved_checkpoints()},
              {"a", a},
              {"a_prime", a_prime}};
    if (!catalog.empty()) j["catalog"] = catalog;
    if (spec_prime) j["spec_prime"] = spec_prime->to_json();
    if (spec_dblprime) j["spec_dblprime"] = spec_dblprime->to_json();
    if (!extra.is_null()) j["extra"] = extra;
    return j;
  }

  static RunConfig from_json(const json& j) {
    RunConfig c;
    try {
      c.experiment = j.value("experiment", c.experiment);
      bool known = false;
      for (const auto& k : experiment_kinds()) known = known || k == c.experiment;
      require(known, "unknown experiment kind: " + c.experiment);

      if (j.contains("catalog")) {
        c.catalog = j.at("catalog").get<std::string>();
        RunSetup setup = catalog_setup(c.catalog);
        c.spec = setup.spec;
        c.partition = PartitionSpec{setup.dim, setup.side, setup.level, 12};
        c.driver = setup.driver;
        c.scheme = setup.scheme;
        if (setup.mu_density) {
          c.mu.kind = MuSpec::Kind::Density;
          c.mu.density = setup.mu_density;
        }
        if (j.contains("spec")) c.spec = CoefficientSpec::from_json(j.at("spec"));
      } else {
        require(j.contains("spec"), "config: needs a spec or a catalog name");
        c.spec = CoefficientSpec::from_json(j.at("spec"));
        c.partition.dim = c.spec.dim;
        c.partition.side = c.spec.side;
      }
      if (j.contains("partition")) {
        PartitionSpec base = c.partition;
        PartitionSpec given = PartitionSpec::from_json(j.at("partition"));
        base.dim = j.at("partition").contains("dim") ? given.dim : base.dim;
        base.side = j.at("partition").contains("side") ? given.side : base.side;
        base.level = j.at("partition").contains("level") ? given.level : base.level;
        base.max_level =
            j.at("partition").contains("max_level") ? given.max_level : base.max_level;
        c.partition = base;
      }
      if (j.contains("spec_prime"))
        c.spec_prime = CoefficientSpec::from_json(j.at("spec_prime"));
      if (j.contains("spec_dblprime"))
        c.spec_dblprime = CoefficientSpec::from_json(j.at("spec_dblprime"));
      c.mu = j.contains("mu") ? MuSpec::from_json(j.at("mu"), c.partition.dim, c.partition.side)
                              : c.mu;
      if (j.contains("driver")) {
        json jd = c.driver.to_json();
        for (auto it = j.at("driver").begin(); it != j.at("driver").end(); ++it)
          jd[it.key()] = it.value();
        c.driver = DriverConfig::from_json(jd);
      }
      if (j.contains("scheme")) c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
      c.n_paths = j.value("n_paths", c.n_paths);
      require(c.n_paths >= 1, "config: n_paths must be positive");
      c.seed = j.value("seed", c.driver.seed);
      c.driver.seed = c.seed;
      c.out_dir = j.value("out", c.out_dir);
      if (j.contains("checkpoints"))
        c.checkpoints = j.at("checkpoints").get<std::vector<double>>();
      c.a = j.value("a", c.a);
      c.a_prime = j.value("a_prime", c.a_prime);
      c.threads = j.value("threads", 0);
      c.extra = j.value("extra", json());
    } catch (const json::exception& e) {
      throw SpecError(std::string("run config: ") + e.what());
    }
    c.spec.validate();
    c.driver.validate();
    require(c.spec.d == c.driver.d, "config: spec and driver dimensions differ");
    require(c.spec.dim == c.partition.dim && c.spec.side == c.partition.side,
            "config: spec and partition domains differ");
    for (double t : c.checkpoints)
      require(t >= 0.0 && t <= c.driver.horizon + 1e-12,
              "config: checkpoint outside the horizon");
    return c;
  }
};

}  // namespace mvsde
