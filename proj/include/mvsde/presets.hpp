#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvsde/solver.hpp"

namespace mvsde {

// A ready-made, self-consistent configuration: coefficient data, partition
// geometry, driver and scheme. The declared constants carry safety margin
// over the empirical estimates, which the test suite re-checks.
struct RunSetup {
  CoefficientSpec spec;
  int dim = 1;
  double side = 1.0;
  int level = 1;
  DriverConfig driver;
  SchemeKind scheme = SchemeKind::Linear;
  std::optional<XFunction> mu_density;  // empty: uniform initial state
};

namespace detail {

inline CoefficientSpec one_term_spec(int d, int dim, double side,
                                     std::vector<TestFunction> h,
                                     std::vector<YFunction> gbar,
                                     std::vector<XFunction> gcheck, VMap v,
                                     double eps_prime, double eps_dblprime) {
  CoefficientSpec s;
  s.d = d;
  s.dim = dim;
  s.side = side;
  s.h = std::move(h);
  CoefficientTerm t;
  t.gbar = std::move(gbar);
  t.gcheck = std::move(gcheck);
  t.v = v;
  s.terms.push_back(std::move(t));
  s.eps_prime = eps_prime;
  s.eps_dblprime = eps_dblprime;
  return s;
}

}  // namespace detail

inline RunSetup catalog_setup(const std::string& name) {
  using TF = TestFunction;
  RunSetup r;
  r.driver.n_steps = 1000;
  r.driver.horizon = 1.0;
  r.driver.seed = 1;

  if (name == "two-cell") {
    // one moment (the mass), constant state dependence, sign-alternating
    // spatial factor: the kernel is (gamma, -gamma) at the balanced state
    r.dim = 1;
    r.level = 1;
    r.spec = detail::one_term_spec(
        1, 1, 1.0, {TF::one(1, 1.0)}, {YFunction::constant(0.1)},
        {XFunction::cos_sum(1, 1.0, 1.0, {2.0}, 0.0)}, VMap::identity(), 0.0, 0.2);
    r.driver.kind = "brownian";
    return r;
  }
  if (name == "cpoisson-coarse") {
    r.dim = 1;
    r.level = 2;
    r.spec = detail::one_term_spec(
        1, 1, 1.0, {TF::one(1, 1.0), TF::monomial(1, 1.0, {1})},
        {YFunction::affine_clamped(0.05, {0.10, 0.15}, 0.5)},
        {XFunction::tanh_ramp(1, 1.0, 0.8, 2.0, 0.5, 0)}, VMap::identity(), 0.16, 0.4);
    r.driver.kind = "cpoisson";
    r.driver.lambda = 3.0;
    r.driver.beta = 0.3;
    return r;
  }
  if (name == "cpoisson-mid") {
    r.dim = 1;
    r.level = 3;
    r.spec = detail::one_term_spec(
        1, 1, 1.0, {TF::one(1, 1.0), TF::monomial(1, 1.0, {1})},
        {YFunction::tanh_squashed(0.3, 0.2, {0.05, 0.20})},
        {XFunction::cos_sum(1, 1.0, 0.9, {1.0}, 0.3)}, VMap::identity(), 0.10, 0.30);
    r.driver.kind = "cpoisson";
    r.driver.lambda = 2.0;
    r.driver.beta = 0.5;
    return r;
  }
  if (name == "mixed-wide") {
    r.dim = 1;
    r.level = 4;
    r.spec = detail::one_term_spec(
        1, 1, 1.0, {TF::one(1, 1.0), TF::monomial(1, 1.0, {1})},
        {YFunction::affine_clamped(0.10, {0.05, 0.10}, 0.4)},
        {XFunction::gauss_bump(1, 1.0, 0.9, {0.4}, 0.35)}, VMap::identity(), 0.12, 0.30);
    r.driver.kind = "mixed";
    r.driver.lambda = 1.0;
    r.driver.beta = 0.2;
    return r;
  }
  if (name == "planar") {
    r.dim = 2;
    r.level = 2;
    r.spec = detail::one_term_spec(
        2, 2, 1.0, {TF::one(2, 1.0), TF::monomial(2, 1.0, {1, 0})},
        {YFunction::constant(0.12), YFunction::affine_clamped(0.05, {0.05, 0.10}, 0.3)},
        {XFunction::cos_sum(2, 1.0, 0.8, {1.0, 1.0}, 0.0),
         XFunction::gauss_bump(2, 1.0, 0.85, {0.5, 0.5}, 0.4)},
        VMap::identity(), 0.12, 0.25);
    r.driver.kind = "brownian";
    r.driver.d = 2;
    return r;
  }
  if (name == "composite") {
    // two separated summands, the second one snapped to a coarser grid
    r.dim = 1;
    r.level = 3;
    CoefficientSpec s1 = detail::one_term_spec(
        1, 1, 1.0, {TF::one(1, 1.0), TF::monomial(1, 1.0, {1})},
        {YFunction::constant(0.08)}, {XFunction::cos_sum(1, 1.0, 0.9, {2.0}, 0.0)},
        VMap::identity(), 0.0, 0.10);
    CoefficientSpec s2 = detail::one_term_spec(
        1, 1, 1.0, {TF::one(1, 1.0), TF::monomial(1, 1.0, {1})},
        {YFunction::affine_clamped(0.02, {0.03, 0.05}, 0.2)},
        {XFunction::tanh_ramp(1, 1.0, 0.7, 3.0, 0.4, 0)}, VMap::snap(2), 0.05, 0.12);
    std::vector<CoefficientSpec> parts{s1, s2};
    r.spec = sum_specs(parts);
    r.driver.kind = "brownian";
    return r;
  }
  if (name == "exp-bump") {
    r.dim = 1;
    r.level = 4;
    r.spec = detail::one_term_spec(
        1, 1, 1.0, {TF::one(1, 1.0), TF::monomial(1, 1.0, {1})},
        {YFunction::tanh_squashed(0.25, 0.1, {0.10, 0.10})},
        {XFunction::cos_sum(1, 1.0, 0.9, {1.0}, 0.2)}, VMap::identity(), 0.06, 0.25);
    r.driver.kind = "brownian";
    r.scheme = SchemeKind::Exponential;
    return r;
  }
  if (name == "exp-mixed") {
    r.dim = 1;
    r.level = 3;
    r.spec = detail::one_term_spec(
        1, 1, 1.0, {TF::one(1, 1.0), TF::monomial(1, 1.0, {1})},
        {YFunction::affine_clamped(0.06, {0.04, 0.08}, 0.3)},
        {XFunction::gauss_bump(1, 1.0, 0.85, {0.6}, 0.3)}, VMap::identity(), 0.10, 0.20);
    r.driver.kind = "mixed";
    r.driver.lambda = 1.5;
    r.driver.beta = 0.25;
    r.scheme = SchemeKind::Exponential;
    return r;
  }
  if (name == "smooth-target") {
    // spatially Lipschitz-1/2 data: its level-n snapping sits strictly
    // inside the 2^-n approximation budget
    r.dim = 1;
    r.level = 3;
    r.spec = detail::one_term_spec(
        1, 1, 1.0, {TF::one(1, 1.0)}, {YFunction::constant(0.3)},
        {XFunction::linear(1, 1.0, 0.0, {0.5})}, VMap::identity(), 0.0, 0.3);
    r.driver.kind = "brownian";
    r.driver.n_steps = 512;
    return r;
  }
  if (name == "density-flat") {
    r.dim = 1;
    r.level = 3;
    r.spec = detail::one_term_spec(
        1, 1, 1.0, {TF::one(1, 1.0), TF::monomial(1, 1.0, {1})},
        {YFunction::affine_clamped(0.04, {0.04, 0.06}, 0.25)},
        {XFunction::cos_sum(1, 1.0, 0.9, {2.0}, 0.1)}, VMap::identity(), 0.08, 0.25);
    r.driver.kind = "brownian";
    return r;
  }
  if (name == "refine-demo") {
    // everything measurable on the level-1 grid, so refinements of it
    // reproduce the coarse run exactly
    r.dim = 1;
    r.level = 1;
    r.spec = detail::one_term_spec(
        1, 1, 1.0,
        {TF::one(1, 1.0), TF::snapped(TF::monomial(1, 1.0, {1}), 1)},
        {YFunction::affine_clamped(0.05, {0.05, 0.08}, 0.3)},
        {XFunction::cos_sum(1, 1.0, 0.9, {1.0}, 0.0)}, VMap::snap(1), 0.10, 0.25);
    r.driver.kind = "mixed";
    r.driver.lambda = 1.0;
    r.driver.beta = 0.3;
    return r;
  }
  throw SpecError("unknown catalog name: " + name);
}

// The linear-scheme sweep every broad check runs over.
inline std::vector<std::string> suite_names() {
  return {"two-cell", "cpoisson-coarse", "cpoisson-mid",
          "mixed-wide", "planar",          "composite"};
}

inline std::vector<std::string> exponential_suite_names() {
  return {"exp-bump", "exp-mixed"};
}

inline std::vector<std::string> catalog_names() {
  auto v = suite_names();
  for (const auto& n : exponential_suite_names()) v.push_back(n);
  v.push_back("smooth-target");
  v.push_back("density-flat");
  v.push_back("refine-demo");
  return v;
}

}  // namespace mvsde
