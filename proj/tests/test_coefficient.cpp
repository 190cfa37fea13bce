#include <catch2/catch_amalgamated.hpp>

#include <mvsde/coefficient.hpp>
#include <mvsde/measure.hpp>
#include <mvsde/presets.hpp>

using namespace mvsde;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

CoefficientSpec two_cell_spec() { return catalog_setup("two-cell").spec; }

struct KernelState {
  std::vector<double> y, S, k;
  double mass = 0.0;
};

KernelState eval_kernel(const KernelEvaluator& ke, std::span<const double> w) {
  KernelState s;
  s.y.resize(ke.n_moments());
  s.S.resize(ke.n_terms() * std::size_t(ke.spec().d));
  s.k.resize(std::size_t(ke.spec().d) * std::size_t(ke.n_cells()));
  ke.moments(w, s.y);
  ke.term_pairings(w, s.S);
  s.mass = s.y[0];
  ke.eval(s.y, s.S, s.mass, s.k);
  return s;
}

}  // namespace

TEST_CASE("moments of the constant and coordinate functions") {
  Partition p(1, 1.0, 2);
  CoefficientSpec spec = two_cell_spec();
  spec.h.push_back(TestFunction::monomial(1, 1.0, {1}));
  KernelEvaluator ke(spec, p);
  std::vector<double> w{0.25, 0.25, 0.25, 0.25}, y(2);
  ke.moments(w, y);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 0.375);
}

TEST_CASE("two-cell kernel at the balanced state") {
  auto setup = catalog_setup("two-cell");
  Partition p(setup.dim, setup.side, setup.level);
  KernelEvaluator ke(setup.spec, p);
  std::vector<double> w{0.5, 0.5};
  auto s = eval_kernel(ke, w);
  CHECK(s.mass == 1.0);
  CHECK(s.k[0] == 0.1);
  CHECK(s.k[1] == -0.1);
  CHECK(ke.condition2_residual(w, s.k) == 0.0);
}

TEST_CASE("two-cell kernel recenters off-balance states") {
  auto setup = catalog_setup("two-cell");
  Partition p(setup.dim, setup.side, setup.level);
  KernelEvaluator ke(setup.spec, p);
  std::vector<double> w{0.7, 0.3};
  auto s = eval_kernel(ke, w);
  CHECK_THAT(s.k[0], WithinAbs(0.06, 1e-16));
  CHECK_THAT(s.k[1], WithinAbs(-0.14, 1e-16));
  // exact centering while the mass stays above the floor
  CHECK(ke.condition2_residual(w, s.k) < 1e-16);
}

TEST_CASE("mass floor breaks exact centering") {
  auto setup = catalog_setup("two-cell");
  Partition p(setup.dim, setup.side, setup.level);
  KernelEvaluator ke(setup.spec, p);
  std::vector<double> w{0.2, 0.1};  // mass 0.3, below the 1/3 floor
  auto s = eval_kernel(ke, w);
  CHECK_THAT(s.k[0], WithinAbs(0.07, 1e-15));
  CHECK_THAT(s.k[1], WithinAbs(-0.13, 1e-15));
  CHECK_THAT(ke.condition2_residual(w, s.k), WithinAbs(0.001, 1e-12));
}

TEST_CASE("point evaluation matches the grid rows") {
  auto setup = catalog_setup("composite");
  Partition p(setup.dim, setup.side, setup.level);
  KernelEvaluator ke(setup.spec, p);
  auto m = PartitionMeasure::uniform(p);
  auto s = eval_kernel(ke, m.weights);
  for (std::int64_t c : {std::int64_t(0), p.n_cells() / 2, p.n_cells() - 1}) {
    auto x = p.lower_corner(c);
    auto pv = ke.point_values(x);
    for (int e = 0; e < setup.spec.d; ++e) {
      double at_point = ke.eval_point(s.y, s.S, s.mass, pv, e);
      CHECK_THAT(at_point,
                 WithinAbs(s.k[std::size_t(e) * p.n_cells() + c], 1e-14));
    }
  }
}

TEST_CASE("cutoff shape") {
  Cutoff chi;
  CHECK(chi.eval(0.25) == 1.0);
  CHECK(chi.eval(1.0) == 1.0);
  CHECK(chi.eval(4.0) == 1.0);
  CHECK(chi.eval(0.125) == 0.5);
  CHECK(chi.eval(4.5) == 0.5);
  CHECK(chi.eval(0.0) == 0.0);
  CHECK(chi.eval(5.0) == 0.0);
  CHECK(chi.eval(-1.0) == 0.0);
  CHECK(chi.eval(6.0) == 0.0);
  CHECK(chi.slope_bound() == 4.0);
}

TEST_CASE("kernel vanishes once the cutoff closes") {
  auto setup = catalog_setup("two-cell");
  Partition p(setup.dim, setup.side, setup.level);
  KernelEvaluator ke(setup.spec, p);
  std::vector<double> w{3.0, 3.0};  // mass 6 is outside the cutoff support
  auto s = eval_kernel(ke, w);
  CHECK(s.k[0] == 0.0);
  CHECK(s.k[1] == 0.0);
}

TEST_CASE("positivity scaling factor") {
  CHECK(condition1_scale(-2.0, 0.05) == 0.475);
  CHECK_THAT(condition1_scale(-1.2, 0.05), WithinAbs(0.7916666666666666, 1e-16));
  CHECK(condition1_scale(-0.5, 0.05) == 1.0);
  CHECK(condition1_scale(0.3, 0.05) == 1.0);
  CHECK(condition1_scale(-0.95, 0.05) == 1.0);  // at the margin, no scaling yet

  std::vector<double> k{0.5, -0.5, 0.25, -0.25};  // d=2, two cells
  std::vector<double> dY{1.0, 1.0};
  double md = condition1_min_dot(k, dY, 2, 2);
  CHECK(md == -0.75);  // cell 1 collects -0.5 - 0.25
  CHECK(condition1_check(k, dY, 2, 2));
  dY = {2.0, 2.0};
  CHECK_FALSE(condition1_check(k, dY, 2, 2));
  CHECK(condition1_min_dot(k, {}, 0, 2) == 0.0);  // empty driver: no exposure
}

TEST_CASE("y-function shapes") {
  auto c = YFunction::constant(0.1);
  std::vector<double> y{1.0, 2.0};
  CHECK(c.eval(y) == 0.1);
  CHECK(c.lipschitz_l1() == 0.0);

  auto a = YFunction::affine_clamped(0.05, {0.1, 0.15}, 0.2);
  CHECK_THAT(a.eval(y), WithinAbs(0.2, 1e-15));  // 0.05+0.1+0.3 clamps at 0.2
  std::vector<double> y2{1.0, 0.0};
  CHECK_THAT(a.eval(y2), WithinAbs(0.15, 1e-15));
  CHECK(a.sup_abs() == 0.2);
  CHECK(a.lipschitz_l1() == 0.15);

  auto t = YFunction::tanh_squashed(0.3, 0.2, {0.05, 0.2});
  CHECK_THAT(t.eval(y2), WithinAbs(0.3 * std::tanh(0.25), 1e-15));
  CHECK(t.sup_abs() == 0.3);
  CHECK_THAT(t.lipschitz_l1(), WithinAbs(0.06, 1e-15));
}

TEST_CASE("spec validation rejects malformed inputs") {
  auto good = two_cell_spec();
  CHECK_NOTHROW(good.validate());

  auto bad_h = good;
  bad_h.h[0] = TestFunction::monomial(1, 1.0, {1});
  CHECK_THROWS_AS(bad_h.validate(), SpecError);

  auto bad_g = good;
  bad_g.terms[0].gcheck[0] = XFunction::cos_sum(1, 1.0, 1.5, {2.0}, 0.0);
  CHECK_THROWS_AS(bad_g.validate(), SpecError);

  auto bad_eps = good;
  bad_eps.eps_dblprime = 0.0;
  CHECK_THROWS_AS(bad_eps.validate(), SpecError);

  auto bad_margin = good;
  bad_margin.jump_margin = 1.0;
  CHECK_THROWS_AS(bad_margin.validate(), SpecError);
}

TEST_CASE("catalog presets declare honest constants") {
  for (const auto& name : catalog_names()) {
    INFO("catalog " << name);
    auto setup = catalog_setup(name);
    CHECK_NOTHROW(setup.spec.validate());
    CHECK_NOTHROW(validate_constants(setup.spec, 2048, 7));
  }
  CHECK_THROWS_AS(catalog_setup("no-such-catalog"), SpecError);
}

TEST_CASE("sum of specs adds kernels") {
  auto a = catalog_setup("two-cell").spec;
  auto b = a;
  b.terms[0].gbar[0] = YFunction::constant(0.25);
  std::vector<CoefficientSpec> parts{a, b};
  auto sum = sum_specs(parts);
  REQUIRE(sum.terms.size() == 2);

  Partition p(1, 1.0, 1);
  KernelEvaluator ka(a, p), kb(b, p), ks(sum, p);
  std::vector<double> w{0.6, 0.4};
  auto sa = eval_kernel(ka, w);
  auto sb = eval_kernel(kb, w);
  auto ss = eval_kernel(ks, w);
  for (std::size_t i = 0; i < ss.k.size(); ++i)
    CHECK_THAT(ss.k[i], WithinAbs(sa.k[i] + sb.k[i], 1e-15));
}

TEST_CASE("constants estimate flags understated declarations") {
  auto spec = two_cell_spec();
  auto est = estimate_constants(spec, 2048, 7);
  CHECK(est.eps_prime_emp <= spec.eps_prime + 1e-12);
  CHECK(est.eps_dblprime_emp <= spec.eps_dblprime + 1e-12);

  auto lying = spec;
  lying.eps_dblprime = 1e-6;  // the kernel genuinely moves more than this
  CHECK_THROWS_AS(validate_constants(lying, 2048, 7), SpecError);
}

TEST_CASE("spec json round trip") {
  for (const auto& name : {"two-cell", "composite", "planar"}) {
    auto spec = catalog_setup(name).spec;
    auto j = spec.to_json();
    auto back = CoefficientSpec::from_json(j);
    CHECK(back.to_json() == j);

    Partition p(spec.dim, spec.side, 2);
    KernelEvaluator k1(spec, p), k2(back, p);
    auto m = PartitionMeasure::uniform(p);
    auto s1 = eval_kernel(k1, m.weights);
    auto s2 = eval_kernel(k2, m.weights);
    for (std::size_t i = 0; i < s1.k.size(); ++i) CHECK(s1.k[i] == s2.k[i]);
  }
}
