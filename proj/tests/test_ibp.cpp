#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <mvsde/ibp.hpp>
#include <mvsde/measure.hpp>

using namespace mvsde;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("gauss-legendre rule") {
  std::vector<double> n16, w16;
  gauss_legendre(16, n16, w16);
  REQUIRE(n16.size() == 16);
  double total = 0.0;
  for (double w : w16) total += w;
  CHECK_THAT(total, WithinAbs(2.0, 1e-14));
  for (int i = 0; i < 16; ++i) {
    CHECK_THAT(n16[std::size_t(i)], WithinAbs(-n16[std::size_t(15 - i)], 1e-15));
    CHECK(w16[std::size_t(i)] > 0.0);
  }
}

TEST_CASE("box quadrature integrates polynomials exactly") {
  std::vector<int> axes{0};
  std::vector<double> lo{0.0}, hi{1.0}, x(1);
  double q = box_quadrature(axes, lo, hi, x,
                            [](std::span<const double> p) { return p[0] * p[0]; });
  CHECK_THAT(q, WithinAbs(1.0 / 3.0, 1e-15));

  // no axes: evaluate at the pinned point
  std::vector<int> none;
  x[0] = 0.7;
  double v = box_quadrature(none, {}, {}, x,
                            [](std::span<const double> p) { return 2.0 * p[0]; });
  CHECK(v == 1.4);

  std::vector<int> both{0, 1};
  std::vector<double> lo2{0.0, 0.5}, hi2{1.0, 1.0}, x2(2);
  double q2 = box_quadrature(both, lo2, hi2, x2,
                             [](std::span<const double> p) { return p[0] * p[1]; });
  CHECK_THAT(q2, WithinAbs(0.5 * 0.375, 1e-15));
}

TEST_CASE("grid function basics") {
  auto f = GridFunction::sample(2, 1.0, 5, [](std::span<const double> x) {
    return x[0] + 2.0 * x[1];
  });
  CHECK(f.spacing() == 0.25);
  CHECK(f.node_coord(3) == 0.75);
  std::vector<std::int64_t> idx{2, 1};
  CHECK(f.at(idx) == 1.0);
  CHECK(f.corner_value() == 3.0);

  auto face = f.top_face(0b10);  // pin axis 1 at the top
  REQUIRE(face.dim() == 1);
  std::vector<std::int64_t> fi{2};
  CHECK(face.at(fi) == 2.5);

  CHECK_THROWS_AS(GridFunction(4, 1.0, 5), SpecError);
  CHECK_THROWS_AS(GridFunction(1, 1.0, 2), SpecError);

  CHECK(f.node_of(0.5) == 2);
  CHECK_THROWS_AS(f.node_of(0.3), SpecError);
}

TEST_CASE("derivative is exact on quadratics") {
  auto f = GridFunction::sample(1, 1.0, 9,
                                [](std::span<const double> x) { return x[0] * x[0]; });
  auto d = f.derivative(0);
  for (std::int64_t i = 0; i < 9; ++i) {
    std::vector<std::int64_t> idx{i};
    CHECK(d.at(idx) == 2.0 * f.node_coord(i));
  }
}

TEST_CASE("cumulative primitive telescopes to the trapezoid rule") {
  auto f = GridFunction::sample(2, 1.0, 33, [](std::span<const double> x) {
    double dx = x[0] - 0.4, dy = x[1] - 0.6;
    return std::exp(-2.0 * (dx * dx + dy * dy));
  });
  auto F = f.cumulative_primitive();
  std::vector<std::int64_t> lo{0, 0}, hi{32, 32};
  CHECK_THAT(l_volume(F, lo, hi), WithinRel(f.trapezoid_integral(), 1e-12));

  // and the double overload resolves dyadic corners to nodes
  std::vector<double> dlo{0.25, 0.5}, dhi{0.75, 1.0};
  std::vector<std::int64_t> ilo{8, 16}, ihi{24, 32};
  CHECK(l_volume(F, dlo, dhi) == l_volume(F, ilo, ihi));
}

TEST_CASE("l-volume of a product primitive is the box area") {
  auto one = GridFunction::sample(2, 1.0, 5,
                                  [](std::span<const double>) { return 1.0; });
  auto F = one.cumulative_primitive();  // F(x, y) = x y, exactly on dyadic nodes
  std::vector<std::int64_t> lo{1, 0}, hi{3, 2};
  CHECK(l_volume(F, lo, hi) == 0.25);
  std::vector<std::int64_t> lo0{2, 2}, hi0{2, 4};
  CHECK(l_volume(F, lo0, hi0) == 0.0);  // degenerate box
  std::vector<std::int64_t> bad_lo{3, 0}, bad_hi{1, 2};
  CHECK_THROWS_AS(l_volume(F, bad_lo, bad_hi), SpecError);
}

TEST_CASE("iterated identity residual, frozen second-order value") {
  auto u = GridFunction::sample(1, 1.0, 129,
                                [](std::span<const double> x) { return x[0] * x[0]; });
  auto v = GridFunction::sample(1, 1.0, 129, [](std::span<const double> x) {
    return x[0] * x[0] * x[0];
  });
  CHECK_THAT(iterated_ibp_check(u, v), WithinRel(5.3228810429573059e-4, 1e-12));

  auto u2 = GridFunction::sample(1, 1.0, 65,
                                 [](std::span<const double> x) { return x[0] * x[0]; });
  auto v2 = GridFunction::sample(1, 1.0, 65, [](std::span<const double> x) {
    return x[0] * x[0] * x[0];
  });
  double ratio = iterated_ibp_check(u2, v2) / iterated_ibp_check(u, v);
  CHECK(ratio > 3.5);
  CHECK(ratio < 4.5);
}

TEST_CASE("iterated identity in two dimensions stays second order") {
  auto mk = [](std::int64_t n) {
    auto u = GridFunction::sample(2, 1.0, n, [](std::span<const double> x) {
      return std::cos(2.0 * x[0]) * (1.0 + 0.5 * x[1]);
    });
    auto v = GridFunction::sample(2, 1.0, n, [](std::span<const double> x) {
      return std::sin(x[0] + 1.5 * x[1]);
    });
    return iterated_ibp_check(u, v);
  };
  double coarse = mk(33), fine = mk(65);
  CHECK(fine < coarse);
  CHECK(coarse / fine > 3.0);
  CHECK(coarse / fine < 5.0);
}

TEST_CASE("boundary face expansion is exact for linear data") {
  auto one1 = GridFunction::sample(1, 1.0, 9,
                                   [](std::span<const double>) { return 1.0; });
  auto u1 = XFunction::linear(1, 1.0, 0.0, {1.0});
  CHECK_THAT(boundary_face_expansion(one1, u1), WithinAbs(0.5, 1e-14));

  auto one2 = GridFunction::sample(2, 1.0, 9,
                                   [](std::span<const double>) { return 1.0; });
  auto u2 = XFunction::linear(2, 1.0, 0.0, {1.0, 1.0});
  CHECK_THAT(boundary_face_expansion(one2, u2), WithinAbs(1.0, 1e-13));
}

TEST_CASE("boundary face expansion approaches the true integral") {
  auto u = XFunction::cos_sum(1, 1.0, 0.9, {1.0}, 0.2);
  auto f = XFunction::gauss_bump(1, 1.0, 0.8, {0.45}, 0.4);
  auto grid = GridFunction::sample(
      1, 1.0, 129, [&](std::span<const double> x) { return f.eval(x); });
  std::vector<int> axes{0};
  std::vector<double> lo{0.0}, hi{1.0}, x(1);
  double truth = box_quadrature(axes, lo, hi, x, [&](std::span<const double> p) {
    return f.eval(p) * u.eval(p);
  });
  CHECK_THAT(boundary_face_expansion(grid, u), WithinAbs(truth, 2e-3));
}

TEST_CASE("pairing difference decomposes into face terms") {
  Partition p(1, 1.0, 2);
  auto c1 = PartitionMeasure::uniform(p);
  auto c2 = PartitionMeasure::from_density(
      p, [](std::span<const double> x) { return 2.0 * x[0]; });
  auto g = XFunction::cos_sum(1, 1.0, 0.9, {1.0}, 0.2);
  double eps_b = std::max(g.partial_bound(0), g.partial_bound(1));

  auto rep = ibp_pairing_bound_terms(c1, c2, g, eps_b);
  REQUIRE(rep.faces.size() == 2);
  CHECK(rep.identity_error <= 1e-10);
  CHECK(rep.bound_holds);
  CHECK(rep.max_corner_diff > 0.0);

  double direct = pairing(c1, TestFunction::named(g)) - pairing(c2, TestFunction::named(g));
  CHECK_THAT(rep.direct, WithinAbs(direct, 1e-14));
}

TEST_CASE("pairing bound in two dimensions") {
  Partition p(2, 1.0, 2);
  auto c1 = PartitionMeasure::uniform(p);
  auto c2 = c1;
  for (std::int64_t c = 0; c < p.n_cells(); ++c)
    c2.weights[std::size_t(c)] *=
        1.0 + 0.2 * std::cos(2.0 * M_PI * (double(c) + 0.5) / double(p.n_cells()));
  auto g = XFunction::cos_sum(2, 1.0, 0.8, {1.0, 0.5}, 0.1);
  double eps_b = 0.0;
  for (int o = 0; o <= 2; ++o) eps_b = std::max(eps_b, g.partial_bound(o));

  auto rep = ibp_pairing_bound_terms(c1, c2, g, eps_b);
  REQUIRE(rep.faces.size() == 4);
  CHECK(rep.identity_error <= 1e-10);
  CHECK(rep.bound_holds);
  for (const auto& t : rep.faces) CHECK(std::fabs(t.value) <= t.bound + 1e-12);

  // identical states: every term collapses to zero
  auto zero = ibp_pairing_bound_terms(c1, c1, g, eps_b);
  CHECK(zero.face_sum == 0.0);
  CHECK(zero.direct == 0.0);
  CHECK(zero.max_corner_diff == 0.0);
  CHECK(zero.bound_holds);

  Partition q(2, 1.0, 1);
  auto other = PartitionMeasure::uniform(q);
  CHECK_THROWS_AS(ibp_pairing_bound_terms(c1, other, g, eps_b), SpecError);
}
