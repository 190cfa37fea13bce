#include <catch2/catch_amalgamated.hpp>

#include <mvsde/measure.hpp>
#include <mvsde/partition.hpp>
#include <mvsde/test_function.hpp>

using namespace mvsde;

TEST_CASE("partition geometry") {
  Partition p(1, 1.0, 3);
  CHECK(p.n_cells() == 8);
  CHECK(p.cells_per_axis() == 8);
  CHECK(p.cell_width() == 0.125);
  CHECK(p.cell_volume() == 0.125);

  Partition q(2, 2.0, 2);
  CHECK(q.n_cells() == 16);
  CHECK(q.cell_width() == 0.5);
  CHECK(q.cell_volume() == 0.25);

  CHECK_THROWS_AS(Partition(1, 1.0, 13), SpecError);
  CHECK_THROWS_AS(Partition(1, -1.0, 2), SpecError);
  CHECK_THROWS_AS(Partition(3, 1.0, 9), SpecError);  // size cap
}

TEST_CASE("locate and corners") {
  Partition p(1, 1.0, 3);
  std::vector<double> x{0.3};
  CHECK(p.locate(x) == 2);
  x[0] = 0.125;  // boundary belongs to the right cell
  CHECK(p.locate(x) == 1);
  x[0] = 1.0;  // top face folds into the last cell
  CHECK(p.locate(x) == 7);
  x[0] = 0.0;
  CHECK(p.locate(x) == 0);

  auto c = p.lower_corner(5);
  CHECK(c[0] == 0.625);

  Partition q(2, 1.0, 1);
  std::vector<double> y{0.7, 0.2};
  // axis 0 most significant: cell (1, 0) -> index 2
  CHECK(q.locate(y) == 2);
  auto lc = q.lower_corner(3);
  CHECK(lc[0] == 0.5);
  CHECK(lc[1] == 0.5);
}

TEST_CASE("cell index round trip") {
  Partition p(3, 1.0, 2);
  std::vector<std::int64_t> c(3);
  for (std::int64_t i = 0; i < p.n_cells(); ++i) {
    p.cell_coords(i, c);
    CHECK(p.cell_index(c) == i);
  }
}

TEST_CASE("parent and ancestor indexing") {
  Partition fine(1, 1.0, 3);
  CHECK(fine.parent_of(5) == 2);
  CHECK(fine.parent_of(0) == 0);
  CHECK(fine.parent_of(7) == 3);

  Partition coarse(1, 1.0, 1);
  CHECK(fine.ancestor_of(5, coarse) == 1);
  CHECK(fine.ancestor_of(3, coarse) == 0);

  Partition f2(2, 1.0, 2);
  Partition c2(2, 1.0, 1);
  // cell (3, 0) at level 2 -> (1, 0) at level 1 -> index 2
  std::vector<std::int64_t> cc{3, 0};
  CHECK(f2.ancestor_of(f2.cell_index(cc), c2) == 2);

  CHECK(fine.is_refinement_of(coarse));
  CHECK_FALSE(coarse.is_refinement_of(fine));
  CHECK_FALSE(Partition(1, 2.0, 3).is_refinement_of(coarse));
}

TEST_CASE("snap_point") {
  std::vector<double> x{0.3}, out(1);
  snap_point(x, 1.0, 2, out);
  CHECK(out[0] == 0.25);
  snap_point(x, 1.0, 1, out);
  CHECK(out[0] == 0.0);
  x[0] = 1.0;  // clamps into the last cell
  snap_point(x, 1.0, 2, out);
  CHECK(out[0] == 0.75);
}

TEST_CASE("uniform measure") {
  Partition p(1, 1.0, 3);
  auto m = PartitionMeasure::uniform(p);
  CHECK(m.weights.size() == 8);
  CHECK(m.total_mass() == 1.0);  // dyadic weights sum exactly
  for (double w : m.weights) CHECK(w == 0.125);
}

TEST_CASE("measure from density") {
  // f(x) = x on level 2: cell masses (2i+1)/32
  Partition p(1, 1.0, 2);
  auto m = PartitionMeasure::from_density(
      p, [](std::span<const double> x) { return x[0]; });
  REQUIRE(m.weights.size() == 4);
  CHECK_THAT(m.weights[0], Catch::Matchers::WithinAbs(0.03125, 1e-15));
  CHECK_THAT(m.weights[1], Catch::Matchers::WithinAbs(0.09375, 1e-15));
  CHECK_THAT(m.weights[2], Catch::Matchers::WithinAbs(0.15625, 1e-15));
  CHECK_THAT(m.weights[3], Catch::Matchers::WithinAbs(0.21875, 1e-15));
  CHECK_THAT(m.total_mass(), Catch::Matchers::WithinAbs(0.5, 1e-15));
}

TEST_CASE("pairing at lower corners") {
  Partition p(1, 1.0, 2);
  auto m = PartitionMeasure::uniform(p);
  auto f = TestFunction::monomial(1, 1.0, {1});
  CHECK(pairing(m, f) == 0.375);  // mean of corners 0, .25, .5, .75
  CHECK_FALSE(pairing_is_exact(m, f));

  auto one = TestFunction::one(1, 1.0);
  CHECK(pairing(m, one) == 1.0);
  CHECK(pairing_is_exact(m, one));

  auto ind = TestFunction::indicator(1, 1.0, {0.5});
  CHECK(pairing(m, ind) == 0.75);  // corners 0, .25, .5 inside a closed box
  CHECK(pairing_is_exact(m, ind));
}

TEST_CASE("aggregate and embed") {
  Partition fine(1, 1.0, 3), coarse(1, 1.0, 1);
  std::vector<double> w(8);
  for (int i = 0; i < 8; ++i) w[std::size_t(i)] = double(i + 1) / 36.0;
  PartitionMeasure mf(fine, w);

  auto mc = aggregate(mf, coarse);
  REQUIRE(mc.weights.size() == 2);
  CHECK_THAT(mc.weights[0], Catch::Matchers::WithinAbs(10.0 / 36.0, 1e-15));
  CHECK_THAT(mc.weights[1], Catch::Matchers::WithinAbs(26.0 / 36.0, 1e-15));

  auto back = embed(mc, fine);
  REQUIRE(back.weights.size() == 8);
  for (int i = 0; i < 4; ++i)
    CHECK_THAT(back.weights[std::size_t(i)],
               Catch::Matchers::WithinAbs(10.0 / 144.0, 1e-15));
  // embed is a right inverse of aggregate
  auto again = aggregate(back, coarse);
  CHECK_THAT(again.weights[0], Catch::Matchers::WithinAbs(mc.weights[0], 1e-15));
  CHECK_THAT(again.weights[1], Catch::Matchers::WithinAbs(mc.weights[1], 1e-15));

  // measurable pairings survive aggregation exactly
  auto g = TestFunction::indicator(1, 1.0, {0.5});
  CHECK_THAT(pairing(mf, g), Catch::Matchers::WithinAbs(pairing(mc, g) , 1e-15));
}

TEST_CASE("test function evaluation") {
  auto f = TestFunction::monomial(2, 2.0, {1, 2});
  std::vector<double> x{1.0, 1.0};  // u = (.5, .5)
  CHECK_THAT(f.eval(x), Catch::Matchers::WithinAbs(0.125, 1e-15));

  auto snapped = TestFunction::snapped(TestFunction::monomial(1, 1.0, {1}), 1);
  std::vector<double> y{0.7};
  CHECK(snapped.eval(y) == 0.5);
  CHECK(snapped.measurable_at(Partition(1, 1.0, 1)));
  CHECK(snapped.measurable_at(Partition(1, 1.0, 3)));
  CHECK_FALSE(snapped.measurable_at(Partition(1, 1.0, 0)));

  auto prod = TestFunction::product({TestFunction::monomial(1, 1.0, {1}),
                                     TestFunction::monomial(1, 1.0, {2})});
  std::vector<double> z{0.5};
  CHECK_THAT(prod.eval(z), Catch::Matchers::WithinAbs(0.125, 1e-15));

  auto j = f.to_json();
  auto back = TestFunction::from_json(j, 2, 2.0);
  CHECK(back.eval(x) == f.eval(x));
}
