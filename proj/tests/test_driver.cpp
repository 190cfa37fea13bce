#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <mvsde/driver.hpp>
#include <mvsde/rng.hpp>

using namespace mvsde;
using Catch::Matchers::WithinAbs;

namespace {

DriverConfig brownian_cfg(int n_steps = 16, std::uint64_t seed = 11) {
  DriverConfig c;
  c.kind = "brownian";
  c.d = 1;
  c.horizon = 1.0;
  c.n_steps = n_steps;
  c.seed = seed;
  return c;
}

DriverConfig cpoisson_cfg(std::uint64_t seed = 11) {
  DriverConfig c;
  c.kind = "cpoisson";
  c.d = 1;
  c.horizon = 1.0;
  c.n_steps = 8;
  c.lambda = 2.0;
  c.beta = 0.5;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("sampling is a pure function of seed and path index") {
  auto cfg = cpoisson_cfg();
  cfg.kind = "mixed";
  auto a = sample_driver(cfg, 3);
  auto b = sample_driver(cfg, 3);
  CHECK(a.times == b.times);
  CHECK(a.cont == b.cont);
  CHECK(a.quad_var == b.quad_var);
  REQUIRE(a.jumps.size() == b.jumps.size());
  for (std::size_t i = 0; i < a.jumps.size(); ++i) {
    CHECK(a.jumps[i].node == b.jumps[i].node);
    CHECK(a.jumps[i].delta == b.jumps[i].delta);
  }

  auto c = sample_driver(cfg, 4);
  CHECK(a.cont != c.cont);
  auto cfg2 = cfg;
  cfg2.seed = 12;
  auto d = sample_driver(cfg2, 3);
  CHECK(a.cont != d.cont);
}

TEST_CASE("brownian path layout") {
  auto cfg = brownian_cfg();
  auto p = sample_driver(cfg, 0);
  REQUIRE(p.times.size() == 17);
  CHECK(p.n_steps() == 16);
  CHECK(p.jumps.empty());
  for (std::size_t i = 0; i < p.times.size(); ++i) {
    CHECK(p.times[i] == double(i) / 16.0);
    CHECK(p.uniform_index[i] == std::int64_t(i));
  }
  for (std::size_t i = 0; i < p.n_steps(); ++i) CHECK(p.quad_var[i] == 0.0625);
}

TEST_CASE("brownian increments pass a moment check") {
  auto cfg = brownian_cfg(4, 77);
  const std::size_t n_paths = 4096;
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t k = 0; k < n_paths; ++k) {
    auto p = sample_driver(cfg, k);
    double w = p.value_at(p.n_steps())[0];
    sum += w;
    sumsq += w * w;
  }
  double mean = sum / double(n_paths);
  double var = sumsq / double(n_paths) - mean * mean;
  double z = mean / std::sqrt(1.0 / double(n_paths));
  CHECK(std::fabs(z) < 4.0);
  CHECK(std::fabs(var - 1.0) < 4.0 * std::sqrt(2.0 / double(n_paths - 1)));
}

TEST_CASE("compensated poisson bookkeeping") {
  auto cfg = cpoisson_cfg();
  auto p = sample_driver(cfg, 5);
  // continuous part is pure compensator drift, no bracket
  for (std::size_t i = 0; i < p.n_steps(); ++i) {
    double dt = p.times[i + 1] - p.times[i];
    CHECK(p.cont[i] == -cfg.lambda * cfg.beta * dt);
    CHECK(p.quad_var[i] == 0.0);
  }
  // jump nodes carry multiples of beta and live on the time grid
  for (const auto& j : p.jumps) {
    REQUIRE(j.node < p.times.size());
    double m = j.delta[0] / cfg.beta;
    CHECK_THAT(m, WithinAbs(std::round(m), 1e-12));
    CHECK(m >= 1.0);
  }
}

TEST_CASE("compensated poisson is centered with the right flow of jumps") {
  auto cfg = cpoisson_cfg(101);
  const std::size_t n_paths = 2048;
  double sum = 0.0;
  double n_jumps = 0.0;
  for (std::size_t k = 0; k < n_paths; ++k) {
    auto p = sample_driver(cfg, k);
    sum += p.value_at(p.n_steps())[0];
    for (const auto& j : p.jumps) n_jumps += j.delta[0] / cfg.beta;
  }
  double lt = cfg.lambda * cfg.horizon;
  // terminal variance is lambda beta^2 T
  double se = cfg.beta * std::sqrt(lt / double(n_paths));
  CHECK(std::fabs(sum / double(n_paths)) < 4.0 * se);
  double rate_se = std::sqrt(lt / double(n_paths));
  CHECK(std::fabs(n_jumps / double(n_paths) - lt) < 4.0 * rate_se);
}

TEST_CASE("mixed kind carries both parts") {
  auto cfg = cpoisson_cfg();
  cfg.kind = "mixed";
  auto p = sample_driver(cfg, 2);
  bool saw_positive_qv = false;
  for (double qv : p.quad_var) saw_positive_qv |= qv > 0.0;
  CHECK(saw_positive_qv);
}

TEST_CASE("coarsening sums fine increments exactly onto the coarse grid") {
  auto cfg = brownian_cfg(32, 9);
  auto fine = sample_driver(cfg, 1);
  auto coarse = coarsen_driver(fine, 4);
  REQUIRE(coarse.n_steps() == 8);
  for (std::size_t i = 0; i <= 8; ++i) {
    CHECK(coarse.times[i] == double(i) / 8.0);
    CHECK(coarse.uniform_index[i] == std::int64_t(i));
  }
  for (std::size_t i = 0; i < 8; ++i) CHECK(coarse.quad_var[i] == 0.125);
  CHECK_THAT(coarse.value_at(8)[0], WithinAbs(fine.value_at(32)[0], 1e-13));
  CHECK(coarsen_driver(fine, 1).times == fine.times);
}

TEST_CASE("coarsening keeps jump nodes and deltas") {
  auto cfg = cpoisson_cfg(31);
  cfg.kind = "mixed";
  cfg.n_steps = 32;
  auto fine = sample_driver(cfg, 0);
  auto coarse = coarsen_driver(fine, 2);
  REQUIRE(coarse.jumps.size() == fine.jumps.size());
  for (std::size_t i = 0; i < fine.jumps.size(); ++i) {
    CHECK(coarse.times[coarse.jumps[i].node] == fine.times[fine.jumps[i].node]);
    CHECK(coarse.jumps[i].delta == fine.jumps[i].delta);
  }
  CHECK_THAT(coarse.value_at(coarse.n_steps())[0],
             WithinAbs(fine.value_at(fine.n_steps())[0], 1e-13));
}

TEST_CASE("segmentation respects the activity bound") {
  auto cfg = brownian_cfg(256, 13);
  auto p = sample_driver(cfg, 0);
  auto seg = segment(p, 0.5);
  REQUIRE(seg.n_segments() >= 1);
  CHECK(seg.breakpoints.front() == 0.0);
  CHECK(seg.breakpoints.back() == 1.0);
  CHECK(seg.break_nodes.front() == 0);
  CHECK(seg.break_nodes.back() == p.n_steps());
  for (std::size_t s = 0; s + 1 < seg.breakpoints.size(); ++s)
    CHECK(seg.breakpoints[s] < seg.breakpoints[s + 1]);

  // replay the accumulation inside each closed segment
  for (std::size_t s = 0; s < seg.n_segments(); ++s) {
    double sumsq = 0.0, maxinc = 0.0;
    for (std::size_t i = seg.break_nodes[s]; i < seg.break_nodes[s + 1]; ++i) {
      sumsq += p.cont[i] * p.cont[i];
      maxinc = std::max(maxinc, std::fabs(p.cont[i]));
    }
    CHECK(std::sqrt(sumsq) + maxinc <= 0.5 + 1e-12);
  }

  // a bound above the whole-path activity gives a single segment
  auto one = segment(p, 100.0);
  CHECK(one.n_segments() == 1);
  // a tighter bound can only create more segments
  auto tight = segment(p, 0.3);
  CHECK(tight.n_segments() >= seg.n_segments());
  // an unmeetable bound aborts instead of spinning
  CHECK_THROWS_AS(segment(p, 1e-4), NumericalAbort);
  CHECK_THROWS_AS(segment(p, 0.0), SpecError);
}

TEST_CASE("driver config validation and round trip") {
  auto cfg = cpoisson_cfg();
  auto j = cfg.to_json();
  auto back = DriverConfig::from_json(j);
  CHECK(back.to_json() == j);

  auto bad = cfg;
  bad.beta = 0.0;
  CHECK_THROWS_AS(bad.validate(), SpecError);
  bad = cfg;
  bad.kind = "levy";
  CHECK_THROWS_AS(bad.validate(), SpecError);
  bad = cfg;
  bad.n_steps = 0;
  CHECK_THROWS_AS(bad.validate(), SpecError);
  bad = cfg;
  bad.horizon = -1.0;
  CHECK_THROWS_AS(bad.validate(), SpecError);
}

TEST_CASE("counter rng streams are independent and reproducible") {
  CounterRng a(7, 0, 0), b(7, 0, 0), c(7, 0, 1), d(7, 1, 0);
  std::vector<double> va, vb, vc, vd;
  for (int i = 0; i < 64; ++i) {
    va.push_back(a.uniform());
    vb.push_back(b.uniform());
    vc.push_back(c.uniform());
    vd.push_back(d.uniform());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
  for (double u : va) {
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}
