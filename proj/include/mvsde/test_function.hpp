#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mvsde/catalog.hpp"
#include "mvsde/partition.hpp"

namespace mvsde {

// Bounded test functions paired against measures: lower-box indicators,
// scaled coordinate monomials, named catalog entries, snapped compositions
// f(v_level(x)), and finite products. Everything is kept within |f| <= 1 so
// pairings are uniformly controlled.
class TestFunction {
 public:
  enum class Kind { One, Indicator, Monomial, Named, Snapped, Product };

  static TestFunction one(int dim, double side) { return TestFunction(Kind::One, dim, side); }

  // Indicator of the lower box [0, b] (componentwise).
  static TestFunction indicator(int dim, double side, std::vector<double> b) {
    TestFunction f(Kind::Indicator, dim, side);
    require(int(b.size()) == dim, "indicator: corner size != dim");
    f.vec_ = std::move(b);
    return f;
  }

  // prod_a (x_a / side)^powers[a]
  static TestFunction monomial(int dim, double side, std::vector<int> powers) {
    TestFunction f(Kind::Monomial, dim, side);
    require(int(powers.size()) == dim, "monomial: powers size != dim");
    for (int p : powers) require(p >= 0, "monomial: powers must be nonnegative");
    f.powers_ = std::move(powers);
    return f;
  }

  static TestFunction named(XFunction g) {
    TestFunction f(Kind::Named, g.dim(), g.side());
    require(g.sup_abs() <= 1.0 + 1e-12,
            "named test function: sup bound exceeds 1");
    f.named_ = std::make_shared<XFunction>(std::move(g));
    return f;
  }

  static TestFunction snapped(TestFunction inner, int level) {
    TestFunction f(Kind::Snapped, inner.dim_, inner.side_);
    require(level >= 0, "snapped: level must be nonnegative");
    f.level_ = level;
    f.factors_.push_back(std::move(inner));
    return f;
  }

  static TestFunction product(std::vector<TestFunction> factors) {
    require(!factors.empty(), "product: needs at least one factor");
    TestFunction f(Kind::Product, factors.front().dim_, factors.front().side_);
    for (const auto& g : factors)
      require(g.dim_ == f.dim_ && g.side_ == f.side_, "product: mismatched domains");
    f.factors_ = std::move(factors);
    return f;
  }

  Kind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  double side() const noexcept { return side_; }

  double eval(std::span<const double> x) const {
    switch (kind_) {
      case Kind::One:
        return 1.0;
      case Kind::Indicator:
        for (int a = 0; a < dim_; ++a)
          if (x[a] > vec_[a]) return 0.0;
        return 1.0;
      case Kind::Monomial: {
        double v = 1.0;
        for (int a = 0; a < dim_; ++a)
          for (int p = 0; p < powers_[a]; ++p) v *= x[a] / side_;
        return v;
      }
      case Kind::Named:
        return named_->eval(x);
      case Kind::Snapped: {
        std::vector<double> s(dim_);
        snap_point(x, side_, level_, s);
        return factors_[0].eval(s);
      }
      case Kind::Product: {
        double v = 1.0;
        for (const auto& g : factors_) v *= g.eval(x);
        return v;
      }
    }
    return 0.0;
  }

  // Whether pairings against this function are exact on the partition, i.e.
  // the function is constant on every cell.
  bool measurable_at(const Partition& p) const {
    if (p.dim() != dim_ || p.side() != side_) return false;
    switch (kind_) {
      case Kind::One:
        return true;
      case Kind::Indicator: {
        double w = p.cell_width();
        for (double b : vec_) {
          if (b <= 0.0 || b >= side_) continue;  // all-or-nothing axis
          double r = b / w;
          if (std::fabs(r - std::round(r)) > 1e-9) return false;
        }
        return true;
      }
      case Kind::Monomial:
        for (int q : powers_)
          if (q != 0) return false;
        return true;
      case Kind::Named:
        return named_->kind() == XFunction::Kind::Constant;
      case Kind::Snapped:
        return level_ <= p.level();
      case Kind::Product:
        for (const auto& g : factors_)
          if (!g.measurable_at(p)) return false;
        return true;
    }
    return false;
  }

  json to_json() const {
    switch (kind_) {
      case Kind::One:
        return {{"kind", "one"}};
      case Kind::Indicator:
        return {{"kind", "indicator"}, {"b", vec_}};
      case Kind::Monomial:
        return {{"kind", "monomial"}, {"powers", powers_}};
      case Kind::Named:
        return {{"kind", "named"}, {"fn", named_->to_json()}};
      case Kind::Snapped:
        return {{"kind", "snapped"}, {"level", level_}, {"inner", factors_[0].to_json()}};
      case Kind::Product: {
        json fs = json::array();
        for (const auto& g : factors_) fs.push_back(g.to_json());
        return {{"kind", "product"}, {"factors", fs}};
      }
    }
    return {};
  }

  static TestFunction from_json(const json& j, int dim, double side) {
    require(j.is_object() && j.contains("kind"), "test function document needs a kind");
    std::string kind = j.at("kind").get<std::string>();
    try {
      if (kind == "one") return one(dim, side);
      if (kind == "indicator")
        return indicator(dim, side, j.at("b").get<std::vector<double>>());
      if (kind == "monomial")
        return monomial(dim, side, j.at("powers").get<std::vector<int>>());
      if (kind == "named") return named(XFunction::from_json(j.at("fn"), dim, side));
      if (kind == "snapped")
        return snapped(from_json(j.at("inner"), dim, side), j.at("level").get<int>());
      if (kind == "product") {
        std::vector<TestFunction> fs;
        for (const auto& e : j.at("factors")) fs.push_back(from_json(e, dim, side));
        return product(std::move(fs));
      }
    } catch (const json::exception& e) {
      throw SpecError("test function '" + kind + "': " + e.what());
    }
    throw SpecError("unknown test function kind: " + kind);
  }

 private:
  TestFunction(Kind k, int dim, double side) : kind_(k), dim_(dim), side_(side) {
    require(dim >= 1, "test function: dim must be positive");
    require(side > 0.0, "test function: side must be positive");
  }

  Kind kind_;
  int dim_;
  double side_;
  std::vector<double> vec_;
  std::vector<int> powers_;
  int level_ = 0;
  std::shared_ptr<const XFunction> named_;
  std::vector<TestFunction> factors_;
};

// Default family used by the comparison seminorm: eight nested lower-box
// indicators along the diagonal plus four low-order monomials.
inline std::vector<TestFunction> default_test_family(int dim, double side) {
  std::vector<TestFunction> fs;
  for (int j = 1; j <= 8; ++j) {
    std::vector<double> b(dim, side * double(j) / 8.0);
    fs.push_back(TestFunction::indicator(dim, side, b));
  }
  auto mono = [&](std::vector<int> p) { fs.push_back(TestFunction::monomial(dim, side, p)); };
  if (dim == 1) {
    mono({1});
    mono({2});
    mono({3});
    mono({4});
  } else {
    std::vector<int> p(dim, 0);
    p[0] = 1;
    mono(p);
    p.assign(dim, 0);
    p[1] = 1;
    mono(p);
    p.assign(dim, 0);
    p[0] = 1;
    p[1] = 1;
    mono(p);
    p.assign(dim, 0);
    p[0] = 2;
    mono(p);
  }
  return fs;
}

}  // namespace mvsde
