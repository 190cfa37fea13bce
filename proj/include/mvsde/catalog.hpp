#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvsde/common.hpp"

namespace mvsde {

using json = nlohmann::json;

// Scalar functions on the state box [0, side]^dim, drawn from a named
// catalog so every document round-trips exactly. All evaluate in scaled
// coordinates u = x / side. Mixed partials over distinct axes are analytic,
// which the boundary-term checks rely on.
class XFunction {
 public:
  enum class Kind { Constant, Linear, CosSum, TanhRamp, GaussBump };

  static XFunction constant(int dim, double side, double c) {
    XFunction f(Kind::Constant, dim, side);
    f.p0_ = c;
    return f;
  }
  static XFunction linear(int dim, double side, double bias, std::vector<double> slope) {
    XFunction f(Kind::Linear, dim, side);
    require(int(slope.size()) == dim, "x-function linear: slope size != dim");
    f.p0_ = bias;
    f.vec_ = std::move(slope);
    return f;
  }
  // amp * cos(pi * <w, u> + phase)
  static XFunction cos_sum(int dim, double side, double amp, std::vector<double> w,
                           double phase) {
    XFunction f(Kind::CosSum, dim, side);
    require(int(w.size()) == dim, "x-function cos_sum: weight size != dim");
    f.p0_ = amp;
    f.p1_ = phase;
    f.vec_ = std::move(w);
    return f;
  }
  // amp * tanh(slope * (u_axis - center))
  static XFunction tanh_ramp(int dim, double side, double amp, double slope, double center,
                             int axis) {
    XFunction f(Kind::TanhRamp, dim, side);
    require(axis >= 0 && axis < dim, "x-function tanh_ramp: axis out of range");
    f.p0_ = amp;
    f.p1_ = slope;
    f.p2_ = center;
    f.axis_ = axis;
    return f;
  }
  // amp * exp(-|u - center|^2 / (2 sigma^2))
  static XFunction gauss_bump(int dim, double side, double amp, std::vector<double> center,
                              double sigma) {
    XFunction f(Kind::GaussBump, dim, side);
    require(int(center.size()) == dim, "x-function gauss_bump: center size != dim");
    require(sigma > 0.0, "x-function gauss_bump: sigma must be positive");
    f.p0_ = amp;
    f.p1_ = sigma;
    f.vec_ = std::move(center);
    return f;
  }

  int dim() const noexcept { return dim_; }
  double side() const noexcept { return side_; }
  Kind kind() const noexcept { return kind_; }

  double eval(std::span<const double> x) const noexcept {
    switch (kind_) {
      case Kind::Constant:
        return p0_;
      case Kind::Linear: {
        double v = p0_;
        for (int a = 0; a < dim_; ++a) v += vec_[a] * x[a] / side_;
        return v;
      }
      case Kind::CosSum:
        return p0_ * std::cos(arg(x));
      case Kind::TanhRamp:
        return p0_ * std::tanh(p1_ * (x[axis_] / side_ - p2_));
      case Kind::GaussBump:
        return p0_ * std::exp(-0.5 * sq_dist(x) / (p1_ * p1_));
    }
    return 0.0;
  }

  // Mixed partial over the axes set in `mask` (each axis at most once).
  double partial(std::span<const double> x, std::uint32_t mask) const noexcept {
    if (mask == 0) return eval(x);
    int order = 0;
    for (std::uint32_t m = mask; m; m >>= 1) order += int(m & 1u);
    switch (kind_) {
      case Kind::Constant:
        return 0.0;
      case Kind::Linear: {
        if (order > 1) return 0.0;
        int a = first_axis(mask);
        return vec_[a] / side_;
      }
      case Kind::CosSum: {
        double coef = p0_;
        for (int a = 0; a < dim_; ++a)
          if (mask & (1u << a)) coef *= kPi * vec_[a] / side_;
        return coef * std::cos(arg(x) + 0.5 * kPi * order);
      }
      case Kind::TanhRamp: {
        if (mask != (1u << axis_)) return 0.0;
        double t = std::tanh(p1_ * (x[axis_] / side_ - p2_));
        return p0_ * p1_ / side_ * (1.0 - t * t);
      }
      case Kind::GaussBump: {
        double coef = p0_;
        double s2 = p1_ * p1_;
        for (int a = 0; a < dim_; ++a)
          if (mask & (1u << a)) coef *= -(x[a] / side_ - vec_[a]) / (s2 * side_);
        return coef * std::exp(-0.5 * sq_dist(x) / s2);
      }
    }
    return 0.0;
  }

  double sup_abs() const noexcept {
    switch (kind_) {
      case Kind::Constant:
        return std::fabs(p0_);
      case Kind::Linear: {
        double v = std::fabs(p0_);
        double pos = p0_, neg = p0_;
        for (double a : vec_) {
          if (a > 0) pos += a; else neg += a;
        }
        return std::max({v, std::fabs(pos), std::fabs(neg)});
      }
      case Kind::CosSum:
        return std::fabs(p0_);
      case Kind::TanhRamp: {
        double lo = std::fabs(std::tanh(p1_ * (0.0 - p2_)));
        double hi = std::fabs(std::tanh(p1_ * (1.0 - p2_)));
        return std::fabs(p0_) * std::max(lo, hi);
      }
      case Kind::GaussBump:
        return std::fabs(p0_);
    }
    return 0.0;
  }

  // Upper bound on the Lipschitz constant in the l1 norm on x.
  double lipschitz_l1() const noexcept {
    switch (kind_) {
      case Kind::Constant:
        return 0.0;
      case Kind::Linear: {
        double m = 0.0;
        for (double a : vec_) m = std::max(m, std::fabs(a));
        return m / side_;
      }
      case Kind::CosSum: {
        double m = 0.0;
        for (double w : vec_) m = std::max(m, std::fabs(w));
        return std::fabs(p0_) * kPi * m / side_;
      }
      case Kind::TanhRamp:
        return std::fabs(p0_ * p1_) / side_;
      case Kind::GaussBump:
        return std::fabs(p0_) * std::exp(-0.5) / (p1_ * side_);
    }
    return 0.0;
  }

  // Upper bound on |partial over any `order` distinct axes|.
  double partial_bound(int order) const noexcept {
    if (order == 0) return sup_abs();
    switch (kind_) {
      case Kind::Constant:
        return 0.0;
      case Kind::Linear:
        return order == 1 ? lipschitz_l1() : 0.0;
      case Kind::CosSum: {
        double m = 0.0;
        for (double w : vec_) m = std::max(m, std::fabs(w));
        return std::fabs(p0_) * std::pow(kPi * m / side_, order);
      }
      case Kind::TanhRamp:
        return order == 1 ? std::fabs(p0_ * p1_) / side_ : 0.0;
      case Kind::GaussBump:
        return std::fabs(p0_) * std::pow(std::exp(-0.5) / (p1_ * side_), order);
    }
    return 0.0;
  }

  json to_json() const {
    switch (kind_) {
      case Kind::Constant:
        return {{"name", "constant"}, {"c", p0_}};
      case Kind::Linear:
        return {{"name", "linear"}, {"bias", p0_}, {"slope", vec_}};
      case Kind::CosSum:
        return {{"name", "cos_sum"}, {"amp", p0_}, {"w", vec_}, {"phase", p1_}};
      case Kind::TanhRamp:
        return {{"name", "tanh_ramp"}, {"amp", p0_}, {"slope", p1_},
                {"center", p2_},       {"axis", axis_}};
      case Kind::GaussBump:
        return {{"name", "gauss_bump"}, {"amp", p0_}, {"center", vec_}, {"sigma", p1_}};
    }
    return {};
  }

  static XFunction from_json(const json& j, int dim, double side) {
    require(j.is_object() && j.contains("name"), "x-function document needs a name");
    std::string name = j.at("name").get<std::string>();
    try {
      if (name == "constant") return constant(dim, side, j.at("c").get<double>());
      if (name == "linear")
        return linear(dim, side, j.at("bias").get<double>(),
                      j.at("slope").get<std::vector<double>>());
      if (name == "cos_sum")
        return cos_sum(dim, side, j.at("amp").get<double>(),
                       j.at("w").get<std::vector<double>>(),
                       j.value("phase", 0.0));
      if (name == "tanh_ramp")
        return tanh_ramp(dim, side, j.at("amp").get<double>(), j.at("slope").get<double>(),
                         j.at("center").get<double>(), j.value("axis", 0));
      if (name == "gauss_bump")
        return gauss_bump(dim, side, j.at("amp").get<double>(),
                          j.at("center").get<std::vector<double>>(),
                          j.at("sigma").get<double>());
    } catch (const json::exception& e) {
      throw SpecError("x-function '" + name + "': " + e.what());
    }
    throw SpecError("unknown x-function catalog name: " + name);
  }

 private:
  XFunction(Kind k, int dim, double side) : kind_(k), dim_(dim), side_(side) {
    require(dim >= 1, "x-function: dim must be positive");
    require(side > 0.0, "x-function: side must be positive");
  }

  static int first_axis(std::uint32_t mask) noexcept {
    int a = 0;
    while (!(mask & 1u)) {
      mask >>= 1;
      ++a;
    }
    return a;
  }

  double arg(std::span<const double> x) const noexcept {
    double s = 0.0;
    for (int a = 0; a < dim_; ++a) s += vec_[a] * x[a] / side_;
    return kPi * s + p1_;
  }

  double sq_dist(std::span<const double> x) const noexcept {
    double s = 0.0;
    for (int a = 0; a < dim_; ++a) {
      double t = x[a] / side_ - vec_[a];
      s += t * t;
    }
    return s;
  }

  static constexpr double kPi = 3.14159265358979323846;

  Kind kind_;
  int dim_;
  double side_;
  double p0_ = 0.0, p1_ = 0.0, p2_ = 0.0;
  int axis_ = 0;
  std::vector<double> vec_;
};

// Functions of the moment vector y = (pairings with h). These carry the
// state dependence of the coefficient.
class YFunction {
 public:
  enum class Kind { Constant, AffineClamped, TanhSquashed };

  static YFunction constant(double c) {
    YFunction f(Kind::Constant);
    f.p0_ = c;
    return f;
  }
  static YFunction affine_clamped(double bias, std::vector<double> coeffs, double clamp) {
    YFunction f(Kind::AffineClamped);
    require(clamp > 0.0, "y-function affine_clamped: clamp must be positive");
    f.p0_ = bias;
    f.p1_ = clamp;
    f.vec_ = std::move(coeffs);
    return f;
  }
  static YFunction tanh_squashed(double amp, double bias, std::vector<double> coeffs) {
    YFunction f(Kind::TanhSquashed);
    f.p0_ = amp;
    f.p1_ = bias;
    f.vec_ = std::move(coeffs);
    return f;
  }

  double eval(std::span<const double> y) const noexcept {
    switch (kind_) {
      case Kind::Constant:
        return p0_;
      case Kind::AffineClamped: {
        double v = p0_ + dot(y);
        if (v > p1_) return p1_;
        if (v < -p1_) return -p1_;
        return v;
      }
      case Kind::TanhSquashed:
        return p0_ * std::tanh(p1_ + dot(y));
    }
    return 0.0;
  }

  double sup_abs() const noexcept {
    switch (kind_) {
      case Kind::Constant:
        return std::fabs(p0_);
      case Kind::AffineClamped:
        return p1_;
      case Kind::TanhSquashed:
        return std::fabs(p0_);
    }
    return 0.0;
  }

  // Lipschitz bound in the l1 norm on y.
  double lipschitz_l1() const noexcept {
    double m = 0.0;
    for (double c : vec_) m = std::max(m, std::fabs(c));
    switch (kind_) {
      case Kind::Constant:
        return 0.0;
      case Kind::AffineClamped:
        return m;
      case Kind::TanhSquashed:
        return std::fabs(p0_) * m;
    }
    return 0.0;
  }

  json to_json() const {
    switch (kind_) {
      case Kind::Constant:
        return {{"name", "constant"}, {"c", p0_}};
      case Kind::AffineClamped:
        return {{"name", "affine_clamped"}, {"bias", p0_}, {"coeffs", vec_}, {"clamp", p1_}};
      case Kind::TanhSquashed:
        return {{"name", "tanh_squashed"}, {"amp", p0_}, {"bias", p1_}, {"coeffs", vec_}};
    }
    return {};
  }

  static YFunction from_json(const json& j, int n_moments) {
    require(j.is_object() && j.contains("name"), "y-function document needs a name");
    std::string name = j.at("name").get<std::string>();
    auto coeffs = [&](const char* key) {
      auto v = j.at(key).get<std::vector<double>>();
      require(int(v.size()) == n_moments, "y-function '" + name + "': coeff size != |h|");
      return v;
    };
    try {
      if (name == "constant") return constant(j.at("c").get<double>());
      if (name == "affine_clamped")
        return affine_clamped(j.at("bias").get<double>(), coeffs("coeffs"),
                              j.at("clamp").get<double>());
      if (name == "tanh_squashed")
        return tanh_squashed(j.at("amp").get<double>(), j.value("bias", 0.0),
                             coeffs("coeffs"));
    } catch (const json::exception& e) {
      throw SpecError("y-function '" + name + "': " + e.what());
    }
    throw SpecError("unknown y-function catalog name: " + name);
  }

 private:
  explicit YFunction(Kind k) : kind_(k) {}

  double dot(std::span<const double> y) const noexcept {
    double s = 0.0;
    std::size_t n = std::min(y.size(), vec_.size());
    for (std::size_t i = 0; i < n; ++i) s += vec_[i] * y[i];
    return s;
  }

  Kind kind_;
  double p0_ = 0.0, p1_ = 0.0;
  std::vector<double> vec_;
};

// Mass cutoff: 1 on [c_lo, c_hi], linear down to 0 at the ends of [0, 5],
// 0 outside. Keeps the coefficient inert when the total mass leaves the
// admissible window.
struct Cutoff {
  double c_lo = 0.25;
  double c_hi = 4.0;
  static constexpr double kSupportHi = 5.0;

  void validate() const {
    require(c_lo > 0.0 && c_hi > c_lo && c_hi < kSupportHi,
            "cutoff: need 0 < c_lo < c_hi < 5");
  }

  double eval(double y1) const noexcept {
    if (y1 <= 0.0 || y1 >= kSupportHi) return 0.0;
    if (y1 < c_lo) return y1 / c_lo;
    if (y1 <= c_hi) return 1.0;
    return (kSupportHi - y1) / (kSupportHi - c_hi);
  }

  double slope_bound() const noexcept {
    return std::max(1.0 / c_lo, 1.0 / (kSupportHi - c_hi));
  }

  json to_json() const { return {{"c_lo", c_lo}, {"c_hi", c_hi}}; }

  static Cutoff from_json(const json& j) {
    Cutoff c;
    if (j.is_object()) {
      c.c_lo = j.value("c_lo", c.c_lo);
      c.c_hi = j.value("c_hi", c.c_hi);
    }
    c.validate();
    return c;
  }
};

}  // namespace mvsde
