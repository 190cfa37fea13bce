#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace mvsde {

// Compensated summation; long reductions keep roundoff near one ulp.
class KahanSum {
 public:
  void add(double x) noexcept {
    double y = x - c_;
    double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double get() const noexcept { return s_; }
  void reset() noexcept { s_ = 0.0; c_ = 0.0; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

inline double kahan_total(std::span<const double> xs) noexcept {
  KahanSum s;
  for (double x : xs) s.add(x);
  return s.get();
}

inline double kahan_dot(std::span<const double> a, std::span<const double> b) noexcept {
  KahanSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
  return s.get();
}

// Streaming mean / standard error over sample values.
class MeanAccumulator {
 public:
  void add(double x) noexcept {
    sum_.add(x);
    sumsq_.add(x * x);
    ++n_;
  }
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return n_ ? sum_.get() / double(n_) : 0.0; }
  double variance() const noexcept {
    if (n_ < 2) return 0.0;
    double m = mean();
    double v = (sumsq_.get() - double(n_) * m * m) / double(n_ - 1);
    return v > 0.0 ? v : 0.0;
  }
  double standard_error() const noexcept {
    return n_ ? std::sqrt(variance() / double(n_)) : 0.0;
  }

 private:
  KahanSum sum_, sumsq_;
  std::size_t n_ = 0;
};

class RunningMax {
 public:
  void add(double x) noexcept {
    if (x > v_) v_ = x;
  }
  double get() const noexcept { return v_; }

 private:
  double v_ = -std::numeric_limits<double>::infinity();
};

inline double rel_diff(double a, double b) noexcept {
  double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
  return std::fabs(a - b) / scale;
}

}  // namespace mvsde
