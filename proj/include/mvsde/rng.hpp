#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mvsde {

// Counter-based generator (Philox 4x32, 10 rounds). Each draw is a pure
// function of (seed, path, stream, index), so path streams can be consumed
// in any order across threads and still reproduce bit for bit.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t path, std::uint32_t stream = 0) noexcept
      : key_{std::uint32_t(seed & 0xffffffffu), std::uint32_t(seed >> 32)},
        path_lo_(std::uint32_t(path & 0xffffffffu)),
        path_hi_(std::uint32_t(path >> 32)),
        stream_(stream) {}

  std::uint32_t next_u32() noexcept {
    if (pos_ == 4) refill();
    return block_[pos_++];
  }

  std::uint64_t next_u64() noexcept {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // Uniform on (0, 1]; never zero, safe under log().
  double uniform() noexcept {
    return double((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double gaussian() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    have_spare_ = true;
    return r * std::cos(th);
  }

  // Knuth-style product method; fine for the small rates used here.
  std::uint32_t poisson(double lambda) noexcept {
    if (lambda <= 0.0) return 0;
    double limit = std::exp(-lambda);
    double p = 1.0;
    std::uint32_t k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static void round(std::array<std::uint32_t, 4>& c, std::uint32_t k0, std::uint32_t k1) noexcept {
    std::uint64_t p0 = std::uint64_t(kM0) * c[0];
    std::uint64_t p1 = std::uint64_t(kM1) * c[2];
    std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
    std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
  }

  void refill() noexcept {
    std::array<std::uint32_t, 4> c = {std::uint32_t(index_ & 0xffffffffu),
                                      std::uint32_t(index_ >> 32) ^ stream_,
                                      path_lo_, path_hi_};
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int r = 0; r < 10; ++r) {
      round(c, k0, k1);
      k0 += kW0;
      k1 += kW1;
    }
    block_ = c;
    pos_ = 0;
    ++index_;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint32_t path_lo_, path_hi_, stream_;
  std::uint64_t index_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mvsde
