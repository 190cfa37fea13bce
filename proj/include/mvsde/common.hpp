#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#define MVSDE_VERSION "0.1.0"

namespace mvsde {

// Bad input: unknown catalog names, inconsistent dimensions, constants that
// fail validation. Maps to exit code 2 at the tool level.
struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Breakdown during a run: NaN, mass below the admissible floor, invalid path
// data. Maps to exit code 3.
struct NumericalAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw SpecError(msg);
}

}  // namespace mvsde
