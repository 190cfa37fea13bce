#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvsde/common.hpp"

namespace mvsde {

inline constexpr int kDefaultMaxLevel = 12;

// Dyadic box partition of [0, side]^dim. A cell at refinement level L has
// width side / 2^L per axis; cells are ordered lexicographically by per-axis
// index with axis 0 most significant, and the lower corner is the
// representative point. The type is a value: cells are derived from the
// index arithmetic, never stored.
class Partition {
 public:
  Partition(int dim, double side, int level, int max_level = kDefaultMaxLevel)
      : dim_(dim), side_(side), level_(level), max_level_(max_level) {
    require(dim >= 1 && dim <= 6, "partition: dim must be in [1, 6]");
    require(side > 0.0, "partition: side must be positive");
    require(level >= 0, "partition: level must be nonnegative");
    require(level <= max_level_, "partition: level " + std::to_string(level) +
                                     " exceeds max level " + std::to_string(max_level_));
    require(dim * level <= 24, "partition: 2^(dim*level) cells exceed the size cap");
    per_axis_ = std::int64_t(1) << level_;
    n_cells_ = 1;
    for (int a = 0; a < dim_; ++a) n_cells_ *= per_axis_;
  }

  int dim() const noexcept { return dim_; }
  double side() const noexcept { return side_; }
  int level() const noexcept { return level_; }
  int max_level() const noexcept { return max_level_; }
  std::int64_t cells_per_axis() const noexcept { return per_axis_; }
  std::int64_t n_cells() const noexcept { return n_cells_; }
  double cell_width() const noexcept { return side_ / double(per_axis_); }
  double cell_volume() const noexcept { return std::pow(cell_width(), dim_); }

  void cell_coords(std::int64_t index, std::span<std::int64_t> out) const {
    for (int a = dim_ - 1; a >= 0; --a) {
      out[a] = index % per_axis_;
      index /= per_axis_;
    }
  }

  std::int64_t cell_index(std::span<const std::int64_t> coords) const {
    std::int64_t idx = 0;
    for (int a = 0; a < dim_; ++a) idx = idx * per_axis_ + coords[a];
    return idx;
  }

  // Representative point of a cell.
  std::vector<double> lower_corner(std::int64_t index) const {
    std::vector<std::int64_t> c(dim_);
    cell_coords(index, c);
    std::vector<double> x(dim_);
    double w = cell_width();
    for (int a = 0; a < dim_; ++a) x[a] = double(c[a]) * w;
    return x;
  }

  Partition refined() const {
    require(level_ + 1 <= max_level_,
            "partition: refine past max level " + std::to_string(max_level_));
    return Partition(dim_, side_, level_ + 1, max_level_);
  }

  bool is_refinement_of(const Partition& coarse) const noexcept {
    return dim_ == coarse.dim_ && side_ == coarse.side_ && level_ >= coarse.level_;
  }

  // Index of the level-(level-1) cell containing a given cell.
  std::int64_t parent_of(std::int64_t index) const {
    require(level_ >= 1, "partition: level-0 cells have no parent");
    std::vector<std::int64_t> c(dim_);
    cell_coords(index, c);
    std::int64_t parent = 0;
    std::int64_t half = per_axis_ / 2;
    for (int a = 0; a < dim_; ++a) parent = parent * half + (c[a] >> 1);
    return parent;
  }

  // Ancestor index on a coarser partition of the same box.
  std::int64_t ancestor_of(std::int64_t index, const Partition& coarse) const {
    require(is_refinement_of(coarse), "partition: not a refinement of the coarse partition");
    int shift = level_ - coarse.level_;
    std::vector<std::int64_t> c(dim_);
    cell_coords(index, c);
    std::int64_t anc = 0;
    for (int a = 0; a < dim_; ++a) anc = anc * coarse.per_axis_ + (c[a] >> shift);
    return anc;
  }

  // Index of the cell containing x (the side==T face is folded into the last cell).
  std::int64_t locate(std::span<const double> x) const {
    std::int64_t idx = 0;
    double w = cell_width();
    for (int a = 0; a < dim_; ++a) {
      auto i = std::int64_t(std::floor(x[a] / w));
      if (i < 0) i = 0;
      if (i >= per_axis_) i = per_axis_ - 1;
      idx = idx * per_axis_ + i;
    }
    return idx;
  }

  bool contains(std::span<const double> x) const noexcept {
    for (int a = 0; a < dim_; ++a)
      if (x[a] < 0.0 || x[a] > side_) return false;
    return true;
  }

  bool operator==(const Partition& o) const noexcept {
    return dim_ == o.dim_ && side_ == o.side_ && level_ == o.level_;
  }

 private:
  int dim_;
  double side_;
  int level_;
  int max_level_;
  std::int64_t per_axis_;
  std::int64_t n_cells_;
};

// Lower corner of the level-`level` cell containing x: the coordinate
// snapping map used to make continuous data partition-measurable.
inline void snap_point(std::span<const double> x, double side, int level,
                       std::span<double> out) {
  double w = side / double(std::int64_t(1) << level);
  for (std::size_t a = 0; a < x.size(); ++a) {
    auto i = std::int64_t(std::floor(x[a] / w));
    auto last = (std::int64_t(1) << level) - 1;
    if (i < 0) i = 0;
    if (i > last) i = last;
    out[a] = double(i) * w;
  }
}

}  // namespace mvsde
