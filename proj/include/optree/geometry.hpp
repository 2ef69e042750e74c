#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "optree/errors.hpp"

namespace optree {

// Default per-dimension refinement cap. Interval widths stay exactly
// representable in double up to 2^-40.
inline constexpr int kDimCapDefault = 40;

// Binary code of a dyadic interval in one dimension. The digits b1..bk,
// read as the integer s, encode [s/2^k, (s+1)/2^k). len == 0 is the whole
// unit interval.
struct DimCode {
  std::uint64_t bits = 0;
  int len = 0;

  double lower() const;
  double upper() const;
  double mid() const;

  bool operator==(const DimCode&) const = default;
};

// A dyadic hyperrectangle in [0,1]^p, identified by one DimCode per
// dimension. Regions compare and hash through their canonical text code;
// bounds are derived values.
class Region {
 public:
  Region() = default;
  explicit Region(std::vector<DimCode> dims) : dims_(std::move(dims)) {}

  // The root region [0,1]^p.
  static Region root(int p);

  int dim() const { return static_cast<int>(dims_.size()); }
  // Total refinement level: sum of code lengths over dimensions.
  int level() const;

  const DimCode& code(int j) const { return dims_[static_cast<size_t>(j)]; }
  double lower(int j) const { return dims_[static_cast<size_t>(j)].lower(); }
  double upper(int j) const { return dims_[static_cast<size_t>(j)].upper(); }
  double mid(int j) const { return dims_[static_cast<size_t>(j)].mid(); }

  // Exactly 2^-level(); every width is a power of two.
  double volume() const;
  double log_volume() const;

  bool splittable(int j, int dim_cap = kDimCapDefault) const;

  // Children at the midpoint of dimension j: left is {t_j < mid}, right is
  // the set complement (a point exactly at the midpoint belongs right).
  std::pair<Region, Region> split(int j, int dim_cap = kDimCapDefault) const;
  Region child(int j, int side, int dim_cap = kDimCapDefault) const;

  // Membership under the split convention. Regions are half-open on the
  // upper side except against the boundary of the unit cube, so every
  // x in [0,1]^p belongs to exactly one region of any partition.
  bool contains(const double* x) const;

  // Canonical ASCII text code: p segments joined by '|', each a 0/1 digit
  // string or 'e' for the empty code. Used as the cache key everywhere.
  std::string encode() const;
  // Accepts 'e' or the UTF-8 epsilon for empty segments.
  static Region decode(std::string_view code);

  bool operator==(const Region& o) const { return dims_ == o.dims_; }

 private:
  std::vector<DimCode> dims_;
};

// The binary midpoint scheme: p candidate splits per region, two children
// each. Carries the per-dimension refinement cap.
struct PartitionScheme {
  int p = 1;
  int dim_cap = kDimCapDefault;

  int candidate_splits() const { return p; }
  int children_per_split() const { return 2; }
};

// Number of distinct regions at exactly `level`: C(level+p-1, level) * 2^level.
// Throws ResourceError on 64-bit overflow.
std::uint64_t count_regions(int level, int p);

// Sum of count_regions(i, p) for i = 0..level.
std::uint64_t count_regions_cumulative(int level, int p);

}  // namespace optree
