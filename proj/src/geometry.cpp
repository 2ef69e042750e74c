#include "optree/geometry.hpp"

#include <cmath>
#include <numeric>

namespace optree {

namespace {
constexpr double kLn2 = 0.6931471805599453094;
}  // namespace

double DimCode::lower() const { return std::ldexp(static_cast<double>(bits), -len); }

double DimCode::upper() const { return std::ldexp(static_cast<double>(bits + 1), -len); }

double DimCode::mid() const { return std::ldexp(static_cast<double>(2 * bits + 1), -(len + 1)); }

Region Region::root(int p) {
  if (p < 1) throw ConfigError("Region::root: dimension must be >= 1");
  return Region(std::vector<DimCode>(static_cast<size_t>(p)));
}

int Region::level() const {
  int k = 0;
  for (const auto& d : dims_) k += d.len;
  return k;
}

double Region::volume() const { return std::ldexp(1.0, -level()); }

double Region::log_volume() const { return -static_cast<double>(level()) * kLn2; }

bool Region::splittable(int j, int dim_cap) const {
  return dims_[static_cast<size_t>(j)].len < dim_cap;
}

std::pair<Region, Region> Region::split(int j, int dim_cap) const {
  return {child(j, 0, dim_cap), child(j, 1, dim_cap)};
}

Region Region::child(int j, int side, int dim_cap) const {
  const auto& d = dims_[static_cast<size_t>(j)];
  if (d.len >= dim_cap) {
    throw ResourceError("split: depth cap " + std::to_string(dim_cap) +
                        " reached in dimension " + std::to_string(j + 1));
  }
  std::vector<DimCode> dims = dims_;
  dims[static_cast<size_t>(j)] = DimCode{(d.bits << 1) | static_cast<std::uint64_t>(side),
                                         d.len + 1};
  return Region(std::move(dims));
}

bool Region::contains(const double* x) const {
  for (size_t j = 0; j < dims_.size(); ++j) {
    const double lo = dims_[j].lower();
    const double hi = dims_[j].upper();
    if (x[j] < lo) return false;
    if (x[j] >= hi && !(hi == 1.0 && x[j] == 1.0)) return false;
  }
  return true;
}

std::string Region::encode() const {
  std::string out;
  for (size_t j = 0; j < dims_.size(); ++j) {
    if (j > 0) out.push_back('|');
    const auto& d = dims_[j];
    if (d.len == 0) {
      out.push_back('e');
    } else {
      for (int b = d.len - 1; b >= 0; --b)
        out.push_back((d.bits >> b) & 1u ? '1' : '0');
    }
  }
  return out;
}

Region Region::decode(std::string_view code) {
  std::vector<DimCode> dims;
  size_t seg_start = 0;
  int seg_index = 1;
  auto fail = [&](const std::string& what) {
    throw ParseError("region code: segment " + std::to_string(seg_index) + ": " + what);
  };
  for (size_t i = 0; i <= code.size(); ++i) {
    if (i < code.size() && code[i] != '|') continue;
    std::string_view seg = code.substr(seg_start, i - seg_start);
    if (seg.empty()) fail("empty segment (use 'e' for the whole interval)");
    if (seg == "e" || seg == "\xce\xb5") {
      dims.push_back(DimCode{});
    } else {
      DimCode d;
      for (char ch : seg) {
        if (ch != '0' && ch != '1') fail(std::string("invalid character '") + ch + "'");
        if (d.len >= 62) fail("segment longer than 62 digits");
        d.bits = (d.bits << 1) | static_cast<std::uint64_t>(ch == '1');
        ++d.len;
      }
      dims.push_back(d);
    }
    seg_start = i + 1;
    ++seg_index;
  }
  return Region(std::move(dims));
}

std::uint64_t count_regions(int level, int p) {
  if (level < 0 || p < 1) throw ConfigError("count_regions: need level >= 0, p >= 1");
  // C(level+p-1, level) with overflow checks, then shift by 2^level.
  std::uint64_t binom = 1;
  for (int i = 1; i <= p - 1; ++i) {
    std::uint64_t num = static_cast<std::uint64_t>(level) + static_cast<std::uint64_t>(i);
    std::uint64_t tmp;
    if (__builtin_mul_overflow(binom, num, &tmp))
      throw ResourceError("count_regions: 64-bit overflow");
    binom = tmp / static_cast<std::uint64_t>(i);  // exact: product of i consecutive ints
  }
  if (level >= 64) throw ResourceError("count_regions: 64-bit overflow");
  std::uint64_t shifted;
  if (__builtin_mul_overflow(binom, std::uint64_t{1} << level, &shifted))
    throw ResourceError("count_regions: 64-bit overflow");
  return shifted;
}

std::uint64_t count_regions_cumulative(int level, int p) {
  std::uint64_t total = 0;
  for (int i = 0; i <= level; ++i) {
    std::uint64_t c = count_regions(i, p);
    if (__builtin_add_overflow(total, c, &total))
      throw ResourceError("count_regions_cumulative: 64-bit overflow");
  }
  return total;
}

}  // namespace optree
