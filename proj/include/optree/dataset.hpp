#pragma once

#include <array>
#include <string>
#include <vector>

#include "optree/geometry.hpp"

namespace optree {

// Per-dimension affine map raw -> unit: u = raw * scale + offset.
struct Transform {
  std::vector<double> scale;
  std::vector<double> offset;

  int dim() const { return static_cast<int>(scale.size()); }
  static Transform identity(int p);
  void to_unit(const double* raw, double* unit) const;
  void to_data(const double* unit, double* raw) const;
  // log |du/dx| = sum_j log scale_j; densities on the unit cube pick up
  // exp(log_jacobian) when reported in data units.
  double log_jacobian() const;
};

// Samples rescaled into [0,1]^p together with the transform that got them
// there. Immutable after construction.
class SampleSet {
 public:
  // Min-max rescale per dimension. Constant columns are padded to width
  // 1e-9 * max(1, |value|) so the transform stays invertible.
  static SampleSet ingest(const std::vector<double>& raw, int n, int p);

  // Rescale with an explicit bounding box instead of the empirical range
  // (for comparability across datasets). Throws DataError when a sample
  // falls outside the box.
  static SampleSet ingest_with_box(const std::vector<double>& raw, int n, int p,
                                   const std::vector<double>& lo,
                                   const std::vector<double>& hi);

  int size() const { return n_; }
  int dim() const { return p_; }
  const Transform& transform() const { return tf_; }
  // Row i, coordinate j, already in [0,1].
  double at(int i, int j) const { return unit_[static_cast<size_t>(i) * p_ + j]; }
  const double* row(int i) const { return unit_.data() + static_cast<size_t>(i) * p_; }

  std::vector<int> all_indices() const;

 private:
  SampleSet(std::vector<double> unit, int n, int p, Transform tf);

  int n_ = 0, p_ = 0;
  std::vector<double> unit_;
  Transform tf_;
};

// Sample counts of the 2p children of one region, plus the child member
// lists, produced by a single pass over the parent's members.
struct SplitCounts {
  std::array<int, 2> count{0, 0};
  std::array<std::vector<int>, 2> members;
};

// For every candidate split j of `region`, counts and membership of the two
// children. Throws InternalError if a member lies outside the region.
std::vector<SplitCounts> count_children(const Region& region, const std::vector<int>& members,
                                        const SampleSet& samples);

// CSV ingestion: one row per sample, numeric columns, optional header line,
// '#' comment lines skipped. Throws ParseError / DataError.
struct CsvMatrix {
  std::vector<double> values;  // row-major
  int rows = 0;
  int cols = 0;
  std::vector<std::string> header;  // empty if none
};
CsvMatrix read_csv(const std::string& path, char delimiter = ',');
void write_csv(const std::string& path, const std::vector<double>& values, int rows, int cols,
               const std::vector<std::string>& header, char delimiter = ',');

}  // namespace optree
