#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "optree/dataset.hpp"
#include "optree/geometry.hpp"

namespace optree {

struct TreeNode {
  Region region;
  int split_dim = -1;  // -1 marks a leaf
  std::array<double, 2> theta{0.0, 0.0};
  std::array<int, 2> child{-1, -1};
  double mass = 0.0;      // probability mass of the subtree
  double log_dens = 0.0;  // leaf only: log density on the unit cube
};

// A fitted recursive-partition density: internal nodes carry the split
// dimension and the posterior-mean mass split, leaves carry log densities.
// Evaluation and sampling run in the original data units through the
// stored ingest transform. Immutable once finalized.
class HmapTree {
 public:
  HmapTree() = default;
  HmapTree(int p, Transform tf);

  int add_leaf(const Region& r, double mass);
  int add_split(const Region& r, int dim, std::array<double, 2> theta);
  void set_children(int node, int c0, int c1);
  // Fills leaf log densities and audits the structure. Must be called once
  // after building.
  void finalize();

  int dim() const { return p_; }
  const Transform& transform() const { return tf_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  std::vector<int> leaves() const;
  int leaf_count() const;
  // Maximum leaf level.
  int depth() const;

  // Density at a point in data units; 0 outside the support box.
  double eval(const double* x) const;
  double eval(const std::vector<double>& x) const;
  // Density at a point already in [0,1]^p, without the Jacobian factor.
  double eval_unit(const double* u) const;
  // Leaf node id containing a unit-cube point.
  int locate_unit(const double* u) const;

  // m samples in data units, deterministic given the generator state.
  std::vector<double> sample(std::mt19937_64& rng, int m) const;

  // Sum of leaf masses. With check=true, throws InternalError when the sum
  // strays from 1 beyond 1e-9 or any split's theta pair does not sum to 1.
  double total_mass(bool check = true) const;

  // Structural + mass audit; throws InternalError on violation.
  void check_integrity() const;

  std::string to_json() const;
  static HmapTree from_json(const std::string& text);
  void save(const std::string& path) const;
  static HmapTree load(const std::string& path);

  // Test hook: tamper with a node (invalidates integrity on purpose).
  TreeNode& mutable_node(int id) { return nodes_[static_cast<size_t>(id)]; }

 private:
  int p_ = 0;
  Transform tf_;
  std::vector<TreeNode> nodes_;
  bool finalized_ = false;
};

// True when the two trees have identical split dimensions and leaf regions.
bool structurally_equal(const HmapTree& a, const HmapTree& b);

// Leaf-set symmetric difference ratio: |A xor B| / max(|A|, |B|).
double leaf_symmetric_difference(const HmapTree& a, const HmapTree& b);

}  // namespace optree
