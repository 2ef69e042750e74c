#pragma once

#include <vector>

#include "optree/pcdensity.hpp"

namespace optree {

// Refines the tree's leaves until any two leaves whose closures touch
// differ by at most one refinement level in every dimension. New children
// inherit the parent's density, so the piecewise-constant function is
// unchanged. Throws ResourceError when grading would exceed dim_cap.
HmapTree balance_partition(const HmapTree& tree, int dim_cap = kDimCapDefault);

// A conforming simplicial cover of the unit cube in which every leaf of the
// graded partition is triangulated by its own subset of simplices.
struct Triangulation {
  int p = 0;
  std::vector<double> vertices;   // vertex_count x p
  std::vector<int> simplices;     // simplex_count x (p+1) vertex ids
  std::vector<int> simplex_leaf;  // owning leaf per simplex
  std::vector<Region> leaves;
  std::vector<double> leaf_log_dens;
  std::vector<double> volumes;  // per simplex

  int vertex_count() const { return static_cast<int>(vertices.size()) / p; }
  int simplex_count() const { return static_cast<int>(simplex_leaf.size()); }
  const double* vertex(int i) const { return vertices.data() + static_cast<size_t>(i) * p; }
  const int* simplex(int j) const {
    return simplices.data() + static_cast<size_t>(j) * (p + 1);
  }
};

// Center-fan construction over the face complex of a graded partition.
// Requires a balanced tree (see balance_partition); the conformity audit
// runs before returning and raises InternalError on any defect.
Triangulation triangulate(const HmapTree& balanced);

// Volume of a p-simplex from its p+1 vertices ((p+1) x p, row-major):
// |det(a_2 - a_1, ..., a_{p+1} - a_1)| / p!. Throws on degeneracy.
double simplex_volume(const std::vector<double>& verts, int p);

// Integral over a simplex of the piecewise-linear interpolant with vertex
// values c: volume / (p+1) * sum(c).
double simplex_integral(double volume, const std::vector<double>& c);

// Squared volume of the graph ("top face") of the interpolant over a
// simplex, as a quadratic in c:
//   mu*(c)^2 = mu^2 + sum_t (minors[t] . c)^2 / (p!)^2.
struct TopFaceForm {
  double mu_sq = 0.0;                       // constant part: mu(Delta)^2
  double inv_pfact = 1.0;                   // 1 / p!
  std::vector<std::vector<double>> minors;  // p rows of length p+1
};
TopFaceForm top_face_form(const std::vector<double>& verts, int p);
double top_face_sq(const std::vector<double>& verts, int p, const std::vector<double>& c);

// Checks volumes, the per-leaf exact cover, and face-to-face matching.
// Throws InternalError on the first violation.
void audit_conformity(const Triangulation& tri);

}  // namespace optree
