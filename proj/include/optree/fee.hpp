#pragma once

#include <random>
#include <string>
#include <vector>

#include "optree/qp.hpp"
#include "optree/triangulation.hpp"

namespace optree {

// Builds the penalized least-squares program for the continuous
// piecewise-linear density: fidelity to the per-simplex masses of the
// piecewise-constant estimate (weights mu^-2) plus lambda times the squared
// top-face/bottom-face volume ratios, under unit total mass and c >= 0.
QpProblem assemble_qp(const Triangulation& tri, double lambda);

// Continuous piecewise-linear density over a conforming triangulation,
// nonnegative by construction (c >= 0). Immutable after construction.
class FeeDensity {
 public:
  FeeDensity() = default;
  FeeDensity(Triangulation tri, std::vector<double> coeffs, Transform tf, double lambda);

  int dim() const { return tri_.p; }
  const Triangulation& triangulation() const { return tri_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  double lambda() const { return lambda_; }
  const Transform& transform() const { return tf_; }

  // Density in data units (0 outside the support box).
  double eval(const double* x) const;
  double eval(const std::vector<double>& x) const;
  double eval_unit(const double* u) const;

  std::vector<double> sample(std::mt19937_64& rng, int m) const;

  // Exact integral over the cube: sum_j mu_j/(p+1) * sum of vertex values.
  double integral() const;

  // Penalty values at the current coefficients (fit-time objects only;
  // fidelity needs the leaf densities, which the file format drops).
  double smoothness_penalty() const;
  double fidelity_penalty() const;

  std::string to_json() const;
  static FeeDensity from_json(const std::string& text);
  void save(const std::string& path) const;
  static FeeDensity load(const std::string& path);

 private:
  struct LocNode {
    std::vector<double> lo, hi;
    int child[2] = {-1, -1};
    int begin = 0, end = 0;  // simplex id span for leaves
  };

  void build_eval_data();
  int build_loc_node(int begin, int end, int depth);
  int locate(const double* u) const;
  double barycentric_value(int s, const double* u, double tol) const;

  Triangulation tri_;
  std::vector<double> coeffs_;
  Transform tf_;
  double lambda_ = 0.0;

  // Point-location acceleration: a bounding-volume tree over simplices and
  // per-simplex inverse edge matrices for barycentric coordinates.
  std::vector<double> inv_edges_;  // simplex count x p x p
  std::vector<int> loc_ids_;
  std::vector<LocNode> loc_nodes_;
};

struct FeeFitResult {
  FeeDensity density;
  QpResult qp;
  double lumped_objective = 0.0;  // objective of the feasible initial guess
};

// balance -> triangulate -> assemble -> solve.
FeeFitResult fee_fit(const HmapTree& tree, double lambda = 1e-3, double tol = 1e-8,
                     int max_iter = 200000);

}  // namespace optree
