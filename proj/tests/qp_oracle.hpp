#pragma once

#include <Eigen/Dense>
#include <limits>

#include "optree/qp.hpp"

namespace testutil {

// Exhaustive active-set oracle for min 0.5c'Pc + r'c + const, a'c = 1,
// c >= 0, for small n: solve the stationarity system on every subset of
// free coordinates and keep the best primal-feasible candidate. The true
// optimum's active set is among the subsets, so the minimum over feasible
// candidates is the optimal objective.
inline double oracle_qp_objective(const optree::QpProblem& qp) {
  const int n = qp.size();
  Eigen::MatrixXd dense = Eigen::MatrixXd(qp.P);
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> free_ids;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) free_ids.push_back(i);
    const int nf = static_cast<int>(free_ids.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + 1, nf + 1);
    Eigen::VectorXd rhs(nf + 1);
    for (int i = 0; i < nf; ++i) {
      for (int k = 0; k < nf; ++k) kkt(i, k) = dense(free_ids[i], free_ids[k]);
      kkt(i, nf) = qp.a[free_ids[i]];
      kkt(nf, i) = qp.a[free_ids[i]];
      rhs[i] = -qp.r[free_ids[i]];
    }
    rhs[nf] = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    Eigen::VectorXd sol = lu.solve(rhs);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    bool feasible = true;
    for (int i = 0; i < nf; ++i) {
      c[free_ids[i]] = sol[i];
      feasible = feasible && sol[i] >= -1e-12;
    }
    if (!feasible) continue;
    for (int i = 0; i < nf; ++i) c[free_ids[i]] = std::max(0.0, c[free_ids[i]]);
    if (std::abs(qp.a.dot(c) - 1.0) > 1e-9) continue;
    best = std::min(best, qp.objective(c));
  }
  return best;
}

}  // namespace testutil
