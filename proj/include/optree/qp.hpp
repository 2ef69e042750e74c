#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "optree/errors.hpp"

namespace optree {

// minimize 0.5 c'Pc + r'c + constant  subject to  a'c = 1,  c >= 0.
// P must be symmetric positive semidefinite.
struct QpProblem {
  Eigen::SparseMatrix<double> P;
  Eigen::VectorXd r;
  double constant = 0.0;
  Eigen::VectorXd a;

  int size() const { return static_cast<int>(r.size()); }
  double objective(const Eigen::VectorXd& c) const {
    return 0.5 * c.dot(P * c) + r.dot(c) + constant;
  }
};

struct QpResult {
  Eigen::VectorXd c;
  double objective = 0.0;
  int iterations = 0;
  double kkt_residual = 0.0;
  bool polished = false;
};

// Raised when the iteration cap is hit before the tolerance; carries the
// best iterate seen and its residual.
struct QpIterationError : ResourceError {
  QpIterationError(const std::string& msg, QpResult best_in)
      : ResourceError(msg), best(std::move(best_in)) {}
  QpResult best;
};

// Operator-splitting (ADMM) solver with diagonal scaling and an active-set
// polish; deterministic given identical inputs. `tol` bounds the KKT
// residual of the returned point.
QpResult solve_qp(const QpProblem& qp, double tol = 1e-8, int max_iter = 200000,
                  const Eigen::VectorXd* warm_start = nullptr);

}  // namespace optree
