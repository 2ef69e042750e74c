#include "optree/qp.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace optree {

namespace {

// KKT residual of (c, nu) for the original problem. Box duals are implied
// by stationarity: g = Pc + r + nu*a must vanish on free coordinates and
// be nonnegative on active ones. The stationarity part is measured
// relative to the gradient scale so that badly scaled objectives are
// judged fairly.
double kkt_residual(const QpProblem& qp, const Eigen::VectorXd& c, double nu) {
  Eigen::VectorXd pc = qp.P * c;
  Eigen::VectorXd g = pc + qp.r + nu * qp.a;
  // Backward-error scale: |P||c| before cancellation, so that evaluation
  // noise on badly scaled objectives does not mask convergence.
  Eigen::VectorXd abs_pc = Eigen::VectorXd::Zero(c.size());
  for (int col = 0; col < qp.P.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.P, col); it; ++it)
      abs_pc[it.row()] += std::abs(it.value()) * std::abs(c[it.col()]);
  double scale = std::max({1.0, abs_pc.maxCoeff(), qp.r.cwiseAbs().maxCoeff(),
                           std::abs(nu) * qp.a.cwiseAbs().maxCoeff()});
  double res = std::abs(qp.a.dot(c) - 1.0);
  for (int i = 0; i < c.size(); ++i) {
    res = std::max(res, -std::min(0.0, c[i]));
    double gi = g[i] / scale;
    if (c[i] > 1e-10)
      res = std::max(res, std::abs(gi));
    else
      res = std::max(res, -std::min(0.0, gi));
  }
  return res;
}

struct Scaled {
  Eigen::SparseMatrix<double> P;
  Eigen::VectorXd r;
  Eigen::VectorXd aeq;  // unit norm
  double beq = 0.0;
  Eigen::VectorXd d;  // c_orig = d .* c_scaled
  double anorm = 1.0;
};

Scaled scale_problem(const QpProblem& qp) {
  const int n = qp.size();
  Scaled s;
  s.d.resize(n);
  for (int i = 0; i < n; ++i) {
    double pii = qp.P.coeff(i, i);
    s.d[i] = pii > 1e-300 ? 1.0 / std::sqrt(pii) : 1.0;
  }
  s.P = s.d.asDiagonal() * qp.P * s.d.asDiagonal();
  s.r = s.d.asDiagonal() * qp.r;
  Eigen::VectorXd da = s.d.asDiagonal() * qp.a;
  s.anorm = da.norm();
  if (!(s.anorm > 0.0)) throw ConfigError("solve_qp: zero equality row");
  s.aeq = da / s.anorm;
  s.beq = 1.0 / s.anorm;
  return s;
}

// Exact solve on a guessed active set: fix c_i = 0 there, solve the
// reduced equality-constrained system, verify full KKT conditions.
bool polish(const QpProblem& qp, const std::vector<bool>& active, QpResult& out) {
  const int n = qp.size();
  std::vector<int> free_ids;
  for (int i = 0; i < n; ++i)
    if (!active[static_cast<size_t>(i)]) free_ids.push_back(i);
  const int nf = static_cast<int>(free_ids.size());
  if (nf == 0) return false;

  std::vector<int> pos(static_cast<size_t>(n), -1);
  for (int k = 0; k < nf; ++k) pos[static_cast<size_t>(free_ids[static_cast<size_t>(k)])] = k;
  std::vector<Eigen::Triplet<double>> trips;
  for (int col = 0; col < qp.P.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(qp.P, col); it; ++it) {
      int pr = pos[static_cast<size_t>(it.row())];
      int pc = pos[static_cast<size_t>(it.col())];
      if (pr >= 0 && pc >= 0) trips.emplace_back(pr, pc, it.value());
    }
  }
  for (int k = 0; k < nf; ++k) {
    double av = qp.a[free_ids[static_cast<size_t>(k)]];
    trips.emplace_back(nf, k, av);
    trips.emplace_back(k, nf, av);
  }
  Eigen::SparseMatrix<double> kkt(nf + 1, nf + 1);
  kkt.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(kkt);
  if (lu.info() != Eigen::Success) return false;
  Eigen::VectorXd rhs(nf + 1);
  for (int k = 0; k < nf; ++k) rhs[k] = -qp.r[free_ids[static_cast<size_t>(k)]];
  rhs[nf] = 1.0;
  Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) return false;
  sol += lu.solve(Eigen::VectorXd(rhs - kkt * sol));  // one refinement step
  if (!sol.allFinite()) return false;

  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < nf; ++k) c[free_ids[static_cast<size_t>(k)]] = sol[k];
  double nu = sol[nf];
  for (int k = 0; k < nf; ++k)
    if (c[free_ids[static_cast<size_t>(k)]] < -1e-9) return false;
  Eigen::VectorXd g = qp.P * c + qp.r + nu * qp.a;
  for (int i = 0; i < n; ++i)
    if (active[static_cast<size_t>(i)] && g[i] < -1e-9) return false;

  for (int i = 0; i < n; ++i) c[i] = std::max(0.0, c[i]);
  double res = kkt_residual(qp, c, nu);
  if (out.c.size() == 0 || res < out.kkt_residual) {
    out.c = c;
    out.kkt_residual = res;
    out.objective = qp.objective(c);
    out.polished = true;
  }
  return true;
}

}  // namespace

QpResult solve_qp(const QpProblem& qp, double tol, int max_iter,
                  const Eigen::VectorXd* warm_start) {
  const int n = qp.size();
  if (n == 0) throw ConfigError("solve_qp: empty problem");
  if (qp.P.rows() != n || qp.P.cols() != n || qp.a.size() != n)
    throw ConfigError("solve_qp: inconsistent dimensions");

  Scaled s = scale_problem(qp);
  const double sigma = 1e-6;
  const double alpha = 1.6;
  const double rho_eq_factor = 1e3;
  double rho_box = 0.1;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  if (warm_start && warm_start->size() == n)
    x = s.d.cwiseInverse().asDiagonal() * (*warm_start);
  Eigen::VectorXd z(n + 1), y = Eigen::VectorXd::Zero(n + 1);
  z[0] = s.beq;
  z.tail(n) = x.cwiseMax(0.0);

  Eigen::SparseMatrix<double> eye(n, n);
  eye.setIdentity();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  Eigen::VectorXd kinv_a;
  double sm_denom = 0.0;
  double rho_factored = -1.0;

  auto refactor = [&] {
    Eigen::SparseMatrix<double> mat = s.P + (sigma + rho_box) * eye;
    ldlt.compute(mat);
    if (ldlt.info() != Eigen::Success)
      throw InternalError("solve_qp: factorization failed on a PSD matrix");
    kinv_a = ldlt.solve(s.aeq);
    sm_denom = 1.0 + rho_eq_factor * rho_box * s.aeq.dot(kinv_a);
    rho_factored = rho_box;
  };
  refactor();

  auto solve_m = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd u = ldlt.solve(b);
    double corr = rho_eq_factor * rho_box * s.aeq.dot(u) / sm_denom;
    return Eigen::VectorXd(u - corr * kinv_a);
  };

  QpResult best;
  best.kkt_residual = std::numeric_limits<double>::infinity();

  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const double rho_eq = rho_eq_factor * rho_box;
    Eigen::VectorXd rhs = sigma * x - s.r;
    rhs += s.aeq * (rho_eq * z[0] - y[0]);
    rhs += rho_box * z.tail(n) - y.tail(n);
    Eigen::VectorXd xt = solve_m(rhs);
    double zt0 = s.aeq.dot(xt);

    Eigen::VectorXd z_prev = z;
    z[0] = s.beq;  // projection of the equality coordinate
    Eigen::VectorXd wb = alpha * xt + (1.0 - alpha) * z_prev.tail(n) + y.tail(n) / rho_box;
    z.tail(n) = wb.cwiseMax(0.0);
    y[0] += rho_eq * (alpha * zt0 + (1.0 - alpha) * z_prev[0] - z[0]);
    y.tail(n) += rho_box * (alpha * xt + (1.0 - alpha) * z_prev.tail(n) - z.tail(n));
    x = alpha * xt + (1.0 - alpha) * x;

    if (iter % 25 == 24 || iter == max_iter - 1) {
      double rp = std::abs(s.aeq.dot(x) - z[0]);
      rp = std::max(rp, (x - z.tail(n)).cwiseAbs().maxCoeff());
      double rp_scale = std::max(1.0, x.cwiseAbs().maxCoeff());
      Eigen::VectorXd dual = s.P * x + s.r + s.aeq * y[0] + y.tail(n);
      double rd = dual.cwiseAbs().maxCoeff();
      double rd_scale =
          std::max({1.0, (s.P * x).cwiseAbs().maxCoeff(), s.r.cwiseAbs().maxCoeff()});

      Eigen::VectorXd c = s.d.asDiagonal() * z.tail(n);
      double nu = y[0] / s.anorm;
      double res = kkt_residual(qp, c, nu);
      if (res < best.kkt_residual) {
        best.c = c;
        best.kkt_residual = res;
        best.objective = qp.objective(c);
        best.iterations = iter + 1;
      }
      if (best.kkt_residual <= tol) break;

      if (rp <= 1e-6 * rp_scale && rd <= 1e-6 * rd_scale) {
        std::vector<bool> active(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
          active[static_cast<size_t>(i)] = z.tail(n)[i] <= 1e-12 && y.tail(n)[i] > 1e-12;
        QpResult pol = best;
        if (polish(qp, active, pol) && pol.kkt_residual < best.kkt_residual) {
          best = pol;
          best.iterations = iter + 1;
        }
        if (best.kkt_residual <= tol) break;
      }

      double ratio = std::sqrt((rp / rp_scale + 1e-16) / (rd / rd_scale + 1e-16));
      double rho_new = std::clamp(rho_box * ratio, 1e-6, 1e6);
      if (rho_new > 5.0 * rho_factored || rho_new < rho_factored / 5.0) {
        rho_box = rho_new;
        refactor();
      }
    }
  }

  if (best.kkt_residual > tol && best.c.size() > 0) {
    // Last-resort polish sweep over activity cutoffs.
    for (double cut : {1e-12, 1e-10, 1e-8, 1e-6}) {
      std::vector<bool> active(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) active[static_cast<size_t>(i)] = best.c[i] <= cut;
      QpResult pol = best;
      if (polish(qp, active, pol) && pol.kkt_residual < best.kkt_residual) best = pol;
      if (best.kkt_residual <= tol) break;
    }
  }

  if (best.kkt_residual > tol)
    throw QpIterationError("solve_qp: iteration cap " + std::to_string(max_iter) +
                               " reached with KKT residual " +
                               std::to_string(best.kkt_residual),
                           best);
  best.iterations = std::max(best.iterations, std::min(iter + 1, max_iter));
  return best;
}

}  // namespace optree
