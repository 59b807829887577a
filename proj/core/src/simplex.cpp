#include "csma/simplex.hpp"

#include <cmath>
#include <sstream>

#include "csma/errors.hpp"

namespace csma::lp {

namespace {

// Tableau layout: rows 0..m-1 are constraints, row m is the reduced-cost row
// (stores -c for maximisation), column n holds the right-hand side.
class Tableau {
 public:
  Tableau(Eigen::MatrixXd t, std::vector<int> basis, double tol)
      : t_(std::move(t)), basis_(std::move(basis)), tol_(tol) {}

  // Runs Bland's-rule pivots over columns [0, usable). Returns false when unbounded.
  bool optimize(int usable, int max_pivots, int& pivots) {
    const Eigen::Index m = t_.rows() - 1;
    const Eigen::Index rhs = t_.cols() - 1;
    while (true) {
      int enter = -1;
      for (int j = 0; j < usable; ++j) {
        if (t_(m, j) < -tol_) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double a = t_(i, enter);
        if (a > tol_) {
          const double ratio = t_(i, rhs) / a;
          if (leave < 0 || ratio < best - tol_ ||
              (std::abs(ratio - best) <= tol_ && basis_[i] < basis_[leave])) {
            leave = i;
            best = ratio;
          }
        }
      }
      if (leave < 0) return false;
      pivot(static_cast<int>(leave), enter);
      if (++pivots > max_pivots) {
        throw SolverError("simplex exceeded its pivot budget",
                          "pivots=" + std::to_string(pivots));
      }
    }
  }

  void pivot(int row, int col) {
    t_.row(row) /= t_(row, col);
    for (int i = 0; i < t_.rows(); ++i) {
      if (i != row && t_(i, col) != 0.0) t_.row(i) -= t_(i, col) * t_.row(row);
    }
    basis_[row] = col;
  }

  Eigen::MatrixXd& table() { return t_; }
  std::vector<int>& basis() { return basis_; }

 private:
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
  double tol_;
};

}  // namespace

Result maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                double tol) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (c.size() != n || b.size() != m) {
    throw SolverError("inconsistent LP dimensions", "m=" + std::to_string(m) +
                                                        " n=" + std::to_string(n));
  }
  Eigen::MatrixXd a = A;
  Eigen::VectorXd rhs = b;
  for (int i = 0; i < m; ++i) {
    if (rhs(i) < 0.0) {
      a.row(i) *= -1.0;
      rhs(i) = -rhs(i);
    }
  }

  // Phase 1: columns [x | artificials | rhs], minimise the artificial sum.
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  t.topLeftCorner(m, n) = a;
  t.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
  t.block(0, n + m, m, 1) = rhs;
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;
  // Reduced costs of "maximise -sum(artificials)" with artificials basic.
  for (int i = 0; i < m; ++i) t.row(m) -= t.row(i);
  t.block(m, n, 1, m).setZero();

  const int max_pivots = 50 * (n + m) + 1000;
  int pivots = 0;
  Tableau tab(std::move(t), std::move(basis), tol);
  tab.optimize(n + m, max_pivots, pivots);

  auto& T = tab.table();
  const double infeasibility = -T(m, n + m);
  const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  Result result;
  result.pivots = pivots;
  if (infeasibility > 1e-9 * scale) {
    result.status = Status::kInfeasible;
    return result;
  }

  // Drive remaining artificials out of the basis; rows that cannot be pivoted are redundant.
  std::vector<int> keep_rows;
  for (int i = 0; i < m; ++i) {
    if (tab.basis()[i] >= n) {
      int col = -1;
      for (int j = 0; j < n; ++j) {
        if (std::abs(T(i, j)) > 1e-9) {
          col = j;
          break;
        }
      }
      if (col >= 0) {
        tab.pivot(i, col);
        keep_rows.push_back(i);
      }
    } else {
      keep_rows.push_back(i);
    }
  }

  // Phase 2 on the surviving rows, artificial columns dropped.
  const int m2 = static_cast<int>(keep_rows.size());
  Eigen::MatrixXd t2 = Eigen::MatrixXd::Zero(m2 + 1, n + 1);
  std::vector<int> basis2(m2);
  for (int r = 0; r < m2; ++r) {
    const int i = keep_rows[r];
    t2.block(r, 0, 1, n) = T.block(i, 0, 1, n);
    t2(r, n) = T(i, n + m);
    basis2[r] = tab.basis()[i];
  }
  t2.block(m2, 0, 1, n) = -c.transpose();
  for (int r = 0; r < m2; ++r) {
    const double cb = c(basis2[r]);
    if (cb != 0.0) t2.row(m2) += cb * t2.row(r);
  }
  Tableau tab2(std::move(t2), std::move(basis2), tol);
  if (!tab2.optimize(n, max_pivots, pivots)) {
    result.status = Status::kUnbounded;
    result.pivots = pivots;
    return result;
  }

  auto& T2 = tab2.table();
  result.x = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < m2; ++r) result.x(tab2.basis()[r]) = T2(r, n);
  result.objective = c.dot(result.x);
  result.pivots = pivots;
  result.status = Status::kOptimal;

  const double primal_residual = (A * result.x - b).lpNorm<Eigen::Infinity>();
  const double negativity = std::max(0.0, -result.x.minCoeff());
  if (primal_residual > 1e-8 * scale || negativity > 1e-8) {
    std::ostringstream cert;
    cert << "primal residual " << primal_residual << ", min x " << result.x.minCoeff();
    throw SolverError("simplex solution failed verification", cert.str());
  }
  return result;
}

}  // namespace csma::lp
