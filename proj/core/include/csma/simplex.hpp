#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace csma::lp {

enum class Status { kOptimal, kInfeasible, kUnbounded };

struct Result {
  Status status = Status::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  int pivots = 0;
};

// maximize c'x  subject to  A x = b,  x >= 0.
//
// Dense two-phase tableau simplex with Bland's rule. Rows with negative b are
// negated up front. Meant for the small programs in this library (a few
// hundred columns); throws SolverError when the tableau degrades numerically
// or the pivot budget runs out.
Result maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                double tol = 1e-11);

}  // namespace csma::lp
