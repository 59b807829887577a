#include "csma/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "csma/errors.hpp"
#include "csma/simplex.hpp"

namespace csma {

std::string to_string(Feasibility f) {
  switch (f) {
    case Feasibility::kInfeasible:
      return "infeasible";
    case Feasibility::kBoundary:
      return "boundary";
    case Feasibility::kStrictlyFeasible:
      return "strictly_feasible";
  }
  return "unknown";
}

FeasibilityReport feasibility(const ConflictGraph& g, std::span<const double> lambda, int cap) {
  const int k = g.num_links();
  if (lambda.size() != static_cast<std::size_t>(k)) {
    throw DimensionError("arrival-rate vector has " + std::to_string(lambda.size()) +
                         " entries for " + std::to_string(k) + " links");
  }
  bool all_positive = true;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (!std::isfinite(lambda[i]) || lambda[i] < 0.0 || lambda[i] > 1.0) {
      throw DomainError("arrival rate of link " + std::to_string(i + 1) +
                        " is outside [0,1] (link capacity is 1)");
    }
    all_positive = all_positive && lambda[i] > 0.0;
  }
  const auto sets = independent_sets(g, cap);
  const int n = static_cast<int>(sets.size());

  // Columns: schedule weights (n) | t+ | t- | slack (k).
  // Rows k: sum_sigma w_sigma sigma_k - t + ... - slack_k = lambda_k; last row: sum w = 1.
  const int cols = n + 2 + k;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k + 1, cols);
  Eigen::VectorXd b(k + 1);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(cols);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < k; ++i) A(i, j) = sets[j].active(i) ? 1.0 : 0.0;
    A(k, j) = 1.0;
  }
  for (int i = 0; i < k; ++i) {
    A(i, n) = -1.0;
    A(i, n + 1) = 1.0;
    A(i, n + 2 + i) = -1.0;
    b(i) = lambda[i];
  }
  b(k) = 1.0;
  c(n) = 1.0;
  c(n + 1) = -1.0;

  const auto res = lp::maximize(c, A, b);
  if (res.status != lp::Status::kOptimal) {
    throw SolverError("feasibility LP did not reach an optimum",
                      res.status == lp::Status::kUnbounded ? "unbounded" : "infeasible");
  }
  FeasibilityReport report;
  report.margin = res.objective;
  report.schedule.assign(res.x.data(), res.x.data() + n);
  if (report.margin > kFeasibilityTolerance && all_positive) {
    report.status = Feasibility::kStrictlyFeasible;
  } else if (report.margin >= -kFeasibilityTolerance) {
    report.status = Feasibility::kBoundary;
  } else {
    report.status = Feasibility::kInfeasible;
  }
  return report;
}

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

RStarResult solve_rstar(const ProductForm& model, std::span<const double> lambda,
                        const RStarOptions& opts) {
  const int k = model.num_links();
  validate_rates(lambda, k);
  if (opts.check_feasibility) {
    const auto rep = feasibility(model.graph(), lambda);
    if (rep.status != Feasibility::kStrictlyFeasible) {
      throw PreconditionError("r* exists only for strictly feasible rates; lambda is " +
                              to_string(rep.status) + " (margin " +
                              std::to_string(rep.margin) + ")");
    }
  }
  std::vector<double> r(k, 0.0);
  if (opts.start) {
    if (opts.start->size() != static_cast<std::size_t>(k)) {
      throw DimensionError("start vector has the wrong length");
    }
    r = *opts.start;
  }

  RStarResult out;
  auto ll = model.log_likelihood(r, lambda);
  double residual = max_abs(ll.gradient);
  double step_hint = 1.0;
  std::vector<double> trial(k), s, prev_r, prev_grad;
  Eigen::MatrixXd cov;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (residual <= opts.tol) {
      out.r_star = r;
      out.residual = residual;
      out.iterations = iter;
      return out;
    }
    Eigen::Map<const Eigen::VectorXd> grad(ll.gradient.data(), k);
    Eigen::VectorXd dir = grad;
    double t = 1.0;
    if (opts.method == AscentMethod::kNewton) {
      model.rates_and_covariance(r, s, cov);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        Eigen::VectorXd d = ldlt.solve(grad);
        if (d.allFinite() && d.dot(grad) > 0.0) dir = d;
      }
    } else {
      t = step_hint;
    }
    const double slope = grad.dot(dir);

    // Backtracking with the Armijo condition; L is concave so this terminates
    // unless we are already at machine precision.
    bool accepted = false;
    LogLikelihood next;
    for (int bt = 0; bt < 200; ++bt) {
      for (int i = 0; i < k; ++i) trial[i] = r[i] + t * dir(i);
      next = model.log_likelihood(trial, lambda);
      if (std::isfinite(next.value) && next.value >= ll.value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      throw ConvergenceError("line search stalled at residual " + std::to_string(residual), r,
                             residual);
    }
    prev_r = r;
    prev_grad = ll.gradient;
    r = trial;
    ll = std::move(next);
    residual = max_abs(ll.gradient);
    if (opts.method == AscentMethod::kGradient) {
      // Barzilai-Borwein trial step for the next iteration; Armijo keeps it monotone.
      double ss = 0.0, sy = 0.0;
      for (int i = 0; i < k; ++i) {
        const double dr = r[i] - prev_r[i];
        const double dg = prev_grad[i] - ll.gradient[i];
        ss += dr * dr;
        sy += dr * dg;
      }
      step_hint = sy > 0.0 ? std::clamp(ss / sy, 1e-8, 1e8) : std::min(t * 2.0, 1e8);
    }
    out.objective_trace.push_back(ll.value);
  }
  if (residual <= opts.tol) {
    out.r_star = r;
    out.residual = residual;
    out.iterations = opts.max_iter;
    return out;
  }
  throw ConvergenceError("solve_rstar hit max_iter = " + std::to_string(opts.max_iter) +
                             " with residual " + std::to_string(residual),
                         r, residual);
}

RStarResult solve_rstar(const ConflictGraph& g, const ProtocolParams& params,
                        std::span<const double> lambda, const RStarOptions& opts) {
  return solve_rstar(ProductForm(g, params), lambda, opts);
}

bool region_check(std::span<const double> r_star, double r_min, double r_max) {
  return std::all_of(r_star.begin(), r_star.end(),
                     [&](double v) { return v > r_min && v < r_max; });
}

bool region_check(const ConflictGraph& g, const ProtocolParams& params,
                  std::span<const double> lambda, double r_min, double r_max) {
  if (!(r_min < r_max)) throw DomainError("region check needs r_min < r_max");
  return region_check(solve_rstar(g, params, lambda).r_star, r_min, r_max);
}

std::vector<double> rstar_lower_bound(const ProtocolParams& params,
                                      std::span<const double> lambda) {
  std::vector<double> out;
  out.reserve(lambda.size());
  const double ratio = static_cast<double>(params.tau_prime) / params.T0;
  for (double l : lambda) {
    if (!(l >= 0.0 && l < 1.0)) throw DomainError("lower bound needs rates in [0,1)");
    const double v = std::log(ratio * l / (1.0 - l));
    out.push_back(std::isfinite(v) ? v : std::numeric_limits<double>::lowest());
  }
  return out;
}

namespace {

struct Vertex {
  Eigen::VectorXd u;
  double rho = 0.0;
};

// Extreme points of {u in simplex, A u = rho * lambda_bar, 0 <= rho <= 1},
// by exhaustive basis enumeration of the standard-form system in (u, rho, slack).
std::vector<Vertex> enumerate_vertices(const Eigen::MatrixXd& A,
                                       std::span<const double> lambda_bar) {
  const int k = static_cast<int>(A.rows());
  const int np = static_cast<int>(A.cols());
  const int n = np + 2;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(k + 2, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 2);
  M.block(0, 0, 1, np).setOnes();
  rhs(0) = 1.0;
  M.block(1, 0, k, np) = A;
  for (int i = 0; i < k; ++i) M(1 + i, np) = -lambda_bar[i];
  M(k + 1, np) = 1.0;
  M(k + 1, np + 1) = 1.0;
  rhs(k + 1) = 1.0;

  // Keep a maximal independent subset of rows.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M.transpose());
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  std::vector<int> rows;
  for (int i = 0; i < rank; ++i) rows.push_back(qr.colsPermutation().indices()(i));
  std::sort(rows.begin(), rows.end());
  Eigen::MatrixXd Mr(rank, n);
  Eigen::VectorXd br(rank);
  for (int i = 0; i < rank; ++i) {
    Mr.row(i) = M.row(rows[i]);
    br(i) = rhs(rows[i]);
  }

  // Guard the combinatorial cost.
  double combos = 1.0;
  for (int i = 0; i < rank; ++i) combos = combos * (n - i) / (i + 1);
  constexpr double kMaxBases = 5e7;
  if (combos > kMaxBases) {
    throw CapacityError("vertex enumeration would examine " + std::to_string(combos) + " bases",
                        static_cast<std::size_t>(kMaxBases));
  }

  std::map<std::vector<long long>, Vertex> unique;
  std::vector<int> idx(rank);
  for (int i = 0; i < rank; ++i) idx[i] = i;
  Eigen::MatrixXd B(rank, rank);
  while (true) {
    for (int i = 0; i < rank; ++i) B.col(i) = Mr.col(idx[i]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    lu.setThreshold(1e-10);
    if (lu.isInvertible()) {
      const Eigen::VectorXd xb = lu.solve(br);
      if ((xb.array() >= -1e-10).all()) {
        Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < rank; ++i) full(idx[i]) = std::max(0.0, xb(i));
        std::vector<long long> key(np + 1);
        for (int i = 0; i <= np; ++i) key[i] = std::llround(full(i) * 1e9);
        if (!unique.count(key)) unique[key] = Vertex{full.head(np), full(np)};
      }
    }
    // Next combination in lexicographic order.
    int pos = rank - 1;
    while (pos >= 0 && idx[pos] == n - rank + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < rank; ++i) idx[i] = idx[i - 1] + 1;
  }
  std::vector<Vertex> out;
  out.reserve(unique.size());
  for (auto& [key, v] : unique) out.push_back(std::move(v));
  return out;
}

// min ||y - z||_1 over distributions z with A z = lambda_bar.
double l1_distance_to_target(const Eigen::MatrixXd& A, std::span<const double> lambda_bar,
                             const Eigen::VectorXd& y) {
  const int k = static_cast<int>(A.rows());
  const int np = static_cast<int>(A.cols());
  // Columns: z | pos | neg. Rows: z - pos + neg = y (np), A z = lambda_bar (k), sum z = 1.
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(np + k + 1, 3 * np);
  Eigen::VectorXd rhs(np + k + 1);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(3 * np);
  for (int i = 0; i < np; ++i) {
    M(i, i) = 1.0;
    M(i, np + i) = -1.0;
    M(i, 2 * np + i) = 1.0;
    rhs(i) = y(i);
    c(np + i) = -1.0;
    c(2 * np + i) = -1.0;
  }
  M.block(np, 0, k, np) = A;
  for (int i = 0; i < k; ++i) rhs(np + i) = lambda_bar[i];
  M.block(np + k, 0, 1, np).setOnes();
  rhs(np + k) = 1.0;
  const auto res = lp::maximize(c, M, rhs);
  if (res.status != lp::Status::kOptimal) {
    throw SolverError("distance LP failed", "lambda_bar not reachable by any distribution");
  }
  return -res.objective;
}

}  // namespace

BoundaryBound rstar_upper_bound(const ConflictGraph& g, const ProtocolParams& params,
                                std::span<const double> lambda_bar, double epsilon,
                                std::size_t detailed_cap) {
  const int k = g.num_links();
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0,1)");
  const auto rep = feasibility(g, lambda_bar);
  for (double l : lambda_bar) {
    if (!(l > 0.0)) throw PreconditionError("lambda_bar must be strictly positive");
  }
  if (std::abs(rep.margin) > kFeasibilityTolerance) {
    throw PreconditionError("lambda_bar must lie on the capacity boundary (margin " +
                            std::to_string(rep.margin) + ")");
  }

  const ProductForm model(g, params);
  BoundaryBound out;
  out.num_detailed = model.num_detailed_states();
  if (out.num_detailed > detailed_cap) {
    throw CapacityError("bound needs " + std::to_string(out.num_detailed) +
                            " detailed states; cap is " + std::to_string(detailed_cap),
                        detailed_cap);
  }
  const std::vector<double> zero(k, 0.0);
  const auto states = model.detailed_distribution(zero);
  const int np = static_cast<int>(states.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, np);
  for (int i = 0; i < np; ++i) {
    out.G = std::max(out.G, std::abs(states[i].log_weight));
    for (int j = 0; j < k; ++j) A(j, i) = has_link(states[i].state.z, j) ? 1.0 : 0.0;
  }

  const auto vertices = enumerate_vertices(A, lambda_bar);
  out.num_vertices = vertices.size();
  double worst = 0.0;
  for (const auto& v : vertices) {
    if (v.rho >= 1.0 - 1e-12) continue;
    worst = std::max(worst, l1_distance_to_target(A, lambda_bar, v.u) / (1.0 - v.rho));
  }
  out.b = 0.5 * worst;
  if (!(out.b > 0.0)) throw SolverError("degenerate bound constant", "b = 0");

  const double n = static_cast<double>(out.num_detailed);
  out.small_epsilon_branch = epsilon <= 1.0 / out.b;
  if (out.small_epsilon_branch) {
    out.value = out.b * (std::log(1.0 / epsilon) + std::log(n / out.b) + 2.0 * out.G + 1.0);
  } else {
    out.value = (std::log(n) + 2.0 * out.G) / epsilon;
  }
  return out;
}

}  // namespace csma
