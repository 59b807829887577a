#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csma/conflict_graph.hpp"
#include "csma/stationary.hpp"

namespace csma {

enum class Feasibility { kInfeasible, kBoundary, kStrictlyFeasible };

std::string to_string(Feasibility f);

struct FeasibilityReport {
  Feasibility status = Feasibility::kInfeasible;
  // Largest t with lambda + t*1 dominated by a convex combination of
  // independent sets. Negative: infeasible, zero: boundary, positive: interior.
  double margin = 0.0;
  std::vector<double> schedule;  // weights over independent_sets(g) at the optimum
};

inline constexpr double kFeasibilityTolerance = 1e-9;

// Rates must lie in [0,1]; anything above link capacity is rejected before the LP.
FeasibilityReport feasibility(const ConflictGraph& g, std::span<const double> lambda,
                              int cap = kDefaultEnumerationCap);

enum class AscentMethod {
  kNewton,    // damped Newton on L using the payload covariance
  kGradient,  // plain gradient ascent
};

struct RStarOptions {
  double tol = 1e-9;         // stop once max_k |lambda_k - s_k(r)| <= tol
  int max_iter = 100000;
  AscentMethod method = AscentMethod::kNewton;
  std::optional<std::vector<double>> start;  // defaults to the zero vector
  bool check_feasibility = true;
};

struct RStarResult {
  std::vector<double> r_star;
  double residual = 0.0;  // max_k |s_k(r*) - lambda_k|
  int iterations = 0;
  std::vector<double> objective_trace;  // L after each accepted step
};

// Unique maximiser of L(r; lambda) = lambda'r - log E(r).
RStarResult solve_rstar(const ConflictGraph& g, const ProtocolParams& params,
                        std::span<const double> lambda, const RStarOptions& opts = {});
RStarResult solve_rstar(const ProductForm& model, std::span<const double> lambda,
                        const RStarOptions& opts = {});

// True iff every component of r*(lambda) lies strictly inside (r_min, r_max).
bool region_check(const ConflictGraph& g, const ProtocolParams& params,
                  std::span<const double> lambda, double r_min, double r_max);
bool region_check(std::span<const double> r_star, double r_min, double r_max);

// Per-link lower bound log((tau'/T0) * lambda_k / (1 - lambda_k)) on r*_k.
// lambda_k = 0 maps to the lowest finite double.
std::vector<double> rstar_lower_bound(const ProtocolParams& params,
                                      std::span<const double> lambda);

// Upper bound on lambda_bar' r*((1 - eps) lambda_bar) for lambda_bar on the
// capacity boundary, built from the detailed-state polytope of the graph.
struct BoundaryBound {
  double value = 0.0;
  double b = 0.0;             // Lipschitz-type constant from the extreme points
  double G = 0.0;             // max |log g(x,z)|
  std::size_t num_detailed = 0;  // N'
  std::size_t num_vertices = 0;
  bool small_epsilon_branch = false;  // eps <= 1/b
};

inline constexpr std::size_t kDefaultDetailedStateCap = 64;

BoundaryBound rstar_upper_bound(const ConflictGraph& g, const ProtocolParams& params,
                                std::span<const double> lambda_bar, double epsilon,
                                std::size_t detailed_cap = kDefaultDetailedStateCap);

}  // namespace csma
