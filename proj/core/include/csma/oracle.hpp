#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csma/conflict_graph.hpp"

namespace csma::oracle {

inline constexpr int kDefaultLinkCap = 3;
inline constexpr int kDefaultLengthCap = 8;

// pmf[b] = P(success length = b) for b = 1..b_max; pmf[0] is ignored.
using LengthPmf = std::vector<double>;

// A chain instance with explicit finite-support success-length laws.
struct Instance {
  ConflictGraph graph;
  std::vector<double> p;
  int gamma = 1;
  std::vector<LengthPmf> pmf;

  int b_max() const;
  std::vector<double> mean_lengths() const;  // T_k
  void validate(int link_cap = kDefaultLinkCap, int length_cap = kDefaultLengthCap) const;
};

// w = {x, (b_k, a_k)}: b = a = 0 for idle links.
struct State {
  LinkMask x = 0;
  std::vector<int> b;
  std::vector<int> a;
  bool operator==(const State&) const = default;
};

class StateSpace {
 public:
  const std::vector<State>& states() const { return states_; }
  std::size_t size() const { return states_.size(); }
  // Index of a valid state, or -1.
  int index_of(const State& w) const;
  const Instance& instance() const { return inst_; }

 private:
  friend StateSpace enumerate_states(const Instance&, int, int);
  Instance inst_;
  std::vector<State> states_;
  std::map<std::vector<int>, int> index_;
};

// All states satisfying (I) 1 <= a_k <= b_k, (II) isolated active links have b_k
// in the support of their pmf, and (III) links in a collision component have
// b_k = gamma and share a_k.
StateSpace enumerate_states(const Instance& inst, int link_cap = kDefaultLinkCap,
                            int length_cap = kDefaultLengthCap);

// One-slot transition matrix. Throws InvariantViolation if a row does not sum
// to one within 1e-12 or a successor is not a valid state.
Eigen::MatrixXd transition_kernel(const StateSpace& space);

// pi Q = pi, sum(pi) = 1, by a dense LU solve. Throws SolverError when the
// residual exceeds 1e-12.
Eigen::VectorXd stationary_exact(const Eigen::MatrixXd& Q);

// Normalised closed form: prod_{idle} q_i prod_{active} p_j f(b_j) with f = 1
// in a collision component and P_j(b_j) for an isolated link.
Eigen::VectorXd product_form(const StateSpace& space);

// g(w): a_k -> b_k - a_k + 1 on every active link.
State reverse(const State& w);

struct Report {
  std::size_t num_states = 0;
  double max_row_sum_error = 0.0;
  double max_product_form_error = 0.0;  // max_w |pi(w) - closed form|
  double max_marginal_error = 0.0;      // max_x |sum_{B(x)} pi - p(x)|
  double marginal_tv = 0.0;
  double max_balance_error = 0.0;       // max |p(w)Q(w,w') - p(w')Q(g(w'),g(w))|
  double max_length_sum_error = 0.0;    // sum over B(x) of prod P_j(b_j) vs prod T_j gamma^h
  bool involution = true;               // g(g(w)) = w and g(w) valid
  bool support_symmetry = true;         // Q(w,w') > 0 iff Q(g(w'),g(w)) > 0
};

Report verify(const Instance& inst);

// Small instances used by the test suite and the verify command.
struct NamedInstance {
  std::string name;
  Instance instance;
};
std::vector<NamedInstance> standard_suite();

}  // namespace csma::oracle
