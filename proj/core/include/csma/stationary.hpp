#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "csma/conflict_graph.hpp"

namespace csma {

// Attempt probabilities and length constants shared by analysis and simulation.
// All lengths are in slots.
struct ProtocolParams {
  std::vector<double> p;  // per-link attempt probability, each in (0,1)
  int gamma = 1;          // collision (probe) length
  int tau_prime = 1;      // per-success overhead
  double T0 = 1.0;        // reference payload length

  static ProtocolParams uniform(int num_links, double p, int gamma, int tau_prime, double T0);

  // Throws DomainError / DimensionError when the invariants fail.
  void validate(int num_links) const;

  // Mean payload T0 * exp(r_k) and mean success length tau' + T0 * exp(r_k).
  double payload_mean(double r) const;
  double success_mean(double r) const;
};

// Stationary law over {0,1}^K indexed by the bitmask of x.
struct OnOffDistribution {
  std::vector<double> prob;
  double log_normalizer = 0.0;  // log E(r); E itself may overflow a double

  double normalizer() const;
  double operator[](LinkMask x) const { return prob[x]; }
};

// One detailed state (x, z) with z a subset of S(x): links carrying payload.
struct DetailedState {
  LinkMask x = 0;
  LinkMask z = 0;
  bool operator==(const DetailedState&) const = default;
};

struct DetailedEntry {
  DetailedState state;
  double log_weight = 0.0;  // log g(x,z), independent of r
  double prob = 0.0;
};

struct LogLikelihood {
  double value = 0.0;
  std::vector<double> gradient;  // lambda - s(r)
};

// Exact product-form evaluator for a fixed (graph, params) pair. Precomputes
// log g(x), S(x) and h(x) for all 2^K on-off states once; each evaluation at a
// new r is then a single pass.
class ProductForm {
 public:
  ProductForm(const ConflictGraph& g, ProtocolParams params,
              int cap = kDefaultEnumerationCap);

  int num_links() const noexcept { return k_; }
  std::size_t num_states() const noexcept { return log_base_.size(); }
  const ProtocolParams& params() const noexcept { return params_; }
  const ConflictGraph& graph() const noexcept { return graph_; }

  LinkMask successful(LinkMask x) const { return success_[x]; }
  int collision_number(LinkMask x) const { return collisions_[x]; }
  // log g(x) = h(x) log(gamma) + sum_i log(p_i^{x_i} q_i^{1-x_i})
  double log_g(LinkMask x) const { return log_base_[x]; }

  // Stationary law given mean transmission lengths T_k directly (T_k > 0).
  OnOffDistribution distribution_from_lengths(std::span<const double> lengths) const;
  OnOffDistribution distribution(std::span<const double> r) const;

  std::vector<double> service_rates(std::span<const double> r) const;
  // Same quantity summed over detailed states; used as a second route.
  std::vector<double> service_rates_detailed(std::span<const double> r) const;

  std::vector<DetailedEntry> detailed_distribution(std::span<const double> r) const;
  std::size_t num_detailed_states() const;

  LogLikelihood log_likelihood(std::span<const double> r, std::span<const double> lambda) const;

  // Covariance of the payload indicators z under the detailed law; this is the
  // negative Hessian of the log-likelihood.
  Eigen::MatrixXd payload_covariance(std::span<const double> r) const;

  // Service rates together with the covariance, sharing one pass.
  void rates_and_covariance(std::span<const double> r, std::vector<double>& s,
                            Eigen::MatrixXd& cov) const;

 private:
  void check_r(std::span<const double> r) const;
  // log of unnormalised weights, plus their log-sum-exp.
  double log_weights(std::span<const double> log_lengths, std::vector<double>& lw) const;

  ConflictGraph graph_;
  ProtocolParams params_;
  int k_ = 0;
  std::vector<double> log_base_;
  std::vector<LinkMask> success_;
  std::vector<std::uint8_t> collisions_;
};

OnOffDistribution onoff_distribution(const ConflictGraph& g, const ProtocolParams& params,
                                     std::span<const double> r);
std::vector<double> service_rates(const ConflictGraph& g, const ProtocolParams& params,
                                  std::span<const double> r);
std::vector<DetailedEntry> detailed_distribution(const ConflictGraph& g,
                                                 const ProtocolParams& params,
                                                 std::span<const double> r);
LogLikelihood log_likelihood(const ConflictGraph& g, const ProtocolParams& params,
                             std::span<const double> r, std::span<const double> lambda);

// Throws DimensionError / DomainError unless lambda has K entries in (0,1).
void validate_rates(std::span<const double> lambda, int num_links);

}  // namespace csma
