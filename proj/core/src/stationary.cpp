#include "csma/stationary.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "csma/errors.hpp"

namespace csma {

namespace {

// Detailed-state lists larger than this are refused; they are only needed for
// cross-checks and the boundary-bound computation on small graphs.
constexpr std::size_t kDetailedStateCap = std::size_t{1} << 22;

}  // namespace

ProtocolParams ProtocolParams::uniform(int num_links, double p, int gamma, int tau_prime,
                                       double T0) {
  ProtocolParams out;
  out.p.assign(static_cast<std::size_t>(num_links), p);
  out.gamma = gamma;
  out.tau_prime = tau_prime;
  out.T0 = T0;
  return out;
}

void ProtocolParams::validate(int num_links) const {
  if (p.size() != static_cast<std::size_t>(num_links)) {
    throw DimensionError("attempt probabilities have " + std::to_string(p.size()) +
                         " entries for " + std::to_string(num_links) + " links");
  }
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!(p[k] > 0.0 && p[k] < 1.0)) {
      throw DomainError("attempt probability of link " + std::to_string(k + 1) +
                        " must lie in (0,1)");
    }
  }
  if (gamma < 1) throw DomainError("collision length gamma must be a positive integer");
  if (tau_prime < 1) throw DomainError("overhead tau' must be a positive integer");
  if (!(T0 > 0.0) || !std::isfinite(T0)) throw DomainError("reference payload T0 must be > 0");
}

double ProtocolParams::payload_mean(double r) const { return T0 * std::exp(r); }

double ProtocolParams::success_mean(double r) const { return tau_prime + T0 * std::exp(r); }

double OnOffDistribution::normalizer() const { return std::exp(log_normalizer); }

void validate_rates(std::span<const double> lambda, int num_links) {
  if (lambda.size() != static_cast<std::size_t>(num_links)) {
    throw DimensionError("arrival-rate vector has " + std::to_string(lambda.size()) +
                         " entries for " + std::to_string(num_links) + " links");
  }
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    if (!(lambda[k] > 0.0 && lambda[k] < 1.0)) {
      throw DomainError("arrival rate of link " + std::to_string(k + 1) +
                        " must lie in (0,1), got " + std::to_string(lambda[k]));
    }
  }
}

ProductForm::ProductForm(const ConflictGraph& g, ProtocolParams params, int cap)
    : graph_(g), params_(std::move(params)), k_(g.num_links()) {
  if (k_ > cap) {
    throw CapacityError("product-form evaluation enumerates 2^K states; K = " +
                            std::to_string(k_) + " exceeds the cap " + std::to_string(cap),
                        static_cast<std::size_t>(cap));
  }
  params_.validate(k_);
  const std::size_t n = std::size_t{1} << k_;
  log_base_.resize(n);
  success_.resize(n);
  collisions_.resize(n);

  std::vector<double> log_p(k_), log_q(k_);
  double all_idle = 0.0;
  for (int k = 0; k < k_; ++k) {
    log_p[k] = std::log(params_.p[k]);
    log_q[k] = std::log1p(-params_.p[k]);
    all_idle += log_q[k];
  }
  const double log_gamma = std::log(static_cast<double>(params_.gamma));
  for (std::size_t x = 0; x < n; ++x) {
    const auto sc = success_and_collisions(graph_, x);
    success_[x] = sc.successful;
    collisions_[x] = static_cast<std::uint8_t>(sc.collision_number);
    double lb = all_idle + sc.collision_number * log_gamma;
    for (LinkMask m = x; m != 0; m &= m - 1) {
      const int k = std::countr_zero(m);
      lb += log_p[k] - log_q[k];
    }
    log_base_[x] = lb;
  }
}

void ProductForm::check_r(std::span<const double> r) const {
  if (r.size() != static_cast<std::size_t>(k_)) {
    throw DimensionError("exponent vector has " + std::to_string(r.size()) + " entries for " +
                         std::to_string(k_) + " links");
  }
  for (double v : r) {
    if (!std::isfinite(v)) throw DomainError("length exponents must be finite");
  }
}

double ProductForm::log_weights(std::span<const double> log_lengths,
                                std::vector<double>& lw) const {
  const std::size_t n = log_base_.size();
  lw.resize(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < n; ++x) {
    double v = log_base_[x];
    for (LinkMask m = success_[x]; m != 0; m &= m - 1) v += log_lengths[std::countr_zero(m)];
    lw[x] = v;
    mx = std::max(mx, v);
  }
  double sum = 0.0;
  for (std::size_t x = 0; x < n; ++x) sum += std::exp(lw[x] - mx);
  return mx + std::log(sum);
}

OnOffDistribution ProductForm::distribution_from_lengths(std::span<const double> lengths) const {
  if (lengths.size() != static_cast<std::size_t>(k_)) {
    throw DimensionError("mean-length vector has wrong size");
  }
  std::vector<double> log_len(k_);
  for (int k = 0; k < k_; ++k) {
    if (!(lengths[k] > 0.0) || !std::isfinite(lengths[k])) {
      throw DomainError("mean transmission lengths must be positive and finite");
    }
    log_len[k] = std::log(lengths[k]);
  }
  OnOffDistribution out;
  out.log_normalizer = log_weights(log_len, out.prob);
  for (double& v : out.prob) v = std::exp(v - out.log_normalizer);
  return out;
}

OnOffDistribution ProductForm::distribution(std::span<const double> r) const {
  check_r(r);
  std::vector<double> lengths(k_);
  for (int k = 0; k < k_; ++k) lengths[k] = params_.success_mean(r[k]);
  return distribution_from_lengths(lengths);
}

std::vector<double> ProductForm::service_rates(std::span<const double> r) const {
  const auto dist = distribution(r);
  std::vector<double> in_success(k_, 0.0);
  for (std::size_t x = 0; x < dist.prob.size(); ++x) {
    for (LinkMask m = success_[x]; m != 0; m &= m - 1) {
      in_success[std::countr_zero(m)] += dist.prob[x];
    }
  }
  std::vector<double> s(k_);
  for (int k = 0; k < k_; ++k) {
    const double payload = params_.payload_mean(r[k]);
    s[k] = payload / (params_.tau_prime + payload) * in_success[k];
  }
  return s;
}

std::size_t ProductForm::num_detailed_states() const {
  std::size_t n = 0;
  for (LinkMask s : success_) n += std::size_t{1} << std::popcount(s);
  return n;
}

std::vector<DetailedEntry> ProductForm::detailed_distribution(std::span<const double> r) const {
  check_r(r);
  const std::size_t count = num_detailed_states();
  if (count > kDetailedStateCap) {
    throw CapacityError("detailed-state enumeration would produce " + std::to_string(count) +
                            " states",
                        kDetailedStateCap);
  }
  const double log_tau = std::log(static_cast<double>(params_.tau_prime));
  const double log_t0 = std::log(params_.T0);
  std::vector<DetailedEntry> out;
  out.reserve(count);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < success_.size(); ++x) {
    const LinkMask s = success_[x];
    const int ns = std::popcount(s);
    // Walk every subset z of S(x).
    LinkMask z = 0;
    while (true) {
      const int nz = std::popcount(z);
      DetailedEntry e;
      e.state = {x, z};
      e.log_weight = log_base_[x] + (ns - nz) * log_tau + nz * log_t0;
      double lw = e.log_weight;
      for (LinkMask m = z; m != 0; m &= m - 1) lw += r[std::countr_zero(m)];
      e.prob = lw;
      mx = std::max(mx, lw);
      out.push_back(e);
      if (z == s) break;
      z = (z - s) & s;
    }
  }
  double sum = 0.0;
  for (const auto& e : out) sum += std::exp(e.prob - mx);
  const double log_e = mx + std::log(sum);
  for (auto& e : out) e.prob = std::exp(e.prob - log_e);
  return out;
}

std::vector<double> ProductForm::service_rates_detailed(std::span<const double> r) const {
  std::vector<double> s(k_, 0.0);
  for (const auto& e : detailed_distribution(r)) {
    for (LinkMask m = e.state.z; m != 0; m &= m - 1) s[std::countr_zero(m)] += e.prob;
  }
  return s;
}

LogLikelihood ProductForm::log_likelihood(std::span<const double> r,
                                          std::span<const double> lambda) const {
  check_r(r);
  validate_rates(lambda, k_);
  std::vector<double> log_len(k_);
  for (int k = 0; k < k_; ++k) log_len[k] = std::log(params_.success_mean(r[k]));
  std::vector<double> lw;
  const double log_e = log_weights(log_len, lw);

  LogLikelihood out;
  out.value = -log_e;
  for (int k = 0; k < k_; ++k) out.value += lambda[k] * r[k];

  std::vector<double> in_success(k_, 0.0);
  for (std::size_t x = 0; x < lw.size(); ++x) {
    if (success_[x] == 0) continue;
    const double px = std::exp(lw[x] - log_e);
    for (LinkMask m = success_[x]; m != 0; m &= m - 1) in_success[std::countr_zero(m)] += px;
  }
  out.gradient.resize(k_);
  for (int k = 0; k < k_; ++k) {
    const double payload = params_.payload_mean(r[k]);
    out.gradient[k] = lambda[k] - payload / (params_.tau_prime + payload) * in_success[k];
  }
  return out;
}

void ProductForm::rates_and_covariance(std::span<const double> r, std::vector<double>& s,
                                       Eigen::MatrixXd& cov) const {
  const auto dist = distribution(r);
  std::vector<double> phi(k_);
  for (int k = 0; k < k_; ++k) {
    const double payload = params_.payload_mean(r[k]);
    phi[k] = payload / (params_.tau_prime + payload);
  }
  // joint(k, j) = P(k and j both in S(x)); the diagonal is P(k in S(x)).
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(k_, k_);
  int idx[kMaxLinks];
  for (std::size_t x = 0; x < dist.prob.size(); ++x) {
    const LinkMask sx = success_[x];
    if (sx == 0) continue;
    int n = 0;
    for (LinkMask m = sx; m != 0; m &= m - 1) idx[n++] = std::countr_zero(m);
    const double px = dist.prob[x];
    for (int a = 0; a < n; ++a) {
      for (int b = a; b < n; ++b) joint(idx[a], idx[b]) += px;
    }
  }
  s.assign(k_, 0.0);
  cov.resize(k_, k_);
  for (int k = 0; k < k_; ++k) s[k] = phi[k] * joint(k, k);
  for (int k = 0; k < k_; ++k) {
    for (int j = k; j < k_; ++j) {
      const double second = (j == k) ? s[k] : phi[k] * phi[j] * joint(k, j);
      cov(k, j) = second - s[k] * s[j];
      cov(j, k) = cov(k, j);
    }
  }
}

Eigen::MatrixXd ProductForm::payload_covariance(std::span<const double> r) const {
  std::vector<double> s;
  Eigen::MatrixXd cov;
  rates_and_covariance(r, s, cov);
  return cov;
}

OnOffDistribution onoff_distribution(const ConflictGraph& g, const ProtocolParams& params,
                                     std::span<const double> r) {
  return ProductForm(g, params).distribution(r);
}

std::vector<double> service_rates(const ConflictGraph& g, const ProtocolParams& params,
                                  std::span<const double> r) {
  return ProductForm(g, params).service_rates(r);
}

std::vector<DetailedEntry> detailed_distribution(const ConflictGraph& g,
                                                 const ProtocolParams& params,
                                                 std::span<const double> r) {
  return ProductForm(g, params).detailed_distribution(r);
}

LogLikelihood log_likelihood(const ConflictGraph& g, const ProtocolParams& params,
                             std::span<const double> r, std::span<const double> lambda) {
  return ProductForm(g, params).log_likelihood(r, lambda);
}

}  // namespace csma
