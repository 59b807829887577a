#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csma/simulator.hpp"
#include "csma/stationary.hpp"

namespace csma {

// Soft barrier pulling y back into [r_min, r_max].
double penalty(double y, double r_min, double r_max);

class StepSchedule {
 public:
  enum class Kind { kHarmonic, kReciprocal, kConstant };

  // alpha(i) = c / (a + i/d)
  static StepSchedule harmonic(double c, double a, double d);
  // alpha(i) = 1/i
  static StepSchedule reciprocal();
  static StepSchedule constant(double alpha);

  Kind kind() const { return kind_; }
  double operator()(std::int64_t i) const;  // i >= 1
  bool decreasing() const { return kind_ != Kind::kConstant; }
  std::string describe() const;
  void validate() const;

 private:
  Kind kind_ = Kind::kConstant;
  double c_ = 0.0, a_ = 0.0, d_ = 1.0;
};

struct ControllerConfig {
  double r_min = 0.0;
  double r_max = 3.5;
  double delta = 0.0;  // 0 gives the plain update; > 0 pretends to serve lambda + delta
  StepSchedule schedule = StepSchedule::harmonic(0.23, 2.0, 100.0);
  int M = 500;
  double lambda_bar = 1.0;  // cap on the per-period empirical arrival rate
  std::optional<std::vector<double>> r0;  // defaults to 0 clamped into [r_min, r_max]
  std::int64_t periods = 0;               // 0: derive from the simulation length
  std::int64_t record_every = 1;          // trajectory stride in periods
  std::int64_t tail_periods = 0;          // periods averaged into Trajectory::tail_mean_r

  void validate(int num_links) const;
  double lower_bound() const { return r_min - 2.0; }
  double upper_bound() const { return r_max + 2.0 * (lambda_bar + delta); }
  std::vector<double> initial_r(int num_links) const;
};

// r_k + alpha * (lambda'_k + delta - s'_k + penalty(r_k)); nothing is clamped.
std::vector<double> update(std::span<const double> r_prev, std::span<const double> lambda_emp,
                           std::span<const double> s_emp, double alpha, const ControllerConfig& cfg);

struct TrajectoryRecord {
  std::int64_t period = 0;
  std::vector<double> r;             // r(i), after the update at the end of period i
  std::vector<double> payload_mean;  // T^p used during period i
  std::vector<double> arrival;
  std::vector<double> service;
  std::vector<std::int64_t> queue;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  std::vector<double> final_r;
  std::vector<double> tail_mean_r;  // mean of r(i) over the last tail_periods periods
  std::vector<double> tail_mean_service;
  std::vector<double> tail_mean_arrival;
  double min_r = 0.0;
  double max_r = 0.0;
  bool within_bounds = true;  // every iterate stayed inside [lower_bound, upper_bound]
  std::int64_t periods = 0;
};

struct AdaptiveResult {
  Trajectory trajectory;
  Metrics metrics;
};

// Couples the simulator with the controller: after every M slots each link
// updates r_k from its empirical arrival and service rates and the new mean
// payload T0*exp(r_k) applies to transmissions started afterwards.
AdaptiveResult run_adaptive(SimConfig sim, const ControllerConfig& ctl);

// The same recursion with the exact service rates s(r) in place of the
// empirical ones. Returns the final iterate.
struct MeanFieldResult {
  std::vector<double> r;
  double residual = 0.0;  // max_k |lambda_k + delta - s_k(r) + penalty(r_k)|
  std::int64_t iterations = 0;
};
MeanFieldResult mean_field_iteration(const ProductForm& model, std::span<const double> lambda,
                                     const ControllerConfig& ctl, std::int64_t iterations,
                                     double tol = 0.0);

}  // namespace csma
