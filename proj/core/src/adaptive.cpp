#include "csma/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csma/errors.hpp"

namespace csma {

double penalty(double y, double r_min, double r_max) {
  if (y < r_min) return r_min - y;
  if (y > r_max) return r_max - y;
  return 0.0;
}

StepSchedule StepSchedule::harmonic(double c, double a, double d) {
  StepSchedule s;
  s.kind_ = Kind::kHarmonic;
  s.c_ = c;
  s.a_ = a;
  s.d_ = d;
  s.validate();
  return s;
}

StepSchedule StepSchedule::reciprocal() {
  StepSchedule s;
  s.kind_ = Kind::kReciprocal;
  return s;
}

StepSchedule StepSchedule::constant(double alpha) {
  StepSchedule s;
  s.kind_ = Kind::kConstant;
  s.c_ = alpha;
  s.validate();
  return s;
}

double StepSchedule::operator()(std::int64_t i) const {
  switch (kind_) {
    case Kind::kHarmonic:
      return c_ / (a_ + static_cast<double>(i) / d_);
    case Kind::kReciprocal:
      return 1.0 / static_cast<double>(std::max<std::int64_t>(i, 1));
    case Kind::kConstant:
      return c_;
  }
  return 0.0;
}

std::string StepSchedule::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::kHarmonic:
      os << "harmonic(c=" << c_ << ",a=" << a_ << ",d=" << d_ << ")";
      break;
    case Kind::kReciprocal:
      os << "reciprocal";
      break;
    case Kind::kConstant:
      os << "constant(" << c_ << ")";
      break;
  }
  return os.str();
}

void StepSchedule::validate() const {
  switch (kind_) {
    case Kind::kHarmonic:
      if (!(c_ > 0.0 && d_ > 0.0 && a_ + 1.0 / d_ > 0.0)) {
        throw ConfigError("harmonic step schedule needs c > 0, d > 0 and a + 1/d > 0");
      }
      if ((*this)(1) > 1.0) throw ConfigError("step schedule must satisfy alpha(1) <= 1");
      if (a_ < 0.0) throw ConfigError("harmonic step schedule needs a >= 0 to be non-increasing");
      break;
    case Kind::kReciprocal:
      break;
    case Kind::kConstant:
      if (!(c_ > 0.0 && c_ <= 1.0)) throw ConfigError("constant step must lie in (0,1]");
      break;
  }
}

void ControllerConfig::validate(int num_links) const {
  if (!(r_min < r_max) || !std::isfinite(r_min) || !std::isfinite(r_max)) {
    throw ConfigError("controller needs finite r_min < r_max");
  }
  if (!(delta >= 0.0)) throw ConfigError("delta must be non-negative");
  if (M < 1) throw ConfigError("update period M must be at least 1");
  if (!(lambda_bar > 0.0)) throw ConfigError("lambda_bar must be positive");
  if (periods < 0 || record_every < 1 || tail_periods < 0) {
    throw ConfigError("periods/record_every/tail_periods out of range");
  }
  schedule.validate();
  if (r0) {
    if (r0->size() != static_cast<std::size_t>(num_links)) {
      throw DimensionError("initial r has the wrong length");
    }
    for (double v : *r0) {
      if (!std::isfinite(v)) throw DomainError("initial r must be finite");
    }
  }
}

std::vector<double> ControllerConfig::initial_r(int num_links) const {
  if (r0) return *r0;
  return std::vector<double>(static_cast<std::size_t>(num_links), std::clamp(0.0, r_min, r_max));
}

std::vector<double> update(std::span<const double> r_prev, std::span<const double> lambda_emp,
                           std::span<const double> s_emp, double alpha,
                           const ControllerConfig& cfg) {
  if (lambda_emp.size() != r_prev.size() || s_emp.size() != r_prev.size()) {
    throw DimensionError("update needs r, lambda' and s' of equal length");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("step size must lie in (0,1]");
  std::vector<double> out(r_prev.size());
  for (std::size_t k = 0; k < r_prev.size(); ++k) {
    out[k] = r_prev[k] + alpha * (lambda_emp[k] + cfg.delta - s_emp[k] +
                                  penalty(r_prev[k], cfg.r_min, cfg.r_max));
  }
  return out;
}

AdaptiveResult run_adaptive(SimConfig sim, const ControllerConfig& ctl) {
  const int k = sim.graph.num_links();
  ctl.validate(k);
  sim.M = ctl.M;
  const std::int64_t periods = ctl.periods > 0 ? ctl.periods : sim.n_slots / ctl.M;
  sim.n_slots = periods * ctl.M;

  std::vector<double> r = ctl.initial_r(k);
  sim.r = r;
  Simulator engine(std::move(sim));
  const double t0 = engine.config().params.T0;
  auto means_of = [&](const std::vector<double>& rv) {
    std::vector<double> out(rv.size());
    for (std::size_t i = 0; i < rv.size(); ++i) out[i] = t0 * std::exp(rv[i]);
    return out;
  };

  AdaptiveResult res;
  Trajectory& tr = res.trajectory;
  tr.min_r = *std::min_element(r.begin(), r.end());
  tr.max_r = *std::max_element(r.begin(), r.end());
  const std::int64_t tail_start = periods - std::min(ctl.tail_periods, periods);
  std::vector<double> tail_r(k, 0.0), tail_s(k, 0.0), tail_a(k, 0.0);

  for (std::int64_t i = 1; i <= periods; ++i) {
    do {
      engine.advance();
    } while (!engine.period_closed());
    const PeriodRecord& rec = engine.last_period();
    std::vector<double> arrival = rec.arrival;
    for (double& a : arrival) a = std::min(a, ctl.lambda_bar);
    const std::vector<double> payload_used = engine.payload_means();
    r = update(r, arrival, rec.service, ctl.schedule(i), ctl);
    engine.set_payload_means(means_of(r));

    for (double v : r) {
      tr.min_r = std::min(tr.min_r, v);
      tr.max_r = std::max(tr.max_r, v);
    }
    if (i > tail_start) {
      for (int j = 0; j < k; ++j) {
        tail_r[j] += r[j];
        tail_s[j] += rec.service[j];
        tail_a[j] += rec.arrival[j];
      }
    }
    if (i % ctl.record_every == 0 || i == periods) {
      tr.records.push_back({i, r, payload_used, rec.arrival, rec.service, rec.queue});
    }
  }
  tr.periods = periods;
  tr.final_r = r;
  const double n_tail = static_cast<double>(std::max<std::int64_t>(1, periods - tail_start));
  tr.tail_mean_r.resize(k);
  tr.tail_mean_service.resize(k);
  tr.tail_mean_arrival.resize(k);
  for (int j = 0; j < k; ++j) {
    tr.tail_mean_r[j] = periods > tail_start ? tail_r[j] / n_tail : r[j];
    tr.tail_mean_service[j] = tail_s[j] / n_tail;
    tr.tail_mean_arrival[j] = tail_a[j] / n_tail;
  }
  tr.within_bounds = tr.min_r >= ctl.lower_bound() && tr.max_r <= ctl.upper_bound();
  res.metrics = engine.finish();
  return res;
}

MeanFieldResult mean_field_iteration(const ProductForm& model, std::span<const double> lambda,
                                     const ControllerConfig& ctl, std::int64_t iterations,
                                     double tol) {
  const int k = model.num_links();
  ctl.validate(k);
  if (lambda.size() != static_cast<std::size_t>(k)) throw DimensionError("lambda has the wrong length");
  MeanFieldResult out;
  out.r = ctl.initial_r(k);
  auto drift = [&](const std::vector<double>& r, const std::vector<double>& s) {
    std::vector<double> d(k);
    for (int j = 0; j < k; ++j) {
      d[j] = lambda[j] + ctl.delta - s[j] + penalty(r[j], ctl.r_min, ctl.r_max);
    }
    return d;
  };
  auto residual_of = [](const std::vector<double>& d) {
    double m = 0.0;
    for (double v : d) m = std::max(m, std::abs(v));
    return m;
  };
  for (std::int64_t i = 1; i <= iterations; ++i) {
    const auto s = model.service_rates(out.r);
    const auto d = drift(out.r, s);
    out.residual = residual_of(d);
    out.iterations = i - 1;
    if (tol > 0.0 && out.residual <= tol) return out;
    const double alpha = ctl.schedule(i);
    for (int j = 0; j < k; ++j) out.r[j] += alpha * d[j];
  }
  out.iterations = iterations;
  out.residual = residual_of(drift(out.r, model.service_rates(out.r)));
  return out;
}

}  // namespace csma
