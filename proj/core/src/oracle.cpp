#include "csma/oracle.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "csma/errors.hpp"
#include "csma/stationary.hpp"

namespace csma::oracle {

namespace {

std::vector<int> key_of(const State& w) {
  std::vector<int> key;
  key.reserve(2 * w.b.size());
  for (std::size_t k = 0; k < w.b.size(); ++k) {
    key.push_back(w.b[k]);
    key.push_back(w.a[k]);
  }
  return key;
}

// Calls fn(b_vector) for every assignment of support values to the links in `links`.
template <typename Fn>
void for_each_length(const Instance& inst, const std::vector<int>& links, std::size_t pos,
                     std::vector<int>& b, double prob, Fn&& fn) {
  if (pos == links.size()) {
    fn(b, prob);
    return;
  }
  const int k = links[pos];
  const auto& pmf = inst.pmf[k];
  for (std::size_t len = 1; len < pmf.size(); ++len) {
    if (pmf[len] <= 0.0) continue;
    b[k] = static_cast<int>(len);
    for_each_length(inst, links, pos + 1, b, prob * pmf[len], fn);
  }
  b[k] = 0;
}

}  // namespace

int Instance::b_max() const {
  int m = gamma;
  for (const auto& pmf : this->pmf) {
    for (std::size_t b = 1; b < pmf.size(); ++b) {
      if (pmf[b] > 0.0) m = std::max(m, static_cast<int>(b));
    }
  }
  return m;
}

std::vector<double> Instance::mean_lengths() const {
  std::vector<double> t(pmf.size(), 0.0);
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    for (std::size_t b = 1; b < pmf[k].size(); ++b) t[k] += static_cast<double>(b) * pmf[k][b];
  }
  return t;
}

void Instance::validate(int link_cap, int length_cap) const {
  const int k = graph.num_links();
  if (k < 1) throw ConfigError("oracle instance needs at least one link");
  if (k > link_cap) {
    throw CapacityError("oracle handles at most " + std::to_string(link_cap) + " links",
                        static_cast<std::size_t>(link_cap));
  }
  if (p.size() != static_cast<std::size_t>(k) || pmf.size() != static_cast<std::size_t>(k)) {
    throw DimensionError("oracle instance vectors must have one entry per link");
  }
  for (double v : p) {
    if (!(v > 0.0 && v < 1.0)) throw DomainError("attempt probabilities must lie in (0,1)");
  }
  if (gamma < 1) throw DomainError("gamma must be a positive integer");
  for (const auto& law : pmf) {
    double total = 0.0;
    for (std::size_t b = 1; b < law.size(); ++b) {
      if (law[b] < 0.0) throw DomainError("negative length probability");
      total += law[b];
    }
    if (std::abs(total - 1.0) > 1e-12) throw DomainError("length pmf must sum to one");
  }
  if (b_max() > length_cap) {
    throw CapacityError("oracle lengths are capped at b_max = " + std::to_string(length_cap),
                        static_cast<std::size_t>(length_cap));
  }
}

int StateSpace::index_of(const State& w) const {
  const auto it = index_.find(key_of(w));
  return it == index_.end() ? -1 : it->second;
}

StateSpace enumerate_states(const Instance& inst, int link_cap, int length_cap) {
  inst.validate(link_cap, length_cap);
  const int k = inst.graph.num_links();
  StateSpace space;
  space.inst_ = inst;

  for (LinkMask x = 0; x < (LinkMask{1} << k); ++x) {
    const auto cls = classify(inst.graph, x);
    std::vector<int> singles;
    for (LinkMask m = cls.successful; m != 0; m &= m - 1) singles.push_back(std::countr_zero(m));
    std::vector<LinkMask> coll;
    for (LinkMask c : cls.components) {
      if (std::popcount(c) > 1) coll.push_back(c);
    }

    State w;
    w.x = x;
    w.b.assign(k, 0);
    w.a.assign(k, 0);
    // Odometer over (b, a) of isolated links and the shared phase of each collision component.
    std::vector<int> bs(k, 0);
    auto emit_collisions = [&](auto&& self, std::size_t c) -> void {
      if (c == coll.size()) {
        space.index_[key_of(w)] = static_cast<int>(space.states_.size());
        space.states_.push_back(w);
        return;
      }
      for (int a = 1; a <= inst.gamma; ++a) {
        for (LinkMask m = coll[c]; m != 0; m &= m - 1) {
          const int j = std::countr_zero(m);
          w.b[j] = inst.gamma;
          w.a[j] = a;
        }
        self(self, c + 1);
      }
    };
    auto emit_singles = [&](auto&& self, std::size_t s) -> void {
      if (s == singles.size()) {
        emit_collisions(emit_collisions, 0);
        return;
      }
      const int j = singles[s];
      for (std::size_t b = 1; b < inst.pmf[j].size(); ++b) {
        if (inst.pmf[j][b] <= 0.0) continue;
        for (int a = 1; a <= static_cast<int>(b); ++a) {
          w.b[j] = static_cast<int>(b);
          w.a[j] = a;
          self(self, s + 1);
        }
      }
    };
    emit_singles(emit_singles, 0);
  }
  return space;
}

Eigen::MatrixXd transition_kernel(const StateSpace& space) {
  const Instance& inst = space.instance();
  const ConflictGraph& g = inst.graph;
  const int k = g.num_links();
  const auto n = static_cast<Eigen::Index>(space.size());
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const State& w = space.states()[i];
    LinkMask a1 = 0;
    for (int j = 0; j < k; ++j) {
      if (has_link(w.x, j) && w.a[j] > 1) a1 |= link_bit(j);
    }
    LinkMask closure = a1;
    for (LinkMask m = a1; m != 0; m &= m - 1) closure |= g.neighbors(std::countr_zero(m)) & ~w.x;
    const LinkMask a2 = g.all_links() & ~closure;

    State base;
    base.b.assign(k, 0);
    base.a.assign(k, 0);
    base.x = a1;
    for (LinkMask m = a1; m != 0; m &= m - 1) {
      const int j = std::countr_zero(m);
      base.b[j] = w.b[j];
      base.a[j] = w.a[j] - 1;
    }

    // Every subset of A2 may start in the next slot.
    for (LinkMask start = a2;; start = (start - 1) & a2) {
      double prob = 1.0;
      for (LinkMask m = a2; m != 0; m &= m - 1) {
        const int j = std::countr_zero(m);
        prob *= has_link(start, j) ? inst.p[j] : 1.0 - inst.p[j];
      }
      State next = base;
      next.x = base.x | start;
      const auto cls = classify(g, next.x);
      std::vector<int> new_success;
      for (LinkMask m = start; m != 0; m &= m - 1) {
        const int j = std::countr_zero(m);
        if (has_link(cls.successful, j)) {
          new_success.push_back(j);
        } else {
          next.b[j] = next.a[j] = inst.gamma;
        }
      }
      std::vector<int> b = next.b;
      for_each_length(inst, new_success, 0, b, prob, [&](const std::vector<int>& bv, double pr) {
        State w2 = next;
        for (int j : new_success) w2.b[j] = w2.a[j] = bv[j];
        const int idx = space.index_of(w2);
        if (idx < 0) throw InvariantViolation("transition reached a state outside the enumeration");
        Q(i, idx) += pr;
      });
      if (start == 0) break;
    }
    const double row = Q.row(i).sum();
    if (std::abs(row - 1.0) > 1e-12) {
      throw InvariantViolation("transition row " + std::to_string(i) + " sums to " +
                               std::to_string(row));
    }
  }
  return Q;
}

Eigen::VectorXd stationary_exact(const Eigen::MatrixXd& Q) {
  const Eigen::Index n = Q.rows();
  if (Q.cols() != n || n == 0) throw DimensionError("transition matrix must be square and non-empty");
  Eigen::MatrixXd A = Q.transpose() - Eigen::MatrixXd::Identity(n, n);
  A.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::VectorXd pi = A.fullPivLu().solve(rhs);
  const double residual = (Q.transpose() * pi - pi).lpNorm<Eigen::Infinity>();
  if (!(residual <= 1e-12) || std::abs(pi.sum() - 1.0) > 1e-12) {
    throw SolverError("stationary solve did not converge",
                      "residual " + std::to_string(residual));
  }
  return pi;
}

Eigen::VectorXd product_form(const StateSpace& space) {
  const Instance& inst = space.instance();
  const int k = inst.graph.num_links();
  Eigen::VectorXd out(static_cast<Eigen::Index>(space.size()));
  for (std::size_t i = 0; i < space.size(); ++i) {
    const State& w = space.states()[i];
    const LinkMask s = success_and_collisions(inst.graph, w.x).successful;
    double v = 1.0;
    for (int j = 0; j < k; ++j) {
      if (!has_link(w.x, j)) {
        v *= 1.0 - inst.p[j];
      } else {
        v *= inst.p[j];
        if (has_link(s, j)) v *= inst.pmf[j][w.b[j]];
      }
    }
    out(static_cast<Eigen::Index>(i)) = v;
  }
  return out / out.sum();
}

State reverse(const State& w) {
  State r = w;
  for (std::size_t j = 0; j < w.b.size(); ++j) {
    if (has_link(w.x, static_cast<int>(j))) r.a[j] = w.b[j] - w.a[j] + 1;
  }
  return r;
}

Report verify(const Instance& inst) {
  const StateSpace space = enumerate_states(inst);
  const Eigen::MatrixXd Q = transition_kernel(space);
  const Eigen::VectorXd pi = stationary_exact(Q);
  const Eigen::VectorXd closed = product_form(space);
  const auto n = static_cast<Eigen::Index>(space.size());
  const int k = inst.graph.num_links();

  Report rep;
  rep.num_states = space.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    rep.max_row_sum_error = std::max(rep.max_row_sum_error, std::abs(Q.row(i).sum() - 1.0));
  }
  rep.max_product_form_error = (pi - closed).lpNorm<Eigen::Infinity>();

  // Marginal against the on-off product form with T_k = E(tau_k).
  ProtocolParams params = ProtocolParams::uniform(k, 0.5, inst.gamma, 1, 1.0);
  params.p = inst.p;
  const auto onoff = ProductForm(inst.graph, params).distribution_from_lengths(inst.mean_lengths());
  std::vector<double> marginal(onoff.prob.size(), 0.0);
  std::vector<double> length_sum(onoff.prob.size(), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const State& w = space.states()[i];
    marginal[w.x] += pi(i);
    const LinkMask s = success_and_collisions(inst.graph, w.x).successful;
    double prod = 1.0;
    for (LinkMask m = s; m != 0; m &= m - 1) {
      const int j = std::countr_zero(m);
      prod *= inst.pmf[j][w.b[j]];
    }
    length_sum[w.x] += prod;
  }
  const auto t = inst.mean_lengths();
  for (std::size_t x = 0; x < marginal.size(); ++x) {
    const double d = std::abs(marginal[x] - onoff.prob[x]);
    rep.max_marginal_error = std::max(rep.max_marginal_error, d);
    rep.marginal_tv += 0.5 * d;
    const auto sc = success_and_collisions(inst.graph, x);
    double expect = std::pow(static_cast<double>(inst.gamma), sc.collision_number);
    for (LinkMask m = sc.successful; m != 0; m &= m - 1) expect *= t[std::countr_zero(m)];
    rep.max_length_sum_error = std::max(rep.max_length_sum_error, std::abs(length_sum[x] - expect));
  }

  std::vector<int> rev(space.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const State& w = space.states()[i];
    const State gw = reverse(w);
    const int gi = space.index_of(gw);
    if (gi < 0 || !(reverse(gw) == w)) {
      rep.involution = false;
      rev[i] = -1;
    } else {
      rev[i] = gi;
    }
  }
  if (rep.involution) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double back = Q(rev[j], rev[i]);
        if ((Q(i, j) > 0.0) != (back > 0.0)) rep.support_symmetry = false;
        rep.max_balance_error =
            std::max(rep.max_balance_error, std::abs(closed(i) * Q(i, j) - closed(j) * back));
      }
    }
  }
  return rep;
}

std::vector<NamedInstance> standard_suite() {
  auto pmf = [](std::initializer_list<std::pair<int, double>> entries) {
    LengthPmf out;
    for (const auto& [b, pr] : entries) {
      if (out.size() <= static_cast<std::size_t>(b)) out.resize(b + 1, 0.0);
      out[b] = pr;
    }
    return out;
  };
  std::vector<NamedInstance> suite;
  suite.push_back({"single_link_fixed",
                   {topology::edgeless(1), {0.3}, 2, {pmf({{4, 1.0}})}}});
  suite.push_back({"single_link_two_point",
                   {topology::edgeless(1), {1.0 / 16}, 3, {pmf({{2, 0.5}, {6, 0.5}})}}});
  suite.push_back({"pair_complete",
                   {topology::complete(2), {0.5, 0.5}, 2, {pmf({{4, 1.0}}), pmf({{4, 1.0}})}}});
  suite.push_back({"pair_complete_asymmetric",
                   {topology::complete(2),
                    {0.3, 0.6},
                    3,
                    {pmf({{1, 0.25}, {5, 0.75}}), pmf({{2, 0.4}, {6, 0.6}})}}});
  suite.push_back({"pair_edgeless",
                   {topology::edgeless(2), {0.4, 0.2}, 2, {pmf({{3, 1.0}}), pmf({{2, 0.5}, {5, 0.5}})}}});
  suite.push_back({"path3",
                   {topology::path(3),
                    {0.35, 0.25, 0.45},
                    2,
                    {pmf({{3, 0.5}, {5, 0.5}}), pmf({{2, 1.0}}), pmf({{1, 0.3}, {4, 0.7}})}}});
  suite.push_back({"triangle",
                   {topology::complete(3),
                    {0.2, 0.3, 0.4},
                    4,
                    {pmf({{6, 1.0}}), pmf({{2, 0.5}, {4, 0.5}}), pmf({{3, 1.0}})}}});
  suite.push_back({"edge_plus_isolated",
                   {ConflictGraph(3, std::vector<std::pair<int, int>>{{0, 1}}),
                    {0.5, 0.3, 0.6},
                    1,
                    {pmf({{2, 1.0}}), pmf({{3, 0.5}, {4, 0.5}}), pmf({{1, 0.5}, {3, 0.5}})}}});
  suite.push_back({"edgeless3",
                   {topology::edgeless(3),
                    {0.25, 0.5, 0.15},
                    2,
                    {pmf({{2, 1.0}}), pmf({{1, 0.5}, {3, 0.5}}), pmf({{4, 1.0}})}}});
  return suite;
}

}  // namespace csma::oracle
