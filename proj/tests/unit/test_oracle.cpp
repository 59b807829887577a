#include <gtest/gtest.h>

#include "csma/errors.hpp"
#include "csma/oracle.hpp"

using namespace csma;
using namespace csma::oracle;

namespace {

LengthPmf fixed(int b) {
  LengthPmf out(static_cast<std::size_t>(b) + 1, 0.0);
  out[static_cast<std::size_t>(b)] = 1.0;
  return out;
}

State idle(int k) { return State{0, std::vector<int>(k, 0), std::vector<int>(k, 0)}; }

}  // namespace

TEST(Oracle, SingleLinkStateCount) {
  const Instance inst{topology::complete(1), {1.0 / 16}, 5, {fixed(2)}};
  const auto space = enumerate_states(inst);
  // Idle, (b=2, a=2), (b=2, a=1).
  EXPECT_EQ(space.size(), 3u);
}

TEST(Oracle, PairStateCount) {
  const Instance inst{topology::complete(2), {0.5, 0.5}, 2, {fixed(2), fixed(2)}};
  const auto space = enumerate_states(inst);
  // Idle, two per lone success on either link, two collision residuals.
  EXPECT_EQ(space.size(), 7u);
  State bad = idle(2);
  bad.x = 1;
  bad.b[0] = 2;
  bad.a[0] = 3;
  EXPECT_EQ(space.index_of(bad), -1);
}

TEST(Oracle, KernelRowsAndKnownEntries) {
  const Instance one{topology::complete(1), {1.0 / 16}, 5, {fixed(2)}};
  const auto s1 = enumerate_states(one);
  const auto q1 = transition_kernel(s1);
  for (Eigen::Index i = 0; i < q1.rows(); ++i) EXPECT_NEAR(q1.row(i).sum(), 1.0, 1e-12);
  const int i0 = s1.index_of(idle(1));
  ASSERT_GE(i0, 0);
  EXPECT_NEAR(q1(i0, i0), 15.0 / 16, 1e-15);

  const Instance two{topology::complete(2), {0.5, 0.5}, 2, {fixed(2), fixed(2)}};
  const auto s2 = enumerate_states(two);
  const auto q2 = transition_kernel(s2);
  State col{0b11, {2, 2}, {2, 2}};
  const int ic = s2.index_of(col);
  ASSERT_GE(ic, 0);
  EXPECT_NEAR(q2(s2.index_of(idle(2)), ic), 0.25, 1e-15);
}

TEST(Oracle, ReverseIsAnInvolution) {
  const State w{0b1, {5}, {2}};
  EXPECT_EQ(reverse(w).a[0], 4);
  EXPECT_EQ(reverse(reverse(w)), w);
}

TEST(Oracle, StandardSuiteAgreesWithClosedForm) {
  for (const auto& [name, inst] : standard_suite()) {
    const auto rep = verify(inst);
    EXPECT_LE(rep.max_row_sum_error, 1e-12) << name;
    EXPECT_LE(rep.max_product_form_error, 1e-9) << name;
    EXPECT_LE(rep.max_marginal_error, 1e-9) << name;
    EXPECT_LT(rep.max_balance_error, 1e-12) << name;
    EXPECT_LE(rep.max_length_sum_error, 1e-12) << name;
    EXPECT_TRUE(rep.involution) << name;
    EXPECT_TRUE(rep.support_symmetry) << name;
  }
}

TEST(Oracle, Caps) {
  const Instance big{topology::edgeless(4), {0.1, 0.1, 0.1, 0.1}, 1, {fixed(1), fixed(1), fixed(1), fixed(1)}};
  EXPECT_THROW(big.validate(), CapacityError);
  const Instance longer{topology::complete(1), {0.1}, 1, {fixed(9)}};
  EXPECT_THROW(longer.validate(), CapacityError);
  const Instance bad_pmf{topology::complete(1), {0.1}, 1, {LengthPmf{0.0, 0.5, 0.4}}};
  EXPECT_THROW(bad_pmf.validate(), Error);
}
