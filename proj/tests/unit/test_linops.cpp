#include <gtest/gtest.h>

#include "common.hpp"
#include "icnnpd/oracles.hpp"
#include "icnnpd/power_iteration.hpp"

using namespace icnnpd;
using namespace testing_support;

namespace {

std::vector<OperatorPtr> zoo() {
  std::mt19937_64 rng(11);
  std::vector<OperatorPtr> ops;
  ops.push_back(make_identity({2, 3}));
  ops.push_back(make_dense(random_tensor({5, 4}, rng)));
  ops.push_back(make_dense(random_tensor({3, 8}, rng), {2, 2, 2}));
  ops.push_back(make_conv2d(random_tensor({3, 2, 3, 3}, rng), 5, 6));
  ops.push_back(make_avgpool2d({2, 4, 6}, 2));
  ops.push_back(make_mask(random_tensor({3, 3}, rng)));
  ops.push_back(make_compose({make_avgpool2d({3, 4, 4}, 2), make_dense(random_tensor({2, 12}, rng), {3, 2, 2})}));
  ops.push_back(std::make_shared<BlockOperator>(
      std::vector<Shape>{{2}, {3}}, std::vector<Shape>{{4}, {3}},
      std::vector<BlockEntry>{{0, 0, make_dense(random_tensor({2, 4}, rng)), 1.0},
                              {1, 1, nullptr, -1.0},
                              {1, 0, make_dense(random_tensor({3, 4}, rng)), 0.5}}));
  return ops;
}

}  // namespace

TEST(Linops, HandExamples) {
  EXPECT_EQ(make_mask(Tensor({3}, 1.0))->apply(Tensor({3}, {1, -2, 5})).values(),
            (std::vector<double>{1, -2, 5}));
  const auto d = make_dense(Tensor({2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(d->apply(Tensor({2}, {1, 1})).values(), (std::vector<double>{3, 7}));
  EXPECT_EQ(d->adjoint(Tensor({2}, {1, 0})).values(), (std::vector<double>{1, 2}));
  const auto c = make_conv2d(Tensor({1, 1, 1, 1}, {2.0}), 3, 3);
  EXPECT_EQ(c->apply(Tensor({1, 3, 3}, 1.0)).values(), std::vector<double>(9, 2.0));
}

TEST(Linops, ConvZeroPaddingSame) {
  // 3x3 box filter on a 3x3 ones image counts in-bounds neighbours.
  const auto c = make_conv2d(Tensor({1, 1, 3, 3}, 1.0), 3, 3);
  EXPECT_EQ(c->apply(Tensor({1, 3, 3}, 1.0)).values(),
            (std::vector<double>{4, 6, 4, 6, 9, 6, 4, 6, 4}));
}

TEST(Linops, AvgPool) {
  const auto p = make_avgpool2d({1, 2, 2}, 2);
  EXPECT_DOUBLE_EQ(p->apply(Tensor({1, 2, 2}, {1, 2, 3, 6}))[0], 3.0);
  EXPECT_EQ(p->adjoint(Tensor({1, 1, 1}, {4.0})).values(), std::vector<double>(4, 1.0));
  EXPECT_LE(adjoint_defect(*p, 100, 3), 1e-12);
  EXPECT_THROW(make_avgpool2d({1, 5, 4}, 2), Error);
}

TEST(Linops, MaskSelfAdjoint) {
  std::mt19937_64 rng(2);
  const Tensor m = random_tensor({4}, rng);
  const auto op = make_mask(m);
  const Tensor w = random_tensor({4}, rng);
  EXPECT_EQ(op->apply(w), op->adjoint(w));
}

TEST(Linops, AdjointIdentityAllKinds) {
  for (const auto& op : zoo()) {
    EXPECT_LE(adjoint_defect(*op, 100, 5), 1e-8) << op->describe();
  }
}

TEST(Linops, Linearity) {
  std::mt19937_64 rng(9);
  for (const auto& op : zoo()) {
    const Tensor x = random_tensor(op->input_shape(), rng);
    const Tensor y = random_tensor(op->input_shape(), rng);
    const Tensor lhs = op->apply(1.7 * x + (-0.3) * y);
    const Tensor rhs = 1.7 * op->apply(x) + (-0.3) * op->apply(y);
    EXPECT_LE(norm2(lhs - rhs), 1e-10 * (1.0 + norm2(rhs))) << op->describe();
  }
}

TEST(Linops, ShapeErrorsNameShapes) {
  const auto d = make_dense(Tensor({2, 2}, {1, 2, 3, 4}));
  try {
    d->apply(Tensor({3}));
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.expected(), (Shape{2}));
    EXPECT_EQ(e.actual(), (Shape{3}));
  }
  EXPECT_THROW(d->adjoint(Tensor({1})), ShapeError);
}

TEST(Linops, NormBoundsHold) {
  std::mt19937_64 rng(21);
  for (const auto& op : zoo()) {
    if (!op->norm_bound()) continue;
    for (int k = 0; k < 20; ++k) {
      const Tensor x = random_tensor(op->input_shape(), rng);
      EXPECT_LE(norm2(op->apply(x)), *op->norm_bound() * norm2(x) * (1 + 1e-12)) << op->describe();
    }
  }
}

TEST(Linops, MaterializeMatchesApply) {
  std::mt19937_64 rng(4);
  for (const auto& op : zoo()) {
    const Tensor m = materialize(*op);
    const Tensor x = random_tensor(op->input_shape(), rng);
    const Tensor y = op->apply(x);
    for (std::size_t r = 0; r < op->output_size(); ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < op->input_size(); ++c) acc += m[r * op->input_size() + c] * x[c];
      EXPECT_NEAR(acc, y[r], 1e-12);
    }
  }
}

TEST(PowerIteration, Examples) {
  const auto e = estimate_norm(*make_dense(Tensor({2, 2}, {3, 0, 0, 1})));
  EXPECT_NEAR(e.value, 3.0, 1e-6);
  EXPECT_NEAR(e.inflated, 3.03, 1e-5);
  EXPECT_TRUE(e.converged);
  const auto m = estimate_norm(*make_mask(Tensor({4}, {0, 1, 1, 0})));
  EXPECT_NEAR(m.value, 1.0, 1e-6);
}

TEST(PowerIteration, MatchesJacobiOracle) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 5; ++k) {
    const Tensor a = random_tensor({8, 8}, rng);
    NormEstimateOptions o;
    o.tol = 1e-12;
    o.max_iters = 20000;
    const auto e = estimate_norm(*make_dense(a), o);
    EXPECT_NEAR(e.value, oracles::spectral_norm(a), 1e-5);
  }
}

TEST(PowerIteration, MonotoneAndDeterministic) {
  std::mt19937_64 rng(3);
  const auto op = make_conv2d(random_tensor({2, 1, 3, 3}, rng), 6, 6);
  const auto a = estimate_norm(*op, {1e-6, 500, 7, 1.01});
  const auto b = estimate_norm(*op, {1e-6, 500, 7, 1.01});
  EXPECT_EQ(a.history, b.history);
  for (std::size_t i = 1; i < a.history.size(); ++i) EXPECT_GE(a.history[i], a.history[i - 1] - 1e-12);
  for (int k = 0; k < 50; ++k) {
    const Tensor x = random_tensor(op->input_shape(), rng);
    EXPECT_LE(norm2(op->apply(x)), (a.value + 1e-6) * norm2(x));
  }
}
