#include <gtest/gtest.h>

#include "common.hpp"
#include "icnnpd/blocks.hpp"

using namespace icnnpd;
using namespace testing_support;

namespace {

IcnnSpec toy_net(std::uint64_t seed, bool residual = false) {
  MlpTemplate t;
  t.input_dim = 4;
  t.hidden = {4, 4};
  t.residual = {residual};
  return random_admissible(seed, t);
}

}  // namespace

TEST(Blocks, TwoLayerStructure) {
  const auto net = two_layer_scalar_net();
  const auto sys = assemble_blocks(net, nullptr, {false});
  ASSERT_EQ(sys.duals.size(), 2u);
  EXPECT_EQ(sys.primal_count(), 2u);
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({1}, rng), z = random_tensor({1}, rng);
  const Tensor u = stack(std::vector<Tensor>{x, z});
  // K_1 u = (V0 x, z1), K_2 u = V1 x + W1 z1
  const Tensor k1 = sys.block_operator(0)->apply(u);
  EXPECT_DOUBLE_EQ(k1[0], x[0]);
  EXPECT_DOUBLE_EQ(k1[1], z[0]);
  const Tensor k2 = sys.block_operator(1)->apply(u);
  EXPECT_DOUBLE_EQ(k2[0], x[0] + z[0]);
  // beta_1 = (b0; 0)
  EXPECT_EQ(sys.beta(0).size(), 2u);
  EXPECT_EQ(sys.beta(0)[1], 0.0);
}

TEST(Blocks, FidelityBlockPrepended) {
  const auto net = toy_net(0);
  const auto a = make_dense(Tensor({3, 4}, 0.25));
  const auto sys = assemble_blocks(net, a);
  ASSERT_TRUE(sys.fidelity_block.has_value());
  EXPECT_EQ(*sys.fidelity_block, 0u);
  EXPECT_EQ(sys.duals[0].role, DualRole::Fidelity);
  EXPECT_THROW(assemble_blocks(net, make_dense(Tensor({3, 5}, 1.0))), ShapeError);
}

TEST(Blocks, BlockwiseEqualsMaterialized) {
  for (bool residual : {false, true}) {
    const auto net = toy_net(3, residual);
    const auto sys = assemble_blocks(net, make_identity({4}), {false});
    std::mt19937_64 rng(2);
    for (std::size_t i = 0; i < sys.duals.size(); ++i) {
      const auto op = sys.block_operator(i);
      const Tensor m = materialize(*op);
      const Tensor u = random_tensor({sys.primal_size()}, rng);
      const Tensor y = op->apply(u);
      for (std::size_t r = 0; r < op->output_size(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < op->input_size(); ++c) acc += m[r * op->input_size() + c] * u[c];
        EXPECT_NEAR(acc, y[r], 1e-12);
      }
      EXPECT_LE(adjoint_defect(*op, 100, i), 1e-8);
    }
    EXPECT_LE(adjoint_defect(*sys.stacked_operator(), 100, 9), 1e-8);
  }
}

TEST(Blocks, ConstraintLeftHandSidesLayerwise) {
  const auto net = toy_net(5, true);
  const auto sys = assemble_blocks(net, nullptr, {false});
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor({4}, rng);
  const auto tr = forward(net, x).trace;
  std::vector<Tensor> parts{x};
  for (const auto& z : tr) parts.push_back(z);
  const Tensor u = stack(parts);
  for (std::size_t i = 0; i < sys.duals.size() - 1; ++i) {
    const std::size_t layer = i + 1;
    const Tensor k = sys.block_operator(i)->apply(u) + sys.beta(i);
    const Tensor pre = preactivation(net, layer, x, layer > 1 ? &tr[layer - 2] : nullptr);
    const auto& act = net.layers[layer - 1].activation;
    for (std::size_t j = 0; j < pre.size(); ++j) {
      EXPECT_NEAR(k[j], pre[j], 1e-12);
      // On the trace the epigraph constraint is tight: h(p) = q.
      EXPECT_NEAR(act(k[j]), k[pre.size() + j], 1e-12);
    }
  }
}

TEST(Blocks, FoldedFinalLayer) {
  ConvTemplate c;
  c.image_side = 16;
  c.pool = 4;
  const auto net = random_admissible(2, c);
  EXPECT_TRUE(can_fold_final_layer(net));
  const auto sys = assemble_blocks(net);
  EXPECT_TRUE(sys.folded);
  EXPECT_EQ(sys.primal_count(), 2u);  // x and the convolutional activation
  const auto& fin = sys.duals.back();
  EXPECT_EQ(fin.role, DualRole::Final);
  EXPECT_EQ(fin.outer_weight.size(), c.hidden);
  for (double a : fin.outer_weight.data()) EXPECT_GE(a, 0.0);

  // Folded value: sum a_j h(K u + b)_j + folded constant equals R(x).
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({1, 16, 16}, rng, 0, 1);
  const auto tr = forward(net, x).trace;
  const Tensor u = stack(std::vector<Tensor>{x, tr[0]});
  const Tensor w = sys.block_operator(sys.duals.size() - 1)->apply(u) + sys.beta(sys.duals.size() - 1);
  double val = sys.folded_constant;
  for (std::size_t j = 0; j < w.size(); ++j) val += fin.outer_weight[j] * fin.activation(w[j]);
  EXPECT_NEAR(val, forward(net, x).value, 1e-10);
}

TEST(Blocks, RejectsInadmissible) {
  auto net = two_layer_scalar_net();
  net.layers[1].W = make_dense(Tensor({1, 1}, {-1.0}));
  EXPECT_THROW(assemble_blocks(net), Error);
}
