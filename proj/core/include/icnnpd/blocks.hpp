#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icnnpd/icnn.hpp"
#include "icnnpd/linops.hpp"

namespace icnnpd {

/// coeff * op applied to primal block `primal`; a null op is the identity.
struct BlockTerm {
  std::size_t primal;
  OperatorPtr op;
  double coeff = 1.0;
};

/// One output component of a K_i: the sum of its terms, shifted by `shift`
/// (the matching slice of beta_i) before the nonlinearity is applied.
struct DualRow {
  Shape shape;
  std::vector<BlockTerm> terms;
  Tensor shift;
};

enum class DualRole {
  Fidelity,  // f_0(A x), present when the data term is dualized
  Epigraph,  // indicator of {(p, q) | h(p) <= q} for a hidden layer
  Final,     // gamma * sum_j a_j h(w_j + b_j)
};

struct DualBlock {
  DualRole role;
  std::size_t layer = 0;  // 1-based network layer; 0 for the fidelity block
  std::vector<DualRow> rows;
  Activation activation;
  /// Final block only: outer nonnegative weights a (ones when the last
  /// layer is kept as is) and whether a linear row for a residual z_{L-1}
  /// follows the main row.
  Tensor outer_weight;
  bool residual_row = false;
  std::string label;
};

/// K_0..K_L and beta_0..beta_L for the constrained reformulation, stored
/// blockwise. Primal block 0 is x; block j >= 1 is the auxiliary z_j.
struct BlockSystem {
  std::vector<Shape> primal_shapes;
  std::vector<DualBlock> duals;
  /// True when the last two layers were merged into a single separable
  /// final block (nonnegative dense read-out over a ReLU-type layer).
  bool folded = false;
  /// Constant added to the network output by a folded read-out bias.
  double folded_constant = 0.0;
  std::optional<std::size_t> fidelity_block;

  std::size_t primal_count() const noexcept { return primal_shapes.size(); }
  std::size_t primal_size() const;

  /// K_i as a block operator on the flattened stack u = (x, z_1, ...).
  OperatorPtr block_operator(std::size_t i) const;
  /// beta_i, flattened in the same row order as block_operator(i).
  Tensor beta(std::size_t i) const;
  /// All K_i stacked vertically.
  OperatorPtr stacked_operator() const;
};

struct AssembleOptions {
  bool fold_final_layer = true;
};

/// Builds the block system for the network, plus K_0 = (A 0 ... 0) when a
/// forward operator is given.
BlockSystem assemble_blocks(const IcnnSpec& icnn, const OperatorPtr& forward = nullptr,
                            const AssembleOptions& options = {});

/// Whether the last layer can be merged into the previous one.
bool can_fold_final_layer(const IcnnSpec& icnn);

}  // namespace icnnpd
