#include "icnnpd/blocks.hpp"

namespace icnnpd {

std::size_t BlockSystem::primal_size() const {
  std::size_t n = 0;
  for (const auto& s : primal_shapes) n += shape_size(s);
  return n;
}

OperatorPtr BlockSystem::block_operator(std::size_t i) const {
  const auto& block = duals.at(i);
  std::vector<Shape> rows;
  std::vector<BlockEntry> entries;
  for (std::size_t r = 0; r < block.rows.size(); ++r) {
    rows.push_back(block.rows[r].shape);
    for (const auto& t : block.rows[r].terms) entries.push_back({r, t.primal, t.op, t.coeff});
  }
  return std::make_shared<BlockOperator>(std::move(rows), primal_shapes, std::move(entries));
}

Tensor BlockSystem::beta(std::size_t i) const {
  std::vector<Tensor> parts;
  for (const auto& row : duals.at(i).rows) parts.push_back(row.shift);
  return stack(parts);
}

OperatorPtr BlockSystem::stacked_operator() const {
  std::vector<Shape> rows;
  std::vector<BlockEntry> entries;
  for (const auto& block : duals) {
    for (const auto& row : block.rows) {
      const std::size_t r = rows.size();
      rows.push_back(row.shape);
      for (const auto& t : row.terms) entries.push_back({r, t.primal, t.op, t.coeff});
    }
  }
  return std::make_shared<BlockOperator>(std::move(rows), primal_shapes, std::move(entries));
}

bool can_fold_final_layer(const IcnnSpec& icnn) {
  const std::size_t L = icnn.depth();
  if (L < 2) return false;
  const auto& last = icnn.layers[L - 1];
  const auto& prev = icnn.layers[L - 2];
  if (last.V || !last.W || last.residual || last.W->kind() != OperatorKind::Dense) return false;
  if (last.activation.kind != Activation::Kind::Identity) return false;
  if (prev.residual) return false;
  if (!last.W->negative_coefficients().empty()) return false;
  return last.W->output_size() == 1;
}

namespace {

// Terms computing V_{i-1} x + W_{i-1} z_{i-1} for layer i (1-based), where
// layer i-1's activation is primal block i-1.
std::vector<BlockTerm> preactivation_terms(const IcnnLayer& layer, std::size_t i) {
  std::vector<BlockTerm> terms;
  if (layer.V) terms.push_back({0, layer.V, 1.0});
  if (layer.W && i >= 2) terms.push_back({i - 1, layer.W, 1.0});
  return terms;
}

}  // namespace

BlockSystem assemble_blocks(const IcnnSpec& icnn, const OperatorPtr& forward,
                            const AssembleOptions& options) {
  const auto report = validate(icnn);
  if (!report.admissible()) throw Error(ErrorKind::Admissibility, report.summary());

  const std::size_t L = icnn.depth();
  BlockSystem sys;
  sys.folded = options.fold_final_layer && can_fold_final_layer(icnn);
  // Number of auxiliary activations kept as primal variables.
  const std::size_t M = sys.folded ? L - 2 : L - 1;

  sys.primal_shapes.push_back(icnn.input_shape);
  for (std::size_t j = 1; j <= M; ++j) sys.primal_shapes.push_back(layer_output_shape(icnn, j));

  if (forward) {
    if (forward->input_shape() != icnn.input_shape) {
      throw ShapeError("forward operator input", icnn.input_shape, forward->input_shape());
    }
    DualBlock fid;
    fid.role = DualRole::Fidelity;
    fid.label = "fidelity";
    fid.rows.push_back({forward->output_shape(), {{0, forward, 1.0}}, Tensor(forward->output_shape())});
    sys.fidelity_block = sys.duals.size();
    sys.duals.push_back(std::move(fid));
  }

  for (std::size_t i = 1; i <= M; ++i) {
    const auto& layer = icnn.layers[i - 1];
    const Shape out = layer_output_shape(icnn, i);
    DualBlock epi;
    epi.role = DualRole::Epigraph;
    epi.layer = i;
    epi.activation = layer.activation;
    epi.label = "epigraph" + std::to_string(i);
    epi.rows.push_back({out, preactivation_terms(layer, i), layer.b});
    std::vector<BlockTerm> q_terms{{i, nullptr, 1.0}};
    if (layer.residual) q_terms.push_back({i - 1, nullptr, -1.0});
    epi.rows.push_back({out, std::move(q_terms), Tensor(out)});
    sys.duals.push_back(std::move(epi));
  }

  DualBlock fin;
  fin.role = DualRole::Final;
  fin.label = "final";
  if (sys.folded) {
    const auto& hidden = icnn.layers[L - 2];
    const auto& readout = icnn.layers[L - 1];
    const Shape out = layer_output_shape(icnn, L - 1);
    fin.layer = L - 1;
    fin.activation = hidden.activation;
    fin.rows.push_back({out, preactivation_terms(hidden, L - 1), hidden.b});
    const auto& dense = static_cast<const DenseOperator&>(*readout.W);
    fin.outer_weight = dense.matrix().reshaped(out);
    sys.folded_constant = readout.b[0];
  } else {
    const auto& last = icnn.layers[L - 1];
    fin.layer = L;
    fin.activation = last.activation;
    fin.rows.push_back({Shape{1}, preactivation_terms(last, L), last.b});
    fin.outer_weight = Tensor(Shape{1}, 1.0);
    if (last.residual) {
      fin.residual_row = true;
      fin.rows.push_back({Shape{1}, {{L - 1, nullptr, 1.0}}, Tensor(Shape{1})});
    }
  }
  if (fin.rows.front().terms.empty()) {
    throw Error(ErrorKind::Admissibility, "final layer does not depend on x or z");
  }
  sys.duals.push_back(std::move(fin));
  return sys;
}

}  // namespace icnnpd
