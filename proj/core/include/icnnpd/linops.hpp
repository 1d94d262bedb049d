#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icnnpd/tensor.hpp"

namespace icnnpd {

enum class OperatorKind {
  Identity,
  Dense,
  Conv2D,
  AvgPool2D,
  DiagonalMask,
  Radon,
  Compose,
  Block,
};

const char* to_string(OperatorKind kind);

/// A stored coefficient that breaks entrywise nonnegativity.
struct NegativeCoefficient {
  std::size_t index;
  double value;
};

/// Linear map between tensor shapes with an exact adjoint.
///
/// Operators are immutable once built and are shared through OperatorPtr.
/// Derived classes implement the accumulating kernels; the checked
/// apply/adjoint wrappers live here.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return output_shape_; }
  std::size_t input_size() const noexcept { return input_size_; }
  std::size_t output_size() const noexcept { return output_size_; }

  virtual OperatorKind kind() const noexcept = 0;
  virtual std::string describe() const;

  /// Certified upper bound on the operator norm, when one is known in
  /// closed form.
  std::optional<double> norm_bound() const noexcept { return norm_bound_; }

  Tensor apply(const Tensor& x) const;
  Tensor adjoint(const Tensor& w) const;

  /// y += alpha * A x. No shape checks; spans must have the right length.
  virtual void apply_add(std::span<const double> x, double alpha,
                         std::span<double> y) const = 0;
  /// x += alpha * A^* w.
  virtual void adjoint_add(std::span<const double> w, double alpha,
                           std::span<double> x) const = 0;

  /// Entries of the stored parameters that are negative. Structurally
  /// nonnegative operators (pooling, identity) return nothing.
  virtual std::vector<NegativeCoefficient> negative_coefficients() const {
    return {};
  }

 protected:
  LinearOperator(Shape input, Shape output, std::optional<double> norm_bound);

 private:
  Shape input_shape_;
  Shape output_shape_;
  std::size_t input_size_;
  std::size_t output_size_;
  std::optional<double> norm_bound_;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(Shape shape);
  OperatorKind kind() const noexcept override { return OperatorKind::Identity; }
  void apply_add(std::span<const double> x, double alpha,
                 std::span<double> y) const override;
  void adjoint_add(std::span<const double> w, double alpha,
                   std::span<double> x) const override;
};

/// Matrix of shape [m, n] acting on any input of n entries; output is [m].
class DenseOperator final : public LinearOperator {
 public:
  DenseOperator(Tensor matrix, Shape input_shape);
  explicit DenseOperator(Tensor matrix);

  OperatorKind kind() const noexcept override { return OperatorKind::Dense; }
  std::string describe() const override;
  const Tensor& matrix() const noexcept { return matrix_; }

  void apply_add(std::span<const double> x, double alpha,
                 std::span<double> y) const override;
  void adjoint_add(std::span<const double> w, double alpha,
                   std::span<double> x) const override;
  std::vector<NegativeCoefficient> negative_coefficients() const override;

 private:
  Tensor matrix_;
  std::size_t rows_;
  std::size_t cols_;
};

/// Multi-channel 2-D convolution (cross-correlation) with stride 1, zero
/// padding and "same" output size. Filters have shape [C_out, C_in, k, k]
/// with odd k; input is [C_in, H, W] and output [C_out, H, W].
class Conv2DOperator final : public LinearOperator {
 public:
  Conv2DOperator(Tensor filters, std::size_t height, std::size_t width);

  OperatorKind kind() const noexcept override { return OperatorKind::Conv2D; }
  std::string describe() const override;
  const Tensor& filters() const noexcept { return filters_; }

  void apply_add(std::span<const double> x, double alpha,
                 std::span<double> y) const override;
  void adjoint_add(std::span<const double> w, double alpha,
                   std::span<double> x) const override;
  std::vector<NegativeCoefficient> negative_coefficients() const override;

 private:
  Tensor filters_;
  std::size_t c_out_, c_in_, k_, h_, w_;
};

/// Non-overlapping p x p average pooling over [C, H, W]. H and W must be
/// multiples of p.
class AvgPool2DOperator final : public LinearOperator {
 public:
  AvgPool2DOperator(Shape input_shape, std::size_t pool);

  OperatorKind kind() const noexcept override { return OperatorKind::AvgPool2D; }
  std::string describe() const override;
  std::size_t pool() const noexcept { return pool_; }

  void apply_add(std::span<const double> x, double alpha,
                 std::span<double> y) const override;
  void adjoint_add(std::span<const double> w, double alpha,
                   std::span<double> x) const override;

 private:
  std::size_t pool_, c_, h_, w_;
};

/// Pointwise multiplication by a fixed mask tensor.
class DiagonalMaskOperator final : public LinearOperator {
 public:
  explicit DiagonalMaskOperator(Tensor mask);

  OperatorKind kind() const noexcept override { return OperatorKind::DiagonalMask; }
  const Tensor& mask() const noexcept { return mask_; }

  void apply_add(std::span<const double> x, double alpha,
                 std::span<double> y) const override;
  void adjoint_add(std::span<const double> w, double alpha,
                   std::span<double> x) const override;
  std::vector<NegativeCoefficient> negative_coefficients() const override;

 private:
  Tensor mask_;
};

/// Chain of operators; ops.front() is applied first.
class ComposeOperator final : public LinearOperator {
 public:
  explicit ComposeOperator(std::vector<OperatorPtr> ops);

  OperatorKind kind() const noexcept override { return OperatorKind::Compose; }
  std::string describe() const override;
  const std::vector<OperatorPtr>& ops() const noexcept { return ops_; }

  void apply_add(std::span<const double> x, double alpha,
                 std::span<double> y) const override;
  void adjoint_add(std::span<const double> w, double alpha,
                   std::span<double> x) const override;
  std::vector<NegativeCoefficient> negative_coefficients() const override;

 private:
  std::vector<OperatorPtr> ops_;
};

/// One nonzero block of a BlockOperator: coeff * op, where a null op means
/// the identity.
struct BlockEntry {
  std::size_t row;
  std::size_t col;
  OperatorPtr op;
  double coeff = 1.0;
};

/// Block matrix acting on the concatenation of column blocks (flattened to
/// a vector) and producing the concatenation of row blocks.
class BlockOperator final : public LinearOperator {
 public:
  BlockOperator(std::vector<Shape> row_shapes, std::vector<Shape> col_shapes,
                std::vector<BlockEntry> entries);

  OperatorKind kind() const noexcept override { return OperatorKind::Block; }
  std::string describe() const override;

  const std::vector<Shape>& row_shapes() const noexcept { return row_shapes_; }
  const std::vector<Shape>& col_shapes() const noexcept { return col_shapes_; }
  const std::vector<BlockEntry>& entries() const noexcept { return entries_; }

  void apply_add(std::span<const double> x, double alpha,
                 std::span<double> y) const override;
  void adjoint_add(std::span<const double> w, double alpha,
                   std::span<double> x) const override;

 private:
  std::vector<Shape> row_shapes_, col_shapes_;
  std::vector<std::size_t> row_offsets_, col_offsets_;
  std::vector<BlockEntry> entries_;
};

OperatorPtr make_identity(Shape shape);
OperatorPtr make_dense(Tensor matrix);
OperatorPtr make_dense(Tensor matrix, Shape input_shape);
OperatorPtr make_conv2d(Tensor filters, std::size_t height, std::size_t width);
OperatorPtr make_avgpool2d(Shape input_shape, std::size_t pool);
OperatorPtr make_mask(Tensor mask);
OperatorPtr make_compose(std::vector<OperatorPtr> ops);

/// Flattened concatenation helpers for stacked block vectors.
Tensor stack(std::span<const Tensor> blocks);
std::vector<Tensor> unstack(const Tensor& flat, std::span<const Shape> shapes);

/// Materializes the operator as a dense [output_size, input_size] matrix by
/// probing with unit vectors. Only meant for small instances.
Tensor materialize(const LinearOperator& op);

}  // namespace icnnpd
