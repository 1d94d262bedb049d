#include "icnnpd/linops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace icnnpd {

const char* to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Identity: return "Identity";
    case OperatorKind::Dense: return "Dense";
    case OperatorKind::Conv2D: return "Conv2D";
    case OperatorKind::AvgPool2D: return "AvgPool2D";
    case OperatorKind::DiagonalMask: return "DiagonalMask";
    case OperatorKind::Radon: return "Radon";
    case OperatorKind::Compose: return "Compose";
    case OperatorKind::Block: return "Block";
  }
  return "?";
}

LinearOperator::LinearOperator(Shape input, Shape output,
                               std::optional<double> norm_bound)
    : input_shape_(std::move(input)),
      output_shape_(std::move(output)),
      input_size_(shape_size(input_shape_)),
      output_size_(shape_size(output_shape_)),
      norm_bound_(norm_bound) {}

std::string LinearOperator::describe() const {
  return std::string(to_string(kind())) + " " + to_string(input_shape_) +
         " -> " + to_string(output_shape_);
}

Tensor LinearOperator::apply(const Tensor& x) const {
  require_shape(describe() + " apply", input_shape_, x.shape());
  Tensor y(output_shape_);
  apply_add(x.data(), 1.0, y.data());
  return y;
}

Tensor LinearOperator::adjoint(const Tensor& w) const {
  require_shape(describe() + " adjoint", output_shape_, w.shape());
  Tensor x(input_shape_);
  adjoint_add(w.data(), 1.0, x.data());
  return x;
}

// Identity --------------------------------------------------------------

IdentityOperator::IdentityOperator(Shape shape)
    : LinearOperator(shape, shape, 1.0) {}

void IdentityOperator::apply_add(std::span<const double> x, double alpha,
                                 std::span<double> y) const {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

void IdentityOperator::adjoint_add(std::span<const double> w, double alpha,
                                   std::span<double> x) const {
  apply_add(w, alpha, x);
}

// Dense -----------------------------------------------------------------

namespace {

double frobenius(const Tensor& t) { return norm2(t); }

Shape dense_rows(const Tensor& matrix) {
  if (matrix.rank() != 2) {
    throw Error(ErrorKind::InvalidArgument, "Dense: matrix must have rank 2, got shape " +
                                                to_string(matrix.shape()));
  }
  return Shape{matrix.shape()[0]};
}

}  // namespace

DenseOperator::DenseOperator(Tensor matrix, Shape input_shape)
    : LinearOperator(std::move(input_shape), dense_rows(matrix), frobenius(matrix)),
      matrix_(std::move(matrix)),
      rows_(matrix_.shape()[0]),
      cols_(matrix_.shape()[1]) {
  if (input_size() != cols_) {
    throw ShapeError("Dense input", Shape{cols_}, this->input_shape());
  }
}

DenseOperator::DenseOperator(Tensor matrix)
    : DenseOperator(matrix, Shape{matrix.rank() == 2 ? matrix.shape()[1] : 0}) {}

std::string DenseOperator::describe() const {
  return "Dense[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

void DenseOperator::apply_add(std::span<const double> x, double alpha,
                              std::span<double> y) const {
  const auto m = matrix_.data();
  for (std::size_t r = 0; r < rows_; ++r) {
    y[r] += alpha * dot(m.subspan(r * cols_, cols_), x);
  }
}

void DenseOperator::adjoint_add(std::span<const double> w, double alpha,
                                std::span<double> x) const {
  const auto m = matrix_.data();
  for (std::size_t r = 0; r < rows_; ++r) {
    const double s = alpha * w[r];
    if (s == 0.0) continue;
    const double* row = m.data() + r * cols_;
    for (std::size_t c = 0; c < cols_; ++c) x[c] += s * row[c];
  }
}

std::vector<NegativeCoefficient> DenseOperator::negative_coefficients() const {
  std::vector<NegativeCoefficient> out;
  for (std::size_t i = 0; i < matrix_.size(); ++i) {
    if (matrix_[i] < 0.0) out.push_back({i, matrix_[i]});
  }
  return out;
}

// Conv2D ----------------------------------------------------------------

namespace {

Shape conv_input(const Tensor& f, std::size_t h, std::size_t w) {
  if (f.rank() != 4 || f.shape()[2] != f.shape()[3] || f.shape()[2] % 2 == 0) {
    throw Error(ErrorKind::InvalidArgument,
                "Conv2D: filters must be [C_out, C_in, k, k] with odd k, got " +
                    to_string(f.shape()));
  }
  if (h == 0 || w == 0) throw Error(ErrorKind::InvalidArgument, "Conv2D: empty image");
  return Shape{f.shape()[1], h, w};
}

// Young's inequality per channel pair: ||f * x|| <= ||f||_1 ||x||.
double conv_bound(const Tensor& f) {
  const std::size_t co = f.shape()[0], ci = f.shape()[1], kk = f.shape()[2] * f.shape()[3];
  double total = 0.0;
  for (std::size_t o = 0; o < co; ++o) {
    for (std::size_t c = 0; c < ci; ++c) {
      double l1 = 0.0;
      for (std::size_t t = 0; t < kk; ++t) l1 += std::abs(f[(o * ci + c) * kk + t]);
      total += l1 * l1;
    }
  }
  return std::sqrt(total);
}

}  // namespace

Conv2DOperator::Conv2DOperator(Tensor filters, std::size_t height, std::size_t width)
    : LinearOperator(conv_input(filters, height, width),
                     Shape{filters.shape()[0], height, width}, conv_bound(filters)),
      filters_(std::move(filters)),
      c_out_(filters_.shape()[0]),
      c_in_(filters_.shape()[1]),
      k_(filters_.shape()[2]),
      h_(height),
      w_(width) {}

std::string Conv2DOperator::describe() const {
  std::ostringstream os;
  os << "Conv2D[" << c_out_ << "x" << c_in_ << "x" << k_ << "x" << k_ << "] on "
     << h_ << "x" << w_;
  return os.str();
}

void Conv2DOperator::apply_add(std::span<const double> x, double alpha,
                               std::span<double> y) const {
  const long r = static_cast<long>(k_ / 2);
  const long H = static_cast<long>(h_), W = static_cast<long>(w_);
  for (std::size_t o = 0; o < c_out_; ++o) {
    double* yo = y.data() + o * h_ * w_;
    for (std::size_t c = 0; c < c_in_; ++c) {
      const double* xc = x.data() + c * h_ * w_;
      const double* f = filters_.data().data() + (o * c_in_ + c) * k_ * k_;
      for (long di = 0; di < static_cast<long>(k_); ++di) {
        const long oi = di - r;
        const long i0 = std::max(0L, -oi), i1 = std::min(H, H - oi);
        for (long dj = 0; dj < static_cast<long>(k_); ++dj) {
          const double wgt = alpha * f[di * static_cast<long>(k_) + dj];
          if (wgt == 0.0) continue;
          const long oj = dj - r;
          const long j0 = std::max(0L, -oj), j1 = std::min(W, W - oj);
          for (long i = i0; i < i1; ++i) {
            double* yrow = yo + i * W;
            const double* xrow = xc + (i + oi) * W + oj;
            for (long j = j0; j < j1; ++j) yrow[j] += wgt * xrow[j];
          }
        }
      }
    }
  }
}

void Conv2DOperator::adjoint_add(std::span<const double> w, double alpha,
                                 std::span<double> x) const {
  const long r = static_cast<long>(k_ / 2);
  const long H = static_cast<long>(h_), W = static_cast<long>(w_);
  for (std::size_t o = 0; o < c_out_; ++o) {
    const double* wo = w.data() + o * h_ * w_;
    for (std::size_t c = 0; c < c_in_; ++c) {
      double* xc = x.data() + c * h_ * w_;
      const double* f = filters_.data().data() + (o * c_in_ + c) * k_ * k_;
      for (long di = 0; di < static_cast<long>(k_); ++di) {
        const long oi = di - r;
        const long i0 = std::max(0L, -oi), i1 = std::min(H, H - oi);
        for (long dj = 0; dj < static_cast<long>(k_); ++dj) {
          const double wgt = alpha * f[di * static_cast<long>(k_) + dj];
          if (wgt == 0.0) continue;
          const long oj = dj - r;
          const long j0 = std::max(0L, -oj), j1 = std::min(W, W - oj);
          for (long i = i0; i < i1; ++i) {
            const double* wrow = wo + i * W;
            double* xrow = xc + (i + oi) * W + oj;
            for (long j = j0; j < j1; ++j) xrow[j] += wgt * wrow[j];
          }
        }
      }
    }
  }
}

std::vector<NegativeCoefficient> Conv2DOperator::negative_coefficients() const {
  std::vector<NegativeCoefficient> out;
  for (std::size_t i = 0; i < filters_.size(); ++i) {
    if (filters_[i] < 0.0) out.push_back({i, filters_[i]});
  }
  return out;
}

// AvgPool2D -------------------------------------------------------------

namespace {

Shape pool_output(const Shape& in, std::size_t p) {
  if (in.size() != 3) {
    throw Error(ErrorKind::InvalidArgument,
                "AvgPool2D: input must be [C, H, W], got " + to_string(in));
  }
  if (p == 0 || in[1] % p != 0 || in[2] % p != 0) {
    throw Error(ErrorKind::InvalidArgument,
                "AvgPool2D: pool size " + std::to_string(p) +
                    " does not divide spatial shape " + to_string(in));
  }
  return Shape{in[0], in[1] / p, in[2] / p};
}

}  // namespace

AvgPool2DOperator::AvgPool2DOperator(Shape input_shape, std::size_t pool)
    : LinearOperator(input_shape, pool_output(input_shape, pool),
                     1.0 / static_cast<double>(pool)),
      pool_(pool),
      c_(input_shape[0]),
      h_(input_shape[1]),
      w_(input_shape[2]) {}

std::string AvgPool2DOperator::describe() const {
  return "AvgPool2D[" + std::to_string(pool_) + "] on " + to_string(input_shape());
}

void AvgPool2DOperator::apply_add(std::span<const double> x, double alpha,
                                  std::span<double> y) const {
  const std::size_t ho = h_ / pool_, wo = w_ / pool_;
  const double s = alpha / static_cast<double>(pool_ * pool_);
  for (std::size_t c = 0; c < c_; ++c) {
    for (std::size_t i = 0; i < h_; ++i) {
      const double* xrow = x.data() + (c * h_ + i) * w_;
      double* yrow = y.data() + (c * ho + i / pool_) * wo;
      for (std::size_t j = 0; j < w_; ++j) yrow[j / pool_] += s * xrow[j];
    }
  }
}

void AvgPool2DOperator::adjoint_add(std::span<const double> w, double alpha,
                                    std::span<double> x) const {
  const std::size_t ho = h_ / pool_, wo = w_ / pool_;
  const double s = alpha / static_cast<double>(pool_ * pool_);
  for (std::size_t c = 0; c < c_; ++c) {
    for (std::size_t i = 0; i < h_; ++i) {
      double* xrow = x.data() + (c * h_ + i) * w_;
      const double* wrow = w.data() + (c * ho + i / pool_) * wo;
      for (std::size_t j = 0; j < w_; ++j) xrow[j] += s * wrow[j / pool_];
    }
  }
}

// DiagonalMask ----------------------------------------------------------

DiagonalMaskOperator::DiagonalMaskOperator(Tensor mask)
    : LinearOperator(mask.shape(), mask.shape(), norm_inf(mask)),
      mask_(std::move(mask)) {}

void DiagonalMaskOperator::apply_add(std::span<const double> x, double alpha,
                                     std::span<double> y) const {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * mask_[i] * x[i];
}

void DiagonalMaskOperator::adjoint_add(std::span<const double> w, double alpha,
                                       std::span<double> x) const {
  apply_add(w, alpha, x);
}

std::vector<NegativeCoefficient> DiagonalMaskOperator::negative_coefficients() const {
  std::vector<NegativeCoefficient> out;
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    if (mask_[i] < 0.0) out.push_back({i, mask_[i]});
  }
  return out;
}

// Compose ---------------------------------------------------------------

namespace {

const std::vector<OperatorPtr>& check_chain(const std::vector<OperatorPtr>& ops) {
  if (ops.empty()) throw Error(ErrorKind::InvalidArgument, "Compose: empty chain");
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (!ops[i]) throw Error(ErrorKind::InvalidArgument, "Compose: null operator");
    if (i > 0 && ops[i - 1]->output_shape() != ops[i]->input_shape()) {
      throw ShapeError("Compose link " + std::to_string(i), ops[i]->input_shape(),
                       ops[i - 1]->output_shape());
    }
  }
  return ops;
}

std::optional<double> chain_bound(const std::vector<OperatorPtr>& ops) {
  double b = 1.0;
  for (const auto& op : ops) {
    if (!op->norm_bound()) return std::nullopt;
    b *= *op->norm_bound();
  }
  return b;
}

}  // namespace

ComposeOperator::ComposeOperator(std::vector<OperatorPtr> ops)
    : LinearOperator(check_chain(ops).front()->input_shape(),
                     ops.back()->output_shape(), chain_bound(ops)),
      ops_(std::move(ops)) {}

std::string ComposeOperator::describe() const {
  std::string s = "Compose(";
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    if (i) s += " -> ";
    s += ops_[i]->describe();
  }
  return s + ")";
}

void ComposeOperator::apply_add(std::span<const double> x, double alpha,
                                std::span<double> y) const {
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t i = 0; i + 1 < ops_.size(); ++i) {
    std::vector<double> next(ops_[i]->output_size(), 0.0);
    ops_[i]->apply_add(cur, 1.0, next);
    cur.swap(next);
  }
  ops_.back()->apply_add(cur, alpha, y);
}

void ComposeOperator::adjoint_add(std::span<const double> w, double alpha,
                                  std::span<double> x) const {
  std::vector<double> cur(w.begin(), w.end());
  for (std::size_t i = ops_.size() - 1; i > 0; --i) {
    std::vector<double> next(ops_[i]->input_size(), 0.0);
    ops_[i]->adjoint_add(cur, 1.0, next);
    cur.swap(next);
  }
  ops_.front()->adjoint_add(cur, alpha, x);
}

std::vector<NegativeCoefficient> ComposeOperator::negative_coefficients() const {
  // Indices are reported into the concatenation of the parts' parameters.
  std::vector<NegativeCoefficient> out;
  for (const auto& op : ops_) {
    for (auto n : op->negative_coefficients()) out.push_back(n);
  }
  return out;
}

// Block -----------------------------------------------------------------

namespace {

std::size_t total_size(const std::vector<Shape>& shapes) {
  std::size_t n = 0;
  for (const auto& s : shapes) n += shape_size(s);
  return n;
}

std::vector<std::size_t> offsets(const std::vector<Shape>& shapes) {
  std::vector<std::size_t> off(shapes.size() + 1, 0);
  for (std::size_t i = 0; i < shapes.size(); ++i) off[i + 1] = off[i] + shape_size(shapes[i]);
  return off;
}

}  // namespace

BlockOperator::BlockOperator(std::vector<Shape> row_shapes,
                             std::vector<Shape> col_shapes,
                             std::vector<BlockEntry> entries)
    : LinearOperator(Shape{total_size(col_shapes)}, Shape{total_size(row_shapes)},
                     std::nullopt),
      row_shapes_(std::move(row_shapes)),
      col_shapes_(std::move(col_shapes)),
      row_offsets_(offsets(row_shapes_)),
      col_offsets_(offsets(col_shapes_)),
      entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.row >= row_shapes_.size() || e.col >= col_shapes_.size()) {
      throw Error(ErrorKind::InvalidArgument, "Block: entry index out of range");
    }
    const auto& rs = row_shapes_[e.row];
    const auto& cs = col_shapes_[e.col];
    if (e.op) {
      if (e.op->input_shape() != cs) throw ShapeError("Block entry input", cs, e.op->input_shape());
      if (e.op->output_shape() != rs) throw ShapeError("Block entry output", rs, e.op->output_shape());
    } else if (shape_size(rs) != shape_size(cs)) {
      throw ShapeError("Block identity entry", rs, cs);
    }
  }
}

std::string BlockOperator::describe() const {
  return "Block[" + std::to_string(row_shapes_.size()) + "x" +
         std::to_string(col_shapes_.size()) + "]";
}

void BlockOperator::apply_add(std::span<const double> x, double alpha,
                              std::span<double> y) const {
  for (const auto& e : entries_) {
    auto xs = x.subspan(col_offsets_[e.col], col_offsets_[e.col + 1] - col_offsets_[e.col]);
    auto ys = y.subspan(row_offsets_[e.row], row_offsets_[e.row + 1] - row_offsets_[e.row]);
    if (e.op) {
      e.op->apply_add(xs, alpha * e.coeff, ys);
    } else {
      for (std::size_t i = 0; i < ys.size(); ++i) ys[i] += alpha * e.coeff * xs[i];
    }
  }
}

void BlockOperator::adjoint_add(std::span<const double> w, double alpha,
                                std::span<double> x) const {
  for (const auto& e : entries_) {
    auto xs = x.subspan(col_offsets_[e.col], col_offsets_[e.col + 1] - col_offsets_[e.col]);
    auto ws = w.subspan(row_offsets_[e.row], row_offsets_[e.row + 1] - row_offsets_[e.row]);
    if (e.op) {
      e.op->adjoint_add(ws, alpha * e.coeff, xs);
    } else {
      for (std::size_t i = 0; i < xs.size(); ++i) xs[i] += alpha * e.coeff * ws[i];
    }
  }
}

// Factories and helpers --------------------------------------------------

OperatorPtr make_identity(Shape shape) {
  return std::make_shared<IdentityOperator>(std::move(shape));
}
OperatorPtr make_dense(Tensor matrix) {
  return std::make_shared<DenseOperator>(std::move(matrix));
}
OperatorPtr make_dense(Tensor matrix, Shape input_shape) {
  return std::make_shared<DenseOperator>(std::move(matrix), std::move(input_shape));
}
OperatorPtr make_conv2d(Tensor filters, std::size_t height, std::size_t width) {
  return std::make_shared<Conv2DOperator>(std::move(filters), height, width);
}
OperatorPtr make_avgpool2d(Shape input_shape, std::size_t pool) {
  return std::make_shared<AvgPool2DOperator>(std::move(input_shape), pool);
}
OperatorPtr make_mask(Tensor mask) {
  return std::make_shared<DiagonalMaskOperator>(std::move(mask));
}
OperatorPtr make_compose(std::vector<OperatorPtr> ops) {
  if (ops.size() == 1) return ops.front();
  return std::make_shared<ComposeOperator>(std::move(ops));
}

Tensor stack(std::span<const Tensor> blocks) {
  std::vector<double> flat;
  for (const auto& b : blocks) flat.insert(flat.end(), b.data().begin(), b.data().end());
  const std::size_t n = flat.size();
  return Tensor(Shape{n}, std::move(flat));
}

std::vector<Tensor> unstack(const Tensor& flat, std::span<const Shape> shapes) {
  std::vector<Tensor> out;
  std::size_t pos = 0;
  for (const auto& s : shapes) {
    const std::size_t n = shape_size(s);
    if (pos + n > flat.size()) throw ShapeError("unstack", Shape{pos + n}, flat.shape());
    out.emplace_back(s, std::vector<double>(flat.data().begin() + static_cast<long>(pos),
                                            flat.data().begin() + static_cast<long>(pos + n)));
    pos += n;
  }
  if (pos != flat.size()) throw ShapeError("unstack", Shape{pos}, flat.shape());
  return out;
}

Tensor materialize(const LinearOperator& op) {
  const std::size_t m = op.output_size(), n = op.input_size();
  Tensor dense(Shape{m, n});
  std::vector<double> e(n, 0.0), col(m);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    std::fill(col.begin(), col.end(), 0.0);
    op.apply_add(e, 1.0, col);
    for (std::size_t i = 0; i < m; ++i) dense[i * n + j] = col[i];
    e[j] = 0.0;
  }
  return dense;
}

}  // namespace icnnpd
