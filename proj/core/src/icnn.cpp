#include "icnnpd/icnn.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace icnnpd {

bool Activation::valid() const noexcept {
  switch (kind) {
    case Kind::ReLU: return alpha == 0.0;
    case Kind::LeakyReLU: return alpha >= 0.0 && alpha < 1.0;
    case Kind::Identity: return true;
  }
  return false;
}

std::string Activation::name() const {
  switch (kind) {
    case Kind::ReLU: return "relu";
    case Kind::LeakyReLU: return "leaky_relu";
    case Kind::Identity: return "identity";
  }
  return "?";
}

std::string AdmissibilityReport::summary() const {
  if (violations.empty()) return "admissible";
  std::ostringstream os;
  for (const auto& v : violations) os << "layer " << v.layer << ": " << v.message << '\n';
  return os.str();
}

Shape layer_output_shape(const IcnnSpec& spec, std::size_t layer) {
  return spec.layers.at(layer - 1).b.shape();
}

AdmissibilityReport validate(const IcnnSpec& spec) {
  AdmissibilityReport report;
  auto add = [&](Violation::Kind kind, std::size_t layer, std::string msg,
                 std::optional<std::size_t> index = std::nullopt, double value = 0.0) {
    report.violations.push_back({kind, layer, index, value, std::move(msg)});
  };

  if (spec.layers.empty()) {
    add(Violation::Kind::MissingOperator, 0, "network has no layers");
    return report;
  }

  const Shape* prev_out = nullptr;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const std::size_t n = i + 1;
    const auto& layer = spec.layers[i];
    const Shape& out = layer.b.shape();

    if (!layer.b.all_finite()) add(Violation::Kind::NonFiniteParameter, n, "bias has non-finite entries");
    if (!layer.activation.valid()) {
      add(Violation::Kind::InvalidActivation, n,
          "activation " + layer.activation.name() + " has invalid slope " +
              std::to_string(layer.activation.alpha),
          std::nullopt, layer.activation.alpha);
    }

    if (layer.V) {
      if (layer.V->input_shape() != spec.input_shape) {
        add(Violation::Kind::ShapeBreak, n,
            "V input " + to_string(layer.V->input_shape()) + " != network input " +
                to_string(spec.input_shape));
      }
      if (layer.V->output_shape() != out) {
        add(Violation::Kind::ShapeBreak, n,
            "V output " + to_string(layer.V->output_shape()) + " != bias shape " + to_string(out));
      }
    } else if (i == 0) {
      add(Violation::Kind::MissingOperator, n, "first layer needs a V operator");
    }

    if (i == 0) {
      if (layer.W) add(Violation::Kind::ShapeBreak, n, "first layer cannot have a W operator");
      if (layer.residual) add(Violation::Kind::ResidualShape, n, "first layer cannot be residual");
    } else {
      if (!layer.W) {
        add(Violation::Kind::MissingOperator, n, "layer is missing its W operator");
      } else {
        if (layer.W->input_shape() != *prev_out) {
          add(Violation::Kind::ShapeBreak, n,
              "W input " + to_string(layer.W->input_shape()) + " != previous output " +
                  to_string(*prev_out));
        }
        if (layer.W->output_shape() != out) {
          add(Violation::Kind::ShapeBreak, n,
              "W output " + to_string(layer.W->output_shape()) + " != bias shape " +
                  to_string(out));
        }
        for (const auto& neg : layer.W->negative_coefficients()) {
          std::ostringstream os;
          os << "W entry " << neg.index << " is negative (" << neg.value << ")";
          add(Violation::Kind::NegativeWeight, n, os.str(), neg.index, neg.value);
        }
      }
      if (layer.residual && *prev_out != out) {
        add(Violation::Kind::ResidualShape, n,
            "residual layer maps " + to_string(*prev_out) + " to " + to_string(out));
      }
    }
    prev_out = &out;
  }

  if (shape_size(*prev_out) != 1 || prev_out->size() != 1) {
    add(Violation::Kind::NonScalarOutput, spec.layers.size(),
        "final output has shape " + to_string(*prev_out) + ", expected [1]");
  }
  return report;
}

Tensor preactivation(const IcnnSpec& spec, std::size_t layer, const Tensor& x,
                     const Tensor* z_prev) {
  const auto& l = spec.layers.at(layer - 1);
  Tensor u = l.b;
  if (l.V) {
    require_shape("layer " + std::to_string(layer) + " input", l.V->input_shape(), x.shape());
    l.V->apply_add(x.data(), 1.0, u.data());
  }
  if (l.W) {
    if (!z_prev) throw Error(ErrorKind::InvalidArgument, "preactivation: missing previous activation");
    require_shape("layer " + std::to_string(layer) + " z", l.W->input_shape(), z_prev->shape());
    l.W->apply_add(z_prev->data(), 1.0, u.data());
  }
  return u;
}

namespace {

Tensor activate(const IcnnLayer& l, const Tensor& u, const Tensor* z_prev) {
  Tensor z = u;
  for (auto& v : z.data()) v = l.activation(v);
  if (l.residual) z += *z_prev;
  return z;
}

}  // namespace

ForwardResult forward(const IcnnSpec& spec, const Tensor& x) {
  require_shape("icnn forward", spec.input_shape, x.shape());
  ForwardResult r;
  const Tensor* prev = nullptr;
  Tensor last;
  for (std::size_t i = 1; i <= spec.depth(); ++i) {
    const Tensor u = preactivation(spec, i, x, prev);
    Tensor z = activate(spec.layers[i - 1], u, prev);
    if (i < spec.depth()) {
      r.trace.push_back(std::move(z));
      prev = &r.trace.back();
    } else {
      last = std::move(z);
    }
  }
  r.value = last[0];
  return r;
}

double final_layer_value(const IcnnSpec& spec, const Tensor& x, const Tensor* z_last) {
  const std::size_t L = spec.depth();
  const Tensor u = preactivation(spec, L, x, z_last);
  return activate(spec.layers[L - 1], u, z_last)[0];
}

Tensor subgradient(const IcnnSpec& spec, const Tensor& x) {
  require_shape("icnn subgradient", spec.input_shape, x.shape());
  const std::size_t L = spec.depth();
  std::vector<Tensor> pre(L), act(L);
  for (std::size_t i = 1; i <= L; ++i) {
    const Tensor* prev = i > 1 ? &act[i - 2] : nullptr;
    pre[i - 1] = preactivation(spec, i, x, prev);
    act[i - 1] = activate(spec.layers[i - 1], pre[i - 1], prev);
  }

  Tensor grad_x(spec.input_shape);
  Tensor grad_z = Tensor(act[L - 1].shape(), 1.0);
  for (std::size_t i = L; i >= 1; --i) {
    const auto& l = spec.layers[i - 1];
    Tensor delta = grad_z;
    for (std::size_t k = 0; k < delta.size(); ++k) delta[k] *= l.activation.slope(pre[i - 1][k]);
    if (l.V) l.V->adjoint_add(delta.data(), 1.0, grad_x.data());
    if (i == 1) break;
    Tensor next(act[i - 2].shape());
    if (l.W) l.W->adjoint_add(delta.data(), 1.0, next.data());
    if (l.residual) next += grad_z;
    grad_z = std::move(next);
  }
  return grad_x;
}

// Random admissible networks ---------------------------------------------

namespace {

Tensor normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Tensor uniform_tensor(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

IcnnSpec random_admissible(std::uint64_t seed, const MlpTemplate& tmpl) {
  if (tmpl.input_dim == 0 || tmpl.hidden.empty()) {
    throw Error(ErrorKind::InvalidArgument, "MlpTemplate needs input_dim >= 1 and a hidden layer");
  }
  for (auto h : tmpl.hidden) {
    if (h == 0) throw Error(ErrorKind::InvalidArgument, "MlpTemplate: zero-width hidden layer");
  }
  std::mt19937_64 rng(seed);
  const std::size_t n = tmpl.input_dim;
  const double vstd = tmpl.v_scale / std::sqrt(static_cast<double>(n));

  IcnnSpec spec;
  spec.input_shape = Shape{n};
  std::size_t prev = 0;
  for (std::size_t i = 0; i <= tmpl.hidden.size(); ++i) {
    const bool last = i == tmpl.hidden.size();
    const std::size_t width = last ? 1 : tmpl.hidden[i];
    IcnnLayer layer;
    layer.V = make_dense(normal_tensor(Shape{width, n}, vstd, rng));
    if (i > 0) {
      const double hi = 2.0 * tmpl.w_scale / static_cast<double>(prev);
      layer.W = make_dense(uniform_tensor(Shape{width, prev}, 0.0, hi, rng));
    }
    layer.b = uniform_tensor(Shape{width}, -tmpl.bias_scale, tmpl.bias_scale, rng);
    layer.activation = last ? tmpl.final_activation
                            : (i == 0 ? tmpl.first_activation : tmpl.hidden_activation);
    if (i > 0 && !last && i - 1 < tmpl.residual.size() && tmpl.residual[i - 1]) {
      if (prev != width) {
        throw Error(ErrorKind::InvalidArgument, "MlpTemplate: residual layer changes width");
      }
      layer.residual = true;
    }
    spec.layers.push_back(std::move(layer));
    prev = width;
  }
  return spec;
}

IcnnSpec random_admissible(std::uint64_t seed, const ConvTemplate& tmpl) {
  if (tmpl.image_side == 0 || tmpl.filters == 0 || tmpl.hidden == 0 || tmpl.kernel % 2 == 0 ||
      tmpl.pool == 0 || tmpl.image_side % tmpl.pool != 0) {
    throw Error(ErrorKind::InvalidArgument,
                "ConvTemplate: need odd kernel and a pool size dividing the image side");
  }
  if (!(tmpl.leaky_slope >= 0.0 && tmpl.leaky_slope < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "ConvTemplate: leaky slope must lie in [0, 1)");
  }
  std::mt19937_64 rng(seed);
  const std::size_t s = tmpl.image_side, f = tmpl.filters, k = tmpl.kernel;
  const std::size_t pooled = f * (s / tmpl.pool) * (s / tmpl.pool);

  IcnnSpec spec;
  spec.input_shape = Shape{1, s, s};

  IcnnLayer conv;
  Tensor filters = normal_tensor(Shape{f, 1, k, k}, 1.0 / static_cast<double>(k), rng);
  if (tmpl.zero_mean_filters) {
    for (std::size_t o = 0; o < f; ++o) {
      double mean = 0.0;
      for (std::size_t t = 0; t < k * k; ++t) mean += filters[o * k * k + t];
      mean /= static_cast<double>(k * k);
      for (std::size_t t = 0; t < k * k; ++t) filters[o * k * k + t] -= mean;
    }
  }
  conv.V = make_conv2d(std::move(filters), s, s);
  conv.b = uniform_tensor(Shape{f, s, s}, -tmpl.bias_scale, tmpl.bias_scale, rng);
  // Biases are shared per channel, as in a conv layer.
  for (std::size_t c = 0; c < f; ++c) {
    const double bc = conv.b[c * s * s];
    for (std::size_t p = 0; p < s * s; ++p) conv.b[c * s * s + p] = bc;
  }
  conv.activation = Activation::leaky_relu(tmpl.leaky_slope);
  spec.layers.push_back(std::move(conv));

  IcnnLayer hidden;
  auto pool = make_avgpool2d(Shape{f, s, s}, tmpl.pool);
  auto w1 = make_dense(
      uniform_tensor(Shape{tmpl.hidden, pooled}, 0.0, 2.0 / static_cast<double>(pooled), rng),
      pool->output_shape());
  hidden.W = make_compose({pool, w1});
  hidden.b = uniform_tensor(Shape{tmpl.hidden}, 0.0, tmpl.bias_scale, rng);
  hidden.activation = Activation::relu();
  spec.layers.push_back(std::move(hidden));

  IcnnLayer out;
  out.W = make_dense(
      uniform_tensor(Shape{1, tmpl.hidden}, 0.0, 2.0 / static_cast<double>(tmpl.hidden), rng));
  out.b = Tensor(Shape{1});
  out.activation = Activation::identity();
  spec.layers.push_back(std::move(out));
  return spec;
}

}  // namespace icnnpd
