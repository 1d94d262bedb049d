#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icnnpd/linops.hpp"

namespace icnnpd {

/// Piecewise-linear convex non-decreasing activation.
struct Activation {
  enum class Kind { ReLU, LeakyReLU, Identity };

  Kind kind = Kind::ReLU;
  double alpha = 0.0;  // negative slope; 0 for ReLU, 1 for Identity

  static Activation relu() { return {Kind::ReLU, 0.0}; }
  static Activation leaky_relu(double alpha) { return {Kind::LeakyReLU, alpha}; }
  static Activation identity() { return {Kind::Identity, 1.0}; }

  double operator()(double u) const noexcept { return u >= 0.0 ? u : negative_slope() * u; }
  /// Slope used for reverse-mode: the 0-side branch at the kink.
  double slope(double u) const noexcept { return u > 0.0 ? 1.0 : negative_slope(); }
  double negative_slope() const noexcept {
    return kind == Kind::Identity ? 1.0 : (kind == Kind::ReLU ? 0.0 : alpha);
  }
  bool valid() const noexcept;
  std::string name() const;

  friend bool operator==(const Activation&, const Activation&) = default;
};

/// One layer of z_{i} = h_i(V x + W z_{i-1} + b) (+ z_{i-1} when residual).
/// V may be absent for layers after the first; W is absent on layer 1.
struct IcnnLayer {
  OperatorPtr V;
  OperatorPtr W;
  Tensor b;
  Activation activation;
  bool residual = false;
};

struct IcnnSpec {
  Shape input_shape;
  std::vector<IcnnLayer> layers;

  std::size_t depth() const noexcept { return layers.size(); }
};

struct Violation {
  enum class Kind {
    NegativeWeight,
    ShapeBreak,
    NonScalarOutput,
    InvalidActivation,
    MissingOperator,
    ResidualShape,
    NonFiniteParameter,
  };
  Kind kind;
  std::size_t layer;  // 1-based layer number
  std::optional<std::size_t> index;
  double value = 0.0;
  std::string message;
};

struct AdmissibilityReport {
  std::vector<Violation> violations;

  bool admissible() const noexcept { return violations.empty(); }
  std::string summary() const;
};

/// Checks shapes, nonnegativity of every W and activation parameters.
/// The report lists every finding; it is empty iff the spec is admissible.
AdmissibilityReport validate(const IcnnSpec& spec);

struct ForwardResult {
  double value = 0.0;
  std::vector<Tensor> trace;  // z_1 .. z_{L-1}
};

ForwardResult forward(const IcnnSpec& spec, const Tensor& x);

/// Reverse-mode subgradient of the network output with respect to x.
Tensor subgradient(const IcnnSpec& spec, const Tensor& x);

/// Value of the last layer evaluated on a supplied z_{L-1} rather than the
/// network's own trace.
double final_layer_value(const IcnnSpec& spec, const Tensor& x, const Tensor* z_last);

/// Preactivation V_{i-1} x + W_{i-1} z_{i-1} + b_{i-1} of layer `layer`
/// (1-based), using the supplied previous activation.
Tensor preactivation(const IcnnSpec& spec, std::size_t layer, const Tensor& x,
                     const Tensor* z_prev);

Shape layer_output_shape(const IcnnSpec& spec, std::size_t layer);

/// Fully connected architecture on a flat input of size `input_dim`.
struct MlpTemplate {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden{4};
  Activation first_activation = Activation::relu();
  Activation hidden_activation = Activation::relu();
  Activation final_activation = Activation::identity();
  std::vector<bool> residual;  // per hidden layer after the first; optional
  double v_scale = 1.0;
  double w_scale = 1.0;
  double bias_scale = 0.1;
};

/// Convolutional architecture: conv -> leaky ReLU -> average pool -> dense ->
/// ReLU -> nonnegative dense to a scalar.
struct ConvTemplate {
  std::size_t image_side = 64;
  std::size_t filters = 8;
  std::size_t kernel = 5;
  std::size_t pool = 8;
  std::size_t hidden = 16;
  double leaky_slope = 0.2;
  double bias_scale = 0.05;
  /// Subtract each filter's mean so the network responds to local
  /// variation rather than brightness.
  bool zero_mean_filters = true;
};

IcnnSpec random_admissible(std::uint64_t seed, const MlpTemplate& tmpl);
IcnnSpec random_admissible(std::uint64_t seed, const ConvTemplate& tmpl);

/// Weights directory: manifest.json plus one TNSB blob per tensor.
void save_weights(const IcnnSpec& spec, const std::filesystem::path& dir);
IcnnSpec load_weights(const std::filesystem::path& dir, bool allow_inadmissible = false);

}  // namespace icnnpd
