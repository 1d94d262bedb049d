#pragma once

#include <cmath>
#include <random>

#include "icnnpd/icnn.hpp"
#include "icnnpd/linops.hpp"

namespace testing_support {

using namespace icnnpd;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

/// Largest relative violation of <Ax, w> = <x, A^* w> over `pairs` draws.
inline double adjoint_defect(const LinearOperator& op, std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) {
    const Tensor x = random_tensor(op.input_shape(), rng);
    const Tensor w = random_tensor(op.output_shape(), rng);
    const double lhs = dot(op.apply(x), w);
    const double rhs = dot(x, op.adjoint(w));
    worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + norm2(x) * norm2(w)));
  }
  return worst;
}

/// R(x) = relu(x) on a scalar input.
inline IcnnSpec relu_net() {
  IcnnSpec s;
  s.input_shape = {1};
  s.layers.push_back({make_dense(Tensor({1, 1}, {1.0})), nullptr, Tensor({1}), Activation::relu(), false});
  return s;
}

/// z1 = relu(x), R = x + z1.
inline IcnnSpec two_layer_scalar_net() {
  IcnnSpec s;
  s.input_shape = {1};
  s.layers.push_back({make_dense(Tensor({1, 1}, {1.0})), nullptr, Tensor({1}), Activation::relu(), false});
  s.layers.push_back({make_dense(Tensor({1, 1}, {1.0})), make_dense(Tensor({1, 1}, {1.0})),
                      Tensor({1}), Activation::identity(), false});
  return s;
}

}  // namespace testing_support
