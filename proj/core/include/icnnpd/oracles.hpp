#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "icnnpd/icnn.hpp"
#include "icnnpd/tensor.hpp"

// Slow reference computations for tests and the verify command. Nothing
// here calls into the closed-form kernels or the solver.
namespace icnnpd::oracles {

/// Minimizer of a unimodal f on [lo, hi] by golden-section search.
double golden_section(const std::function<double(double)>& f, double lo, double hi,
                      double tol = 1e-12);

/// Projection of (p, q) onto {(s, t) | act(s) <= t} by minimizing the
/// convex distance profile s -> (s - p)^2 + max(0, act(s) - q)^2.
std::pair<double, double> project_epigraph(const Activation& act, double p, double q);

/// Eigenvalues of a symmetric n x n row-major matrix (cyclic Jacobi).
std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n);

/// Largest singular value of a dense [m, n] matrix.
double spectral_norm(const Tensor& matrix);

struct GridSearchOptions {
  std::size_t points = 11;  // per dimension, odd
  double shrink = 0.5;
  double half_width = 2.0;
  double tol = 1e-8;  // stop once the half width falls below this
  std::size_t max_levels = 200;
};

struct GridSearchResult {
  Tensor x;
  double value = 0.0;
  std::size_t levels = 0;
  std::size_t evaluations = 0;
};

/// Coarse-to-fine tensor-grid minimization of a convex f around `centre`.
/// The box shrinks around the best point, or only recentres when that point
/// lies on the box boundary.
GridSearchResult grid_minimize(const std::function<double(const Tensor&)>& f, Tensor centre,
                               const GridSearchOptions& options = {});

/// Network output evaluated by plain loops over materialized operators.
double icnn_value_dense(const IcnnSpec& spec, const Tensor& x);

/// Exact minimizer of lambda/2 |x - y|^2 + gamma R(x) for a two-layer
/// network R(x) = v x + w^T h(V x + b0) + b1 with w >= 0 and a leaky ReLU
/// h, found by enumerating which hidden units are on, off or at their kink
/// and solving the optimality conditions of each pattern. Throws when no
/// pattern is consistent (degenerate weights).
Tensor two_layer_l2_minimizer(const IcnnSpec& spec, const Tensor& y, double lambda, double gamma);

}  // namespace icnnpd::oracles
