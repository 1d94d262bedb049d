#pragma once

#include <functional>
#include <span>
#include <utility>
#include <variant>

#include "icnnpd/icnn.hpp"
#include "icnnpd/tensor.hpp"

namespace icnnpd {

// Proximal operators use prox_h^s(x) = argmin_v 1/(2s) |v - x|^2 + h(v).

/// h(x) = lambda * sum_i w_i |x_i - y_i|, w = 1 when weight is empty.
struct L1Shift {
  double lambda = 1.0;
  Tensor y;
  Tensor weight;
};

/// h(x) = weight/2 * sum_i m_i (x_i - y_i)^2, m = 1 when mask is empty.
struct L2Shift {
  double weight = 1.0;
  Tensor y;
  Tensor mask;
};

/// Convex conjugate of the Kullback-Leibler fidelity
/// f(w) = 1^T (w - y + r) + y^T log(y / (w + r)).
struct KLConjugate {
  Tensor y;
  Tensor r;
};

/// Indicator of the epigraph {(p, q) | h_alpha(p) <= q}. Inputs stack p and
/// q along a leading axis of size 2.
struct EpigraphLeakyReLU {
  double alpha = 0.0;
};

/// Conjugate of f(w) = sum_i a_i h(w_i + b_i) with h a leaky ReLU of slope
/// alpha (0 for ReLU, 1 for identity): clip(w + s b, alpha a, a).
struct FinalLayerConjugate {
  Tensor a;
  Tensor b;
  double alpha = 0.0;
};

struct NonNegProject {};
struct Zero {};

using ProxDescriptor = std::variant<L1Shift, L2Shift, KLConjugate, EpigraphLeakyReLU,
                                    FinalLayerConjugate, NonNegProject, Zero>;

/// Scalar step or a per-entry diagonal step.
using ProxStep = std::variant<double, Tensor>;

Tensor prox(const ProxDescriptor& desc, const ProxStep& step, const Tensor& xbar);

/// Euclidean projection onto {(p, q) | h_alpha(p) <= q}, componentwise.
std::pair<Tensor, Tensor> project_epigraph_leaky_relu(double alpha, const Tensor& pbar,
                                                      const Tensor& qbar);

/// clip(wbar + sigma b, 0, a) componentwise; a must be nonnegative.
Tensor prox_final_conjugate(const Tensor& a, const Tensor& b, double sigma, const Tensor& wbar);

/// 1/2 (w + 1 + s r - sqrt((w - 1 + s r)^2 + 4 s y)) componentwise.
Tensor prox_kl_conjugate(const Tensor& y, const Tensor& r, double sigma, const Tensor& wbar);

/// Generic prox: (step, input) -> prox_{step h}(input).
using ProxFunction = std::function<Tensor(double, const Tensor&)>;

/// prox_{tau h^*}(xbar) via the Moreau identity:
/// xbar - tau * prox_{h / tau}(xbar / tau).
Tensor moreau_decompose(const ProxFunction& prox_h, double tau, const Tensor& xbar);

struct Bracket {
  double lo;
  double hi;
  /// When set, the bracket is the domain of h and the minimizer may sit on
  /// its boundary. Otherwise a boundary minimizer means the bracket missed.
  bool is_domain = false;
};

/// Golden-section minimization of v -> 1/(2 step) (v - xbar)^2 + h(v) over
/// the bracket, to an interval width of 1e-9 (relative to the bracket for
/// wide brackets). Test oracle; deliberately shares nothing with the closed
/// forms above.
double numeric_prox_oracle(const std::function<double(double)>& h, double step, double xbar,
                           Bracket bracket);

// In-place kernels used by the solver. Thresholds and steps are per entry
// when a span is passed.
namespace kernels {

double soft_shrink_shift(double xbar, double y, double thresh) noexcept;
void project_leaky_epigraph(double alpha, double& p, double& q) noexcept;
void project_identity_epigraph(double& p, double& q) noexcept;
void project_epigraph(const Activation& act, std::span<double> p, std::span<double> q) noexcept;
double kl_conjugate(double w, double y, double r, double sigma) noexcept;

}  // namespace kernels

}  // namespace icnnpd
