#include "icnnpd/power_iteration.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace icnnpd {

NormEstimate estimate_norm(const LinearOperator& op, const NormEstimateOptions& opts) {
  if (!(opts.tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "estimate_norm: tol must be > 0");

  const std::size_t n = op.input_size(), m = op.output_size();
  std::vector<double> v(n), av(m), atav(n);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (auto& e : v) e = unif(rng);

  NormEstimate est;
  double nv = norm2(v);
  if (nv == 0.0) return est;
  for (auto& e : v) e /= nv;

  double prev = 0.0;
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    std::fill(av.begin(), av.end(), 0.0);
    op.apply_add(v, 1.0, av);
    const double value = norm2(av);
    est.history.push_back(value);
    est.value = std::max(est.value, value);
    est.iterations = it + 1;

    if (it > 0 && std::abs(value - prev) <= opts.tol * std::max(value, 1e-300)) {
      est.converged = true;
      break;
    }
    prev = value;

    std::fill(atav.begin(), atav.end(), 0.0);
    op.adjoint_add(av, 1.0, atav);
    const double n_atav = norm2(atav);
    if (n_atav == 0.0) {
      // v lies in the null space; the operator is zero on this direction.
      est.converged = value == 0.0;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = atav[i] / n_atav;
  }
  est.inflated = est.value * opts.safety_factor;
  return est;
}

}  // namespace icnnpd
