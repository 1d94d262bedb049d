#pragma once

#include <cstdint>
#include <vector>

#include "icnnpd/linops.hpp"

namespace icnnpd {

struct NormEstimateOptions {
  double tol = 1e-6;
  std::size_t max_iters = 500;
  std::uint64_t seed = 0;
  double safety_factor = 1.01;
};

struct NormEstimate {
  double value = 0.0;     // sqrt of the last Rayleigh quotient of A^*A
  double inflated = 0.0;  // value * safety_factor, what step sizes consume
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> history;  // value after each iteration
};

/// Largest singular value of op by power iteration on A^*A, started from a
/// seeded uniform vector. When max_iters is exhausted the best estimate is
/// returned with converged = false.
NormEstimate estimate_norm(const LinearOperator& op, const NormEstimateOptions& opts = {});

}  // namespace icnnpd
