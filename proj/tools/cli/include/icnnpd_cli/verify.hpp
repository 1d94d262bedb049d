#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "icnnpd/linops.hpp"

namespace icnnpd::cli {

struct SuiteResult {
  std::string name;
  bool passed = true;
  std::size_t cases = 0;
  double worst = 0.0;      // largest observed error measure
  double tolerance = 0.0;
  double seconds = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> failures;  // each names the case and its seed
  std::string detail;

  void fail(std::string what);
};

struct NamedOperator {
  std::string name;
  OperatorPtr op;
};

/// Largest relative violation of <Ax, w> = <x, A^* w> over `pairs` draws.
double adjoint_defect(const LinearOperator& op, std::size_t pairs, std::uint64_t seed);

/// Every operator kind at desk scale, including Radon at 16 x 16 with 12
/// angles and the assembled blocks K_i of a few block systems.
std::vector<NamedOperator> standard_operators(std::uint64_t seed);

/// Closed-form proxes against the golden-section oracle: soft shrinkage,
/// KL conjugate, leaky-ReLU epigraph projection at alpha 0 and 0.2, final
/// layer conjugate. Reports a failure for any branch no instance reached.
SuiteResult verify_prox(std::uint64_t seed, std::size_t instances = 1000);

/// 1e-8 adjoint identity on 100 pairs per operator.
SuiteResult verify_adjoint(const std::vector<NamedOperator>& operators, std::uint64_t seed);

/// Power iteration against a dense SVD within 1e-5 relative.
SuiteResult verify_norms(std::uint64_t seed);

/// Jensen's inequality on 50 triples for each of 20 random admissible
/// networks, with residual and leaky variants.
SuiteResult verify_convexity(std::uint64_t seed);

/// PDHG on the constrained problem against the original one for 25 tiny L2
/// instances: objective gap to a grid search <= 1e-4, distance to the exact
/// active-set minimizer <= 1e-3.
SuiteResult verify_equivalence(std::uint64_t seed);

/// Certified step sizes satisfy every inequality, and the materialized
/// preconditioned operator has norm <= 1 + 1e-6.
SuiteResult verify_step_sizes(std::uint64_t seed);

/// (-1, 0) and (1, 1) are fixed points of the ReLU epigraph projection, so
/// is their midpoint (0, 0.5), which still violates z = max(x, 0).
SuiteResult verify_relaxation_fixture();

struct VerifyOptions {
  std::uint64_t seed = 0;
  /// Replaces the standard operator list in the adjoint suite when set.
  std::vector<NamedOperator> adjoint_operators;
};

std::vector<SuiteResult> run_verify(const VerifyOptions& options);

void print_suite_table(const std::vector<SuiteResult>& results, std::ostream& os);

}  // namespace icnnpd::cli
