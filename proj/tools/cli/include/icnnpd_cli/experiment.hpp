#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icnnpd_cli/config.hpp"

namespace icnnpd::cli {

/// Everything a solver needs for one (config, seed) pair.
struct Instance {
  RunConfig config;
  Seeds seeds;
  Tensor truth;
  Measurement measurement;
  ProblemSpec problem;
  Tensor x0;
};

Instance build_instance(const RunConfig& config);

/// The PDHG solver for an instance with its operator norms estimated once.
struct PdhgContext {
  PdhgSolver solver;
  BlockNorms norms;
  SaddleState start;

  explicit PdhgContext(const Instance& instance);
};

struct SolverRun {
  SolverEntry entry;
  std::string name;
  RunMetrics metrics;
  Tensor x;
  std::optional<StepSizes> steps;  // PDHG only
  std::optional<SaddleState> state;  // PDHG only: the last iterate
  double final_feasibility = 0.0;
};

/// Output subdirectory name; entries without a name get kind plus index.
std::string entry_name(const SolverEntry& entry, std::size_t index);

SolverRun run_entry(const Instance& instance, const PdhgContext& pdhg, const SolverEntry& entry,
                    std::size_t budget, bool record_time = false);

struct Reference {
  double value = 0.0;
  double pdhg_value = 0.0;  // best objective of the long PDHG run alone
  std::size_t budget = 0;
  std::vector<double> c;
  double final_feasibility = 0.0;
  std::string note;
};

/// Minimum objective of a PDHG run with reference_multiplier x budget
/// iterations, combined with the best value any of `runs` reached. A PDHG
/// run in `runs` with the same c is continued rather than repeated; past the
/// first budget the objective is checked once per budget.
Reference compute_reference(const Instance& instance, const PdhgContext& pdhg,
                            const std::vector<double>& c, const std::vector<SolverRun>& runs);

/// c values of the first PDHG entry, else the middle of the sweep grid,
/// else one per dual block.
std::vector<double> reference_c(const RunConfig& config, const PdhgContext& pdhg);

/// Iterations needed to reach the target relative error, or nullopt.
std::optional<std::size_t> iterations_to_target(const RunMetrics& metrics, double target,
                                                double reference);

}  // namespace icnnpd::cli
