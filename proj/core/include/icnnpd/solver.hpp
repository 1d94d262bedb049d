#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "icnnpd/blocks.hpp"
#include "icnnpd/icnn.hpp"
#include "icnnpd/power_iteration.hpp"

namespace icnnpd {

enum class FidelityKind { L1, L2, KL };

const char* to_string(FidelityKind kind);

/// L1: lambda * |Ax - y|_1.  L2: lambda/2 * |Ax - y|^2.
/// KL: 1^T (Ax - y + r) + y^T log(y / (Ax + r)).
struct Fidelity {
  FidelityKind kind = FidelityKind::L2;
  double lambda = 1.0;
  Tensor background;  // r, KL only; same shape as the measurement
};

/// One instance of min_x D(Ax, y) + gamma R(x) (+ nonnegativity).
struct ProblemSpec {
  Fidelity fidelity;
  OperatorPtr forward;  // null means the identity
  Tensor measurement;
  double reg_weight = 1.0;
  IcnnSpec icnn;
  bool nonneg_constraint = false;
  /// Handle the data term through its own dual block (K_0 = A) instead of
  /// a primal prox. Required for non-diagonal forward operators and KL.
  bool dualize_fidelity = false;

  /// Throws on inconsistent shapes, gamma < 0, or a data term that cannot be
  /// kept in the primal prox.
  void validate() const;
  Shape signal_shape() const { return icnn.input_shape; }
};

Tensor apply_forward(const ProblemSpec& problem, const Tensor& x);

struct DataTerm {
  double value = 0.0;
  bool finite = true;  // false when KL sees A x + r <= 0 where y > 0
};

DataTerm data_term(const ProblemSpec& problem, const Tensor& x);

struct Objectives {
  double primal_P = 0.0;          // D(Ax, y) + gamma R(x), network evaluated exactly
  double reformulated_P1 = 0.0;   // D(Ax, y) + gamma phi_L(x, z_{L-1})
  double data = 0.0;
  double regularizer = 0.0;       // gamma R(x)
  double feasibility = 0.0;       // max_i |max(0, phi_i(x, z_{i-1}) - z_i)|_inf
  bool data_finite = true;
};

/// z holds z_1..z_{L-1} in network numbering (one per hidden layer).
Objectives evaluate_objectives(const ProblemSpec& problem, const Tensor& x,
                               const std::vector<Tensor>& z);

// Step sizes ---------------------------------------------------------------

/// Norm of one nonzero block K_{rj} of the operator.
struct StepSizeTerm {
  std::size_t primal;
  double norm;
};

struct StepSizeRow {
  std::vector<StepSizeTerm> terms;
};

/// The first row of each block sets its dual step: sigma = c / |row|^2.
struct StepSizeBlock {
  std::string label;
  std::vector<StepSizeRow> rows;
};

struct StepSizeLayout {
  std::size_t primal_count = 0;
  std::vector<std::string> primal_labels;
  std::vector<StepSizeBlock> blocks;
};

struct StepSizes {
  std::vector<double> tau;    // per primal block
  std::vector<double> sigma;  // per dual block
  std::vector<double> c;      // per dual block
  /// Left-hand side of sum_r n_r sigma_r tau_j |K_rj|^2 <= 1 for each
  /// primal block j, with n_r the number of nonzero blocks in row r.
  std::vector<double> certificate;
  std::vector<std::string> inequalities;
  StepSizeLayout layout;
};

/// sigma_i = c_i / (n |row_0|^2), tau_j = 1 / sum_r n_r sigma_r |K_rj|^2.
/// Throws CertificationError when an inequality fails to hold.
StepSizes compute_step_sizes(const StepSizeLayout& layout, const std::vector<double>& c);

/// Operator-norm estimates of every distinct operator in a block system.
struct BlockNorms {
  std::vector<std::pair<std::string, NormEstimate>> estimates;
  StepSizeLayout layout;  // filled with the inflated estimates
};

BlockNorms estimate_block_norms(const BlockSystem& system, const NormEstimateOptions& options = {});

// PDHG -----------------------------------------------------------------------

struct SaddleState {
  std::vector<Tensor> u;      // x, z_1, ..., z_M
  std::vector<Tensor> u_bar;  // extrapolated 2 u^{k+1} - u^k
  std::vector<std::vector<Tensor>> v;  // per dual block, per row
  std::size_t iteration = 0;

  const Tensor& x() const { return u.front(); }
};

struct IterationRecord {
  std::size_t iter = 0;
  Objectives objectives;
  double psnr = 0.0;  // +inf sentinel when exact, NaN when no ground truth
  double seconds = 0.0;
};

struct RunMetrics {
  std::vector<IterationRecord> records;  // records[0] is the starting point
  std::vector<double> best_objective;    // running minimum of primal_P

  std::vector<double> objectives() const;
};

struct SolveOptions {
  std::size_t budget = 100;
  std::optional<Tensor> ground_truth;
  bool record_time = false;
  /// Compute objectives every iteration (otherwise only at the end).
  bool record_every_iteration = true;
  /// Return false to stop early.
  std::function<bool(const IterationRecord&)> callback;
};

/// PDHG on the epigraphical reformulation of a problem.
class PdhgSolver {
 public:
  explicit PdhgSolver(ProblemSpec problem, const AssembleOptions& options = {});

  const ProblemSpec& problem() const noexcept { return problem_; }
  const BlockSystem& system() const noexcept { return system_; }

  BlockNorms estimate_norms(const NormEstimateOptions& options = {}) const;
  StepSizes step_sizes(const BlockNorms& norms, const std::vector<double>& c) const;

  /// x0 from the measurement, z = network trace at x0, duals zero.
  SaddleState default_init() const;
  /// Feasible start at a given x: z = trace at x, duals zero.
  SaddleState init_at(const Tensor& x0) const;

  std::pair<SaddleState, RunMetrics> solve(const StepSizes& steps, SaddleState state,
                                           const SolveOptions& options) const;

  /// The solver's auxiliaries completed to the full network trace
  /// (z_1..z_{L-1}), filling a merged layer with its minimal value.
  std::vector<Tensor> full_trace(const SaddleState& state) const;

 private:
  void primal_step(const StepSizes& steps, SaddleState& s, std::vector<Tensor>& prev) const;
  void dual_step(const StepSizes& steps, SaddleState& s) const;
  IterationRecord record(const SaddleState& s, const SolveOptions& options, double seconds) const;

  ProblemSpec problem_;
  BlockSystem system_;
  // Primal prox data for the x block when the fidelity stays in g.
  Tensor prox_weight_;
  Tensor prox_target_;
};

std::pair<SaddleState, RunMetrics> pdhg_solve(const ProblemSpec& problem, const StepSizes& steps,
                                              std::optional<SaddleState> init,
                                              const SolveOptions& options);

// Subgradient baselines --------------------------------------------------------

struct SubgradientMode {
  enum class Kind { Constant, Diminishing };
  Kind kind = Kind::Constant;
  double step = 1.0;  // s for constant, s0 for diminishing (s_k = s0 / k)

  static SubgradientMode constant(double s) { return {Kind::Constant, s}; }
  static SubgradientMode diminishing(double s0) { return {Kind::Diminishing, s0}; }
};

/// A subgradient of D(Ax, y) + gamma R(x) at x.
Tensor objective_subgradient(const ProblemSpec& problem, const Tensor& x);

std::pair<Tensor, RunMetrics> subgradient_solve(const ProblemSpec& problem, SubgradientMode mode,
                                                const Tensor& x0, const SolveOptions& options);

/// Starting point shared by all solvers: y when the measurement lives in
/// signal space, otherwise a least-squares scaled back-projection.
Tensor default_start(const ProblemSpec& problem);

// Stopping -----------------------------------------------------------------

struct StopDecision {
  bool stop = false;
  bool absolute_fallback = false;  // reference too close to zero
};

/// (objective - reference) / |reference| < target, or objective - reference
/// < target when |reference| < 1e-12.
StopDecision stop_rule(double objective, double target_rel_error, double reference);

/// First record index whose objective satisfies the stop rule.
std::optional<std::size_t> first_crossing(const std::vector<double>& objectives,
                                          double target_rel_error, double reference);

/// Metrics stream: header iter,objective_P,objective_P1,data_term,reg_term,
/// feasibility,psnr,seconds and one row per record, 17 significant digits.
void write_metrics_csv(const RunMetrics& metrics, std::ostream& os);

}  // namespace icnnpd
