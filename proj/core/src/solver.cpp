#include "icnnpd/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>

#include "icnnpd/prox.hpp"
#include "icnnpd/tasks.hpp"

namespace icnnpd {

const char* to_string(FidelityKind kind) {
  switch (kind) {
    case FidelityKind::L1: return "l1";
    case FidelityKind::L2: return "l2";
    case FidelityKind::KL: return "kl";
  }
  return "?";
}

namespace {

bool is_diagonal(const OperatorPtr& op) {
  return !op || op->kind() == OperatorKind::Identity || op->kind() == OperatorKind::DiagonalMask;
}

Shape measurement_shape(const ProblemSpec& p) {
  return p.forward ? p.forward->output_shape() : p.icnn.input_shape;
}

}  // namespace

void ProblemSpec::validate() const {
  const auto report = icnnpd::validate(icnn);
  if (!report.admissible()) throw Error(ErrorKind::Admissibility, report.summary());
  if (forward) require_shape("forward operator input", icnn.input_shape, forward->input_shape());
  require_shape("measurement", measurement_shape(*this), measurement.shape());
  if (!(reg_weight >= 0.0) || !std::isfinite(reg_weight)) {
    throw Error(ErrorKind::InvalidArgument, "regularization weight must be >= 0");
  }
  if (!(fidelity.lambda > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "fidelity weight must be > 0");
  }
  if (fidelity.kind == FidelityKind::KL) {
    require_shape("KL background", measurement.shape(), fidelity.background.shape());
    for (double v : measurement.data()) {
      if (v < 0.0) throw Error(ErrorKind::InvalidArgument, "KL measurement must be nonnegative");
    }
    for (double v : fidelity.background.data()) {
      if (v < 0.0) throw Error(ErrorKind::InvalidArgument, "KL background must be nonnegative");
    }
  }
  if (!dualize_fidelity) {
    if (fidelity.kind == FidelityKind::KL) {
      throw Error(ErrorKind::InvalidArgument, "KL fidelity must be dualized");
    }
    if (!is_diagonal(forward)) {
      throw Error(ErrorKind::InvalidArgument,
                  "a non-diagonal forward operator requires a dualized fidelity");
    }
  }
}

Tensor apply_forward(const ProblemSpec& problem, const Tensor& x) {
  return problem.forward ? problem.forward->apply(x) : x;
}

DataTerm data_term(const ProblemSpec& problem, const Tensor& x) {
  const Tensor ax = apply_forward(problem, x);
  const auto& y = problem.measurement;
  const double lambda = problem.fidelity.lambda;
  DataTerm d;
  switch (problem.fidelity.kind) {
    case FidelityKind::L1:
      for (std::size_t i = 0; i < ax.size(); ++i) d.value += std::abs(ax[i] - y[i]);
      d.value *= lambda;
      break;
    case FidelityKind::L2:
      for (std::size_t i = 0; i < ax.size(); ++i) d.value += (ax[i] - y[i]) * (ax[i] - y[i]);
      d.value *= 0.5 * lambda;
      break;
    case FidelityKind::KL: {
      const auto& r = problem.fidelity.background;
      for (std::size_t i = 0; i < ax.size(); ++i) {
        const double w = ax[i] + r[i];
        d.value += w - y[i];
        if (y[i] > 0.0) {
          if (w <= 0.0) {
            d.finite = false;
            d.value = std::numeric_limits<double>::infinity();
            return d;
          }
          d.value += y[i] * std::log(y[i] / w);
        }
      }
      d.value *= lambda;
      break;
    }
  }
  return d;
}

Objectives evaluate_objectives(const ProblemSpec& problem, const Tensor& x,
                               const std::vector<Tensor>& z) {
  const auto& net = problem.icnn;
  const std::size_t L = net.depth();
  if (z.size() + 1 != L) {
    throw Error(ErrorKind::InvalidArgument, "evaluate_objectives: expected " +
                                                std::to_string(L - 1) + " activations, got " +
                                                std::to_string(z.size()));
  }
  Objectives o;
  const DataTerm d = data_term(problem, x);
  o.data = d.value;
  o.data_finite = d.finite;
  const double gamma = problem.reg_weight;
  o.regularizer = gamma * forward(net, x).value;
  o.primal_P = o.data + o.regularizer;
  o.reformulated_P1 = o.data + gamma * final_layer_value(net, x, z.empty() ? nullptr : &z.back());

  for (std::size_t i = 1; i < L; ++i) {
    const Tensor* prev = i > 1 ? &z[i - 2] : nullptr;
    const Tensor pre = preactivation(net, i, x, prev);
    const auto& layer = net.layers[i - 1];
    require_shape("activation z" + std::to_string(i), pre.shape(), z[i - 1].shape());
    for (std::size_t k = 0; k < pre.size(); ++k) {
      double phi = layer.activation(pre[k]);
      if (layer.residual) phi += (*prev)[k];
      o.feasibility = std::max(o.feasibility, phi - z[i - 1][k]);
    }
  }
  return o;
}

// Step sizes -----------------------------------------------------------------

StepSizes compute_step_sizes(const StepSizeLayout& layout, const std::vector<double>& c) {
  if (c.size() != layout.blocks.size()) {
    throw Error(ErrorKind::InvalidArgument,
                "compute_step_sizes: " + std::to_string(layout.blocks.size()) +
                    " dual blocks but " + std::to_string(c.size()) + " c values");
  }
  StepSizes st;
  st.layout = layout;
  st.c = c;
  for (std::size_t i = 0; i < layout.blocks.size(); ++i) {
    const auto& block = layout.blocks[i];
    if (!(c[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "step-size constant c must be > 0");
    if (block.rows.empty()) throw Error(ErrorKind::InvalidArgument, "dual block without rows");
    const auto& lead = block.rows.front();
    double sq = 0.0;
    for (const auto& t : lead.terms) {
      if (!(t.norm > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "operator norm must be > 0 in block " + block.label);
      }
      sq += t.norm * t.norm;
    }
    sq *= static_cast<double>(lead.terms.size());
    if (!(sq > 0.0)) throw Error(ErrorKind::InvalidArgument, "empty leading row in " + block.label);
    st.sigma.push_back(c[i] / sq);
  }

  std::vector<double> load(layout.primal_count, 0.0);
  std::vector<std::string> text(layout.primal_count);
  for (std::size_t i = 0; i < layout.blocks.size(); ++i) {
    for (const auto& row : layout.blocks[i].rows) {
      const double n = static_cast<double>(row.terms.size());
      for (const auto& t : row.terms) {
        if (t.primal >= layout.primal_count) {
          throw Error(ErrorKind::InvalidArgument, "step-size term refers to unknown primal block");
        }
        load[t.primal] += n * st.sigma[i] * t.norm * t.norm;
        auto& s = text[t.primal];
        if (!s.empty()) s += " + ";
        if (n != 1.0) s += std::to_string(static_cast<int>(n)) + "*";
        s += "sigma[" + layout.blocks[i].label + "]*tau*" + std::to_string(t.norm * t.norm);
      }
    }
  }
  for (std::size_t j = 0; j < layout.primal_count; ++j) {
    const std::string name = j < layout.primal_labels.size() ? layout.primal_labels[j]
                                                              : "u" + std::to_string(j);
    if (!(load[j] > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "primal block " + name + " is not coupled to any dual block");
    }
    const double tau = 1.0 / load[j];
    const double cert = tau * load[j];
    std::string ineq = text[j] + " <= 1 (" + name + ")";
    if (cert > 1.0 + 1e-12) throw CertificationError(ineq, cert);
    st.tau.push_back(tau);
    st.certificate.push_back(cert);
    st.inequalities.push_back(std::move(ineq));
  }
  return st;
}

BlockNorms estimate_block_norms(const BlockSystem& system, const NormEstimateOptions& options) {
  BlockNorms out;
  std::map<const LinearOperator*, double> cache;
  out.layout.primal_count = system.primal_count();
  out.layout.primal_labels.push_back("x");
  for (std::size_t j = 1; j < system.primal_count(); ++j) {
    out.layout.primal_labels.push_back("z" + std::to_string(j));
  }
  std::uint64_t seed = options.seed;
  for (const auto& block : system.duals) {
    StepSizeBlock sb;
    sb.label = block.label;
    for (std::size_t r = 0; r < block.rows.size(); ++r) {
      StepSizeRow row;
      for (const auto& t : block.rows[r].terms) {
        double norm = 1.0;
        if (t.op) {
          auto it = cache.find(t.op.get());
          if (it == cache.end()) {
            NormEstimateOptions o = options;
            o.seed = seed++;
            auto est = estimate_norm(*t.op, o);
            out.estimates.emplace_back(block.label + ".row" + std::to_string(r) + "." +
                                           out.layout.primal_labels[t.primal] + " " +
                                           t.op->describe(),
                                       est);
            it = cache.emplace(t.op.get(), est.inflated).first;
          }
          norm = it->second;
        }
        row.terms.push_back({t.primal, std::abs(t.coeff) * norm});
      }
      sb.rows.push_back(std::move(row));
    }
    out.layout.blocks.push_back(std::move(sb));
  }
  return out;
}

// PDHG -------------------------------------------------------------------------

PdhgSolver::PdhgSolver(ProblemSpec problem, const AssembleOptions& options)
    : problem_(std::move(problem)) {
  problem_.validate();
  OperatorPtr k0;
  if (problem_.dualize_fidelity) {
    k0 = problem_.forward ? problem_.forward : make_identity(problem_.icnn.input_shape);
  }
  system_ = assemble_blocks(problem_.icnn, k0, options);

  if (!problem_.dualize_fidelity) {
    const Shape& s = problem_.icnn.input_shape;
    prox_weight_ = Tensor(s, 1.0);
    prox_target_ = problem_.measurement;
    if (problem_.forward && problem_.forward->kind() == OperatorKind::DiagonalMask) {
      const auto& d = static_cast<const DiagonalMaskOperator&>(*problem_.forward).mask();
      const bool l1 = problem_.fidelity.kind == FidelityKind::L1;
      for (std::size_t i = 0; i < d.size(); ++i) {
        prox_weight_[i] = l1 ? std::abs(d[i]) : d[i] * d[i];
        prox_target_[i] = d[i] != 0.0 ? problem_.measurement[i] / d[i] : 0.0;
      }
    }
  }
}

BlockNorms PdhgSolver::estimate_norms(const NormEstimateOptions& options) const {
  return estimate_block_norms(system_, options);
}

StepSizes PdhgSolver::step_sizes(const BlockNorms& norms, const std::vector<double>& c) const {
  return compute_step_sizes(norms.layout, c);
}

Tensor default_start(const ProblemSpec& problem) {
  Tensor x0;
  const auto& y = problem.measurement;
  if (!problem.forward || is_diagonal(problem.forward)) {
    x0 = y;
  } else {
    Tensor b = y;
    if (problem.fidelity.kind == FidelityKind::KL) b -= problem.fidelity.background;
    Tensor bp = problem.forward->adjoint(b);
    const Tensor abp = problem.forward->apply(bp);
    const double den = dot(abp, abp);
    const double alpha = den > 0.0 ? std::max(0.0, dot(abp, b) / den) : 0.0;
    x0 = alpha * std::move(bp);
  }
  if (problem.nonneg_constraint) {
    for (auto& v : x0.data()) v = std::max(v, 0.0);
  }
  return x0;
}

SaddleState PdhgSolver::default_init() const { return init_at(default_start(problem_)); }

SaddleState PdhgSolver::init_at(const Tensor& x0) const {
  require_shape("initial x", problem_.icnn.input_shape, x0.shape());
  SaddleState s;
  s.u.push_back(x0);
  if (system_.primal_count() > 1) {
    auto fwd = forward(problem_.icnn, x0);
    for (std::size_t j = 1; j < system_.primal_count(); ++j) s.u.push_back(std::move(fwd.trace[j - 1]));
  }
  s.u_bar = s.u;
  for (const auto& block : system_.duals) {
    std::vector<Tensor> rows;
    for (const auto& row : block.rows) rows.emplace_back(row.shape);
    s.v.push_back(std::move(rows));
  }
  return s;
}

std::vector<Tensor> PdhgSolver::full_trace(const SaddleState& s) const {
  std::vector<Tensor> z(s.u.begin() + 1, s.u.end());
  if (system_.folded) {
    const std::size_t layer = problem_.icnn.depth() - 1;
    Tensor pre = preactivation(problem_.icnn, layer, s.x(), z.empty() ? nullptr : &z.back());
    const auto& act = problem_.icnn.layers[layer - 1].activation;
    for (auto& v : pre.data()) v = act(v);
    z.push_back(std::move(pre));
  }
  return z;
}

void PdhgSolver::primal_step(const StepSizes& steps, SaddleState& s,
                             std::vector<Tensor>& prev) const {
  const std::size_t P = system_.primal_count();
  std::vector<Tensor> grad;
  grad.reserve(P);
  for (std::size_t j = 0; j < P; ++j) grad.emplace_back(system_.primal_shapes[j]);

  for (std::size_t i = 0; i < system_.duals.size(); ++i) {
    const auto& block = system_.duals[i];
    for (std::size_t r = 0; r < block.rows.size(); ++r) {
      const auto v = s.v[i][r].data();
      for (const auto& t : block.rows[r].terms) {
        auto g = grad[t.primal].data();
        if (t.op) {
          t.op->adjoint_add(v, t.coeff, g);
        } else {
          for (std::size_t k = 0; k < g.size(); ++k) g[k] += t.coeff * v[k];
        }
      }
    }
  }

  for (std::size_t j = 0; j < P; ++j) {
    prev[j] = s.u[j];
    auto u = s.u[j].data();
    const auto g = grad[j].data();
    const double tau = steps.tau[j];
    for (std::size_t k = 0; k < u.size(); ++k) u[k] -= tau * g[k];
  }

  // prox_g on x; g vanishes on the auxiliaries.
  auto x = s.u[0].data();
  if (!problem_.dualize_fidelity) {
    const double tau = steps.tau[0];
    const double lambda = problem_.fidelity.lambda;
    if (problem_.fidelity.kind == FidelityKind::L1) {
      for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = kernels::soft_shrink_shift(x[k], prox_target_[k], tau * lambda * prox_weight_[k]);
      }
    } else {
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double c = tau * lambda * prox_weight_[k];
        x[k] = (x[k] + c * prox_target_[k]) / (1.0 + c);
      }
    }
  }
  if (problem_.nonneg_constraint) {
    for (auto& v : x) v = std::max(v, 0.0);
  }

  for (std::size_t j = 0; j < P; ++j) {
    auto ub = s.u_bar[j].data();
    const auto u = s.u[j].data();
    const auto p = prev[j].data();
    for (std::size_t k = 0; k < ub.size(); ++k) ub[k] = 2.0 * u[k] - p[k];
  }
}

void PdhgSolver::dual_step(const StepSizes& steps, SaddleState& s) const {
  const double gamma = problem_.reg_weight;
  for (std::size_t i = 0; i < system_.duals.size(); ++i) {
    const auto& block = system_.duals[i];
    const double sigma = steps.sigma[i];
    auto& v = s.v[i];
    for (std::size_t r = 0; r < block.rows.size(); ++r) {
      auto vr = v[r].data();
      for (const auto& t : block.rows[r].terms) {
        const auto ub = s.u_bar[t.primal].data();
        if (t.op) {
          t.op->apply_add(ub, sigma * t.coeff, vr);
        } else {
          for (std::size_t k = 0; k < vr.size(); ++k) vr[k] += sigma * t.coeff * ub[k];
        }
      }
    }

    switch (block.role) {
      case DualRole::Fidelity: {
        auto w = v[0].data();
        const auto& y = problem_.measurement;
        const double lambda = problem_.fidelity.lambda;
        switch (problem_.fidelity.kind) {
          case FidelityKind::KL: {
            // lambda * KL: conjugate prox rescales through lambda.
            const auto& rb = problem_.fidelity.background;
            for (std::size_t k = 0; k < w.size(); ++k) {
              w[k] = lambda * kernels::kl_conjugate(w[k] / lambda, y[k], rb[k], sigma / lambda);
            }
            break;
          }
          case FidelityKind::L2:
            for (std::size_t k = 0; k < w.size(); ++k) w[k] = (w[k] - sigma * y[k]) / (1.0 + sigma / lambda);
            break;
          case FidelityKind::L1:
            for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::clamp(w[k] - sigma * y[k], -lambda, lambda);
            break;
        }
        break;
      }
      case DualRole::Epigraph: {
        auto vp = v[0].data();
        auto vq = v[1].data();
        const auto& b = block.rows[0].shift;
        const double inv = 1.0 / sigma;
        const bool identity = block.activation.kind == Activation::Kind::Identity;
        const double alpha = block.activation.negative_slope();
        for (std::size_t k = 0; k < vp.size(); ++k) {
          double p = vp[k] * inv + b[k];
          double q = vq[k] * inv;
          if (identity) {
            kernels::project_identity_epigraph(p, q);
          } else {
            kernels::project_leaky_epigraph(alpha, p, q);
          }
          vp[k] -= sigma * (p - b[k]);
          vq[k] -= sigma * q;
        }
        break;
      }
      case DualRole::Final: {
        auto w = v[0].data();
        const auto& b = block.rows[0].shift;
        const auto& a = block.outer_weight;
        const double alpha = block.activation.negative_slope();
        for (std::size_t k = 0; k < w.size(); ++k) {
          const double hi = gamma * a[k];
          w[k] = std::clamp(w[k] + sigma * b[k], alpha * hi, hi);
        }
        if (block.residual_row) v[1].fill(gamma);
        break;
      }
    }
  }
}

IterationRecord PdhgSolver::record(const SaddleState& s, const SolveOptions& options,
                                   double seconds) const {
  IterationRecord rec;
  rec.iter = s.iteration;
  rec.objectives = evaluate_objectives(problem_, s.x(), full_trace(s));
  rec.psnr = options.ground_truth ? psnr(s.x(), *options.ground_truth)
                                  : std::numeric_limits<double>::quiet_NaN();
  rec.seconds = seconds;
  return rec;
}

namespace {

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

void push_record(RunMetrics& m, IterationRecord rec) {
  const double prev = m.best_objective.empty() ? std::numeric_limits<double>::infinity()
                                               : m.best_objective.back();
  m.best_objective.push_back(std::min(prev, rec.objectives.primal_P));
  m.records.push_back(std::move(rec));
}

}  // namespace

std::vector<double> RunMetrics::objectives() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.objectives.primal_P);
  return out;
}

std::pair<SaddleState, RunMetrics> PdhgSolver::solve(const StepSizes& steps, SaddleState s,
                                                     const SolveOptions& options) const {
  if (steps.tau.size() != system_.primal_count() || steps.sigma.size() != system_.duals.size()) {
    throw Error(ErrorKind::InvalidArgument, "step sizes do not match the block system");
  }
  if (s.u.size() != system_.primal_count() || s.v.size() != system_.duals.size()) {
    throw Error(ErrorKind::InvalidArgument, "saddle state does not match the block system");
  }
  for (double t : steps.certificate) {
    if (t > 1.0 + 1e-12) throw CertificationError("recorded step-size inequality", t);
  }

  RunMetrics metrics;
  Stopwatch clock(options.record_time);
  if (options.record_every_iteration) push_record(metrics, record(s, options, 0.0));

  std::vector<Tensor> prev(s.u);
  for (std::size_t k = 1; k <= options.budget; ++k) {
    primal_step(steps, s, prev);
    dual_step(steps, s);
    s.iteration += 1;

    for (std::size_t j = 0; j < s.u.size(); ++j) {
      if (!s.u[j].all_finite()) {
        throw NonFiniteError(s.iteration, j == 0 ? "x" : "z" + std::to_string(j));
      }
    }
    for (std::size_t i = 0; i < s.v.size(); ++i) {
      for (const auto& row : s.v[i]) {
        if (!row.all_finite()) throw NonFiniteError(s.iteration, "v:" + system_.duals[i].label);
      }
    }

    if (options.record_every_iteration) {
      push_record(metrics, record(s, options, clock.seconds()));
      if (options.callback && !options.callback(metrics.records.back())) break;
    }
  }
  if (!options.record_every_iteration) push_record(metrics, record(s, options, clock.seconds()));
  return {std::move(s), std::move(metrics)};
}

std::pair<SaddleState, RunMetrics> pdhg_solve(const ProblemSpec& problem, const StepSizes& steps,
                                              std::optional<SaddleState> init,
                                              const SolveOptions& options) {
  PdhgSolver solver(problem);
  SaddleState s = init ? std::move(*init) : solver.default_init();
  return solver.solve(steps, std::move(s), options);
}

// Subgradient methods ----------------------------------------------------------

Tensor objective_subgradient(const ProblemSpec& problem, const Tensor& x) {
  const Tensor ax = apply_forward(problem, x);
  const auto& y = problem.measurement;
  const double lambda = problem.fidelity.lambda;
  Tensor gd(ax.shape());
  switch (problem.fidelity.kind) {
    case FidelityKind::L1:
      for (std::size_t i = 0; i < ax.size(); ++i) {
        const double d = ax[i] - y[i];
        gd[i] = lambda * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
      }
      break;
    case FidelityKind::L2:
      for (std::size_t i = 0; i < ax.size(); ++i) gd[i] = lambda * (ax[i] - y[i]);
      break;
    case FidelityKind::KL: {
      const auto& r = problem.fidelity.background;
      for (std::size_t i = 0; i < ax.size(); ++i) {
        gd[i] = lambda * (1.0 - (y[i] > 0.0 ? y[i] / (ax[i] + r[i]) : 0.0));
      }
      break;
    }
  }
  Tensor g = problem.forward ? problem.forward->adjoint(gd) : std::move(gd);
  if (problem.reg_weight != 0.0) g.axpy(problem.reg_weight, subgradient(problem.icnn, x));
  return g;
}

std::pair<Tensor, RunMetrics> subgradient_solve(const ProblemSpec& problem, SubgradientMode mode,
                                                const Tensor& x0, const SolveOptions& options) {
  problem.validate();
  if (!(mode.step > 0.0)) throw Error(ErrorKind::InvalidArgument, "subgradient step must be > 0");
  require_shape("initial x", problem.icnn.input_shape, x0.shape());

  auto make_record = [&](const Tensor& x, std::size_t k, double seconds) {
    IterationRecord rec;
    rec.iter = k;
    const DataTerm d = data_term(problem, x);
    rec.objectives.data = d.value;
    rec.objectives.data_finite = d.finite;
    rec.objectives.regularizer = problem.reg_weight * forward(problem.icnn, x).value;
    rec.objectives.primal_P = d.value + rec.objectives.regularizer;
    rec.objectives.reformulated_P1 = rec.objectives.primal_P;
    rec.psnr = options.ground_truth ? psnr(x, *options.ground_truth)
                                    : std::numeric_limits<double>::quiet_NaN();
    rec.seconds = seconds;
    return rec;
  };

  Tensor x = x0;
  if (problem.nonneg_constraint) {
    for (auto& v : x.data()) v = std::max(v, 0.0);
  }
  RunMetrics metrics;
  Stopwatch clock(options.record_time);
  if (options.record_every_iteration) push_record(metrics, make_record(x, 0, 0.0));

  for (std::size_t k = 1; k <= options.budget; ++k) {
    const double step = mode.kind == SubgradientMode::Kind::Constant
                            ? mode.step
                            : mode.step / static_cast<double>(k);
    const Tensor g = objective_subgradient(problem, x);
    x.axpy(-step, g);
    if (problem.nonneg_constraint) {
      for (auto& v : x.data()) v = std::max(v, 0.0);
    }
    if (!x.all_finite()) throw NonFiniteError(k, "x");
    if (options.record_every_iteration) {
      push_record(metrics, make_record(x, k, clock.seconds()));
      if (options.callback && !options.callback(metrics.records.back())) break;
    }
  }
  if (!options.record_every_iteration) push_record(metrics, make_record(x, options.budget, clock.seconds()));
  return {std::move(x), std::move(metrics)};
}

// Stopping ----------------------------------------------------------------------

StopDecision stop_rule(double objective, double target_rel_error, double reference) {
  StopDecision d;
  if (std::abs(reference) < 1e-12) {
    d.absolute_fallback = true;
    d.stop = objective - reference < target_rel_error;
  } else {
    d.stop = (objective - reference) / std::abs(reference) < target_rel_error;
  }
  return d;
}

std::optional<std::size_t> first_crossing(const std::vector<double>& objectives,
                                          double target_rel_error, double reference) {
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    if (stop_rule(objectives[i], target_rel_error, reference).stop) return i;
  }
  return std::nullopt;
}

void write_metrics_csv(const RunMetrics& metrics, std::ostream& os) {
  os << "iter,objective_P,objective_P1,data_term,reg_term,feasibility,psnr,seconds\n";
  char buf[512];
  for (const auto& r : metrics.records) {
    const auto& o = r.objectives;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iter,
                  o.primal_P, o.reformulated_P1, o.data, o.regularizer, o.feasibility, r.psnr,
                  r.seconds);
    os << buf;
  }
}

}  // namespace icnnpd
