#include "icnnpd_cli/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace icnnpd::cli {

namespace {

IcnnSpec make_network(const RunConfig& cfg, const Seeds& seeds, const Shape& signal) {
  const auto& w = cfg.weights;
  IcnnSpec net;
  if (w.path) {
    net = load_weights(*w.path, w.allow_inadmissible);
  } else if (w.template_kind == "conv") {
    ConvTemplate t = w.conv;
    t.image_side = signal.back();
    net = random_admissible(seeds.weights, t);
  } else {
    MlpTemplate t = w.mlp;
    t.input_dim = shape_size(signal);
    net = random_admissible(seeds.weights, t);
    net.layers.front().V = make_dense(materialize(*net.layers.front().V), signal);
    net.input_shape = signal;
  }
  if (net.input_shape != signal) {
    throw ConfigError("weights", "network input shape " + icnnpd::to_string(net.input_shape) +
                                     " does not match the image shape " + icnnpd::to_string(signal));
  }
  return net;
}

}  // namespace

Instance build_instance(const RunConfig& config) {
  Instance in;
  in.config = config;
  in.seeds = split_seed(config.seed, config);
  auto& cfg = in.config;

  if (cfg.image) {
    in.truth = read_pgm(*cfg.image);
    const Shape& s = in.truth.shape();
    if (s[1] != s[2]) throw ConfigError("task.image", "image must be square");
    cfg.task.image_side = s[1];
    if (cfg.task.task == TaskKind::CT) {
      const auto spacing = cfg.task.geometry.detector_spacing;
      cfg.task.geometry = default_geometry(s[1], cfg.task.geometry.n_angles);
      cfg.task.geometry.detector_spacing = spacing;
      cfg.task.geometry.n_bins = static_cast<std::size_t>(
          std::ceil(std::sqrt(2.0) * static_cast<double>(s[1]) / spacing)) + 2;
    }
    cfg.task.validate();
  } else {
    in.truth = make_phantom(cfg.phantom, cfg.task.image_side, in.seeds.phantom);
  }
  cfg.task.seed = in.seeds.noise;
  in.measurement = corrupt(cfg.task, in.truth);

  ProblemSpec& p = in.problem;
  p.fidelity.kind = cfg.problem.fidelity;
  p.fidelity.lambda = cfg.problem.lambda;
  if (p.fidelity.kind == FidelityKind::KL) {
    p.fidelity.background = in.measurement.background.size() == in.measurement.y.size()
                                ? in.measurement.background
                                : Tensor(in.measurement.y.shape());
  }
  p.forward = in.measurement.forward;
  p.measurement = in.measurement.y;
  p.reg_weight = cfg.problem.gamma;
  p.icnn = make_network(cfg, in.seeds, in.truth.shape());
  p.nonneg_constraint = cfg.problem.nonneg;
  p.dualize_fidelity = cfg.problem.dualize_fidelity;
  try {
    p.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) throw ConfigError("problem", e.what());
    throw;
  }

  if (cfg.problem.fbp_init) {
    RadonGeometry g = in.measurement.geometry;
    g.scale = g.effective_scale() * in.measurement.count_scale;
    Tensor sino = in.measurement.y;
    sino -= in.measurement.background;
    in.x0 = fbp(g, sino.reshaped({g.n_angles, g.n_bins})).reshaped(in.truth.shape());
  } else {
    in.x0 = default_start(p);
  }
  return in;
}

PdhgContext::PdhgContext(const Instance& instance)
    : solver(instance.problem), start(solver.init_at(instance.x0)) {
  NormEstimateOptions opts = instance.config.norms;
  opts.seed = instance.seeds.power;
  norms = solver.estimate_norms(opts);
}

std::string entry_name(const SolverEntry& entry, std::size_t index) {
  if (!entry.name.empty()) return entry.name;
  return std::string(to_string(entry.kind)) + "_" + std::to_string(index);
}

SolverRun run_entry(const Instance& instance, const PdhgContext& pdhg, const SolverEntry& entry,
                    std::size_t budget, bool record_time) {
  SolveOptions opts;
  opts.budget = budget;
  opts.ground_truth = instance.truth;
  opts.record_time = record_time;

  SolverRun run;
  run.entry = entry;
  if (entry.kind == SolverEntry::Kind::PDHG) {
    run.steps = pdhg.solver.step_sizes(pdhg.norms, entry.c);
    auto [state, metrics] = pdhg.solver.solve(*run.steps, pdhg.start, opts);
    run.x = state.x();
    run.metrics = std::move(metrics);
    run.state = std::move(state);
  } else {
    const auto mode = entry.kind == SolverEntry::Kind::SMC ? SubgradientMode::constant(entry.step)
                                                           : SubgradientMode::diminishing(entry.step);
    auto [x, metrics] = subgradient_solve(instance.problem, mode, instance.x0, opts);
    run.x = std::move(x);
    run.metrics = std::move(metrics);
  }
  run.final_feasibility = run.metrics.records.back().objectives.feasibility;
  return run;
}

std::vector<double> reference_c(const RunConfig& config, const PdhgContext& pdhg) {
  for (const auto& s : config.solvers) {
    if (s.kind == SolverEntry::Kind::PDHG) return s.c;
  }
  if (config.sweep) {
    std::vector<double> c;
    for (const auto& axis : config.sweep->c_grid) c.push_back(axis[axis.size() / 2]);
    return c;
  }
  return std::vector<double>(pdhg.solver.system().duals.size(), 1.0);
}

Reference compute_reference(const Instance& instance, const PdhgContext& pdhg,
                            const std::vector<double>& c, const std::vector<SolverRun>& runs) {
  const std::size_t budget = instance.config.budget;
  Reference ref;
  ref.c = c;
  ref.budget = budget * instance.config.reference_multiplier;

  const SolverRun* base = nullptr;
  for (const auto& r : runs) {
    if (r.state && r.entry.c == c && r.state->iteration == budget) {
      base = &r;
      break;
    }
  }
  std::optional<SolverRun> fresh;
  if (!base) {
    SolverEntry e;
    e.c = c;
    fresh = run_entry(instance, pdhg, e, budget);
    base = &*fresh;
  }

  const StepSizes steps = pdhg.solver.step_sizes(pdhg.norms, c);
  SaddleState state = *base->state;
  double best = base->metrics.best_objective.back();
  double feasibility = base->final_feasibility;
  SolveOptions opts;
  opts.budget = budget;
  opts.record_every_iteration = false;
  while (state.iteration < ref.budget) {
    opts.budget = std::min(budget, ref.budget - state.iteration);
    auto [next, metrics] = pdhg.solver.solve(steps, std::move(state), opts);
    state = std::move(next);
    best = std::min(best, metrics.records.back().objectives.primal_P);
    feasibility = metrics.records.back().objectives.feasibility;
  }
  ref.pdhg_value = best;
  ref.final_feasibility = feasibility;
  ref.value = best;
  for (const auto& r : runs) ref.value = std::min(ref.value, r.metrics.best_objective.back());
  ref.note = "minimum objective over a PDHG run of " + std::to_string(ref.budget) +
             " iterations (checked every iteration for the first " + std::to_string(budget) +
             ", then every " + std::to_string(budget) + ") and every solver run of this config";
  return ref;
}

std::optional<std::size_t> iterations_to_target(const RunMetrics& metrics, double target,
                                                double reference) {
  const auto idx = first_crossing(metrics.objectives(), target, reference);
  if (!idx) return std::nullopt;
  return metrics.records[*idx].iter;
}

}  // namespace icnnpd::cli
