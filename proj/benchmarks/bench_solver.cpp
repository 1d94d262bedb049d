#include <benchmark/benchmark.h>

#include "icnnpd/solver.hpp"
#include "icnnpd/tasks.hpp"

using namespace icnnpd;

namespace {

ProblemSpec denoise_problem(std::size_t side) {
  TaskConfig task;
  task.image_side = side;
  task.seed = 2;
  const Tensor truth = make_phantom(PhantomKind::SmoothBlobs, side, 1);
  const auto m = corrupt(task, truth);
  ConvTemplate t;
  t.image_side = side;
  t.pool = side / 8;
  ProblemSpec p;
  p.fidelity = {FidelityKind::L1, 0.02, {}};
  p.forward = m.forward;
  p.measurement = m.y;
  p.reg_weight = 500.0;
  p.icnn = random_admissible(3, t);
  return p;
}

ProblemSpec ct_problem(std::size_t side) {
  TaskConfig task;
  task.task = TaskKind::CT;
  task.image_side = side;
  task.geometry = default_geometry(side, 60);
  task.seed = 2;
  const Tensor truth = make_phantom(PhantomKind::ShepLoganLike, side, 1);
  const auto m = corrupt(task, truth);
  ConvTemplate t;
  t.image_side = side;
  t.pool = side / 8;
  ProblemSpec p;
  p.fidelity = {FidelityKind::KL, 1.0, m.background};
  p.forward = m.forward;
  p.measurement = m.y;
  p.reg_weight = 400.0;
  p.icnn = random_admissible(3, t);
  p.nonneg_constraint = true;
  p.dualize_fidelity = true;
  return p;
}

void run_pdhg(benchmark::State& state, const ProblemSpec& problem, std::vector<double> c,
              bool objectives) {
  const PdhgSolver solver(problem);
  const auto steps = solver.step_sizes(solver.estimate_norms(), c);
  SolveOptions opts;
  opts.budget = 10;
  opts.record_every_iteration = objectives;
  const auto init = solver.default_init();
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(steps, init, opts).first.iteration);
  state.SetItemsProcessed(state.iterations() * 10);
}

void BM_PdhgDenoise(benchmark::State& state) {
  run_pdhg(state, denoise_problem(static_cast<std::size_t>(state.range(0))), {1.0, 0.1},
           state.range(1) != 0);
}
BENCHMARK(BM_PdhgDenoise)->Args({64, 0})->Args({64, 1})->Unit(benchmark::kMillisecond);

void BM_PdhgCt(benchmark::State& state) {
  run_pdhg(state, ct_problem(static_cast<std::size_t>(state.range(0))), {5000.0, 10.0, 0.1},
           state.range(1) != 0);
}
BENCHMARK(BM_PdhgCt)->Args({64, 0})->Args({64, 1})->Unit(benchmark::kMillisecond);

void BM_SubgradientDenoise(benchmark::State& state) {
  const auto problem = denoise_problem(static_cast<std::size_t>(state.range(0)));
  const Tensor x0 = default_start(problem);
  SolveOptions opts;
  opts.budget = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(subgradient_solve(problem, SubgradientMode::constant(0.1), x0, opts).first);
  }
  state.SetItemsProcessed(state.iterations() * 10);
}
BENCHMARK(BM_SubgradientDenoise)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
