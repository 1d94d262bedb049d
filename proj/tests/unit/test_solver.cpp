#include <gtest/gtest.h>

#include <sstream>

#include "common.hpp"
#include "icnnpd/oracles.hpp"
#include "icnnpd/solver.hpp"

using namespace icnnpd;
using namespace testing_support;

namespace {

ProblemSpec scalar_problem(IcnnSpec net, double y, double gamma) {
  ProblemSpec p;
  p.fidelity.kind = FidelityKind::L2;
  p.measurement = Tensor({1}, {y});
  p.reg_weight = gamma;
  p.icnn = std::move(net);
  return p;
}

StepSizeLayout two_block_layout(double v0, double w1p) {
  // Blocks (V0 x, z1) and (W1P z1), as in the two-stage denoising network.
  StepSizeLayout l;
  l.primal_count = 2;
  l.primal_labels = {"x", "z"};
  l.blocks.push_back({"epigraph1", {StepSizeRow{{{0, v0}}}, StepSizeRow{{{1, 1.0}}}}});
  l.blocks.push_back({"final", {StepSizeRow{{{1, w1p}}}}});
  return l;
}

}  // namespace

TEST(StepSizes, TwoStageFormulas) {
  const auto st = compute_step_sizes(two_block_layout(2.0, 1.0), {1.0, 1.0});
  EXPECT_DOUBLE_EQ(st.sigma[0], 0.25);
  EXPECT_DOUBLE_EQ(st.sigma[1], 1.0);
  EXPECT_DOUBLE_EQ(st.tau[0], 1.0);
  EXPECT_DOUBLE_EQ(st.tau[1], 0.8);
  // sigma1 tau1 |V0|^2 <= 1 and sigma1 tau2 + sigma2 tau2 |W1P|^2 <= 1
  EXPECT_LE(st.sigma[0] * st.tau[0] * 4.0, 1.0 + 1e-15);
  EXPECT_LE(st.sigma[0] * st.tau[1] + st.sigma[1] * st.tau[1], 1.0 + 1e-15);
  for (double c : st.certificate) EXPECT_LE(c, 1.0 + 1e-12);
}

TEST(StepSizes, DualizedFidelityForm) {
  StepSizeLayout l = two_block_layout(1.0, 1.0);
  l.blocks.insert(l.blocks.begin(), StepSizeBlock{"fidelity", {StepSizeRow{{{0, 1.0}}}}});
  const auto st = compute_step_sizes(l, {1.0, 1.0, 1.0});
  EXPECT_DOUBLE_EQ(st.tau[0], 0.5);
  EXPECT_LE(st.sigma[0] * st.tau[0] + st.sigma[1] * st.tau[0], 1.0 + 1e-15);
}

TEST(StepSizes, RejectsBadInputs) {
  EXPECT_THROW(compute_step_sizes(two_block_layout(2.0, 1.0), {1.0}), Error);
  EXPECT_THROW(compute_step_sizes(two_block_layout(2.0, 1.0), {1.0, -1.0}), Error);
  EXPECT_THROW(compute_step_sizes(two_block_layout(0.0, 1.0), {1.0, 1.0}), Error);
}

TEST(StepSizes, MaterializedPreconditionedNormAtMostOne) {
  MlpTemplate t;
  t.input_dim = 3;
  t.hidden = {4};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ProblemSpec p = scalar_problem(random_admissible(seed, t), 0.0, 1.0);
    p.measurement = Tensor({3}, 0.5);
    p.dualize_fidelity = seed % 2 == 1;
    PdhgSolver solver(p, AssembleOptions{false});
    const auto steps = solver.step_sizes(solver.estimate_norms(), std::vector<double>(solver.system().duals.size(), 1.0));
    const Tensor k = materialize(*solver.system().stacked_operator());
    const std::size_t rows = k.shape()[0], cols = k.shape()[1];
    std::vector<double> s, tcol;
    for (std::size_t i = 0; i < solver.system().duals.size(); ++i)
      for (const auto& row : solver.system().duals[i].rows)
        for (std::size_t r = 0; r < shape_size(row.shape); ++r) s.push_back(steps.sigma[i]);
    for (std::size_t j = 0; j < solver.system().primal_count(); ++j)
      for (std::size_t r = 0; r < shape_size(solver.system().primal_shapes[j]); ++r) tcol.push_back(steps.tau[j]);
    Tensor scaled = k;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) scaled[r * cols + c] *= std::sqrt(s[r] * tcol[c]);
    EXPECT_LE(oracles::spectral_norm(scaled), 1.0 + 1e-6) << "seed " << seed;
  }
}

TEST(Objectives, TraceAndPerturbations) {
  MlpTemplate t;
  t.input_dim = 4;
  t.hidden = {5};
  const IcnnSpec net = random_admissible(3, t);
  ProblemSpec p = scalar_problem(net, 0.0, 0.7);
  std::mt19937_64 rng(1);
  p.measurement = random_tensor({4}, rng);
  const Tensor x = random_tensor({4}, rng);
  auto trace = forward(net, x).trace;

  auto o = evaluate_objectives(p, x, trace);
  EXPECT_EQ(o.feasibility, 0.0);
  EXPECT_DOUBLE_EQ(o.reformulated_P1, o.primal_P);

  auto up = trace;
  for (auto& z : up) for (auto& v : z.data()) v += 1.0;
  o = evaluate_objectives(p, x, up);
  EXPECT_EQ(o.feasibility, 0.0);
  EXPECT_GE(o.reformulated_P1, o.primal_P - 1e-9);

  auto down = trace;
  for (auto& z : down) for (auto& v : z.data()) v -= 1.0;
  o = evaluate_objectives(p, x, down);
  EXPECT_NEAR(o.feasibility, 1.0, 1e-12);
}

TEST(Objectives, KlInfiniteWhenArgumentNonPositive) {
  ProblemSpec p = scalar_problem(relu_net(), 3.0, 1.0);
  p.fidelity.kind = FidelityKind::KL;
  p.fidelity.background = Tensor({1}, 0.0);
  p.dualize_fidelity = true;
  const auto o = evaluate_objectives(p, Tensor({1}, {-1.0}), {});
  EXPECT_FALSE(o.data_finite);
  EXPECT_TRUE(std::isinf(o.primal_P));
}

TEST(Pdhg, ZeroRegularizerConvergesToMeasurement) {
  MlpTemplate t;
  t.input_dim = 6;
  ProblemSpec p = scalar_problem(random_admissible(2, t), 0.0, 0.0);
  std::mt19937_64 rng(4);
  p.measurement = random_tensor({6}, rng);
  PdhgSolver solver(p);
  const auto steps = solver.step_sizes(solver.estimate_norms(), std::vector<double>(solver.system().duals.size(), 1.0));
  SolveOptions opt;
  opt.budget = 100;
  auto [state, metrics] = solver.solve(steps, solver.init_at(Tensor({6})), opt);
  EXPECT_LE(norm2(state.x() - p.measurement), 1e-8);
}

TEST(Pdhg, ScalarReluToy) {
  const ProblemSpec p = scalar_problem(relu_net(), 2.0, 1.0);
  PdhgSolver solver(p);
  const auto steps = solver.step_sizes(solver.estimate_norms(), {1.0});
  SolveOptions opt;
  opt.budget = 2000;
  auto [state, metrics] = solver.solve(steps, solver.default_init(), opt);
  EXPECT_NEAR(state.x()[0], 1.0, 1e-5);
  EXPECT_EQ(metrics.records.size(), 2001u);
  for (std::size_t k = 1; k < metrics.best_objective.size(); ++k) {
    EXPECT_LE(metrics.best_objective[k], metrics.best_objective[k - 1]);
  }
}

TEST(Pdhg, TwoLayerMatchesGridOracle) {
  // min 1/2 (x - y)^2 + x + relu(x) with y = 0.5 has minimizer x = -0.5.
  const ProblemSpec p = scalar_problem(two_layer_scalar_net(), 0.5, 1.0);
  for (bool fold : {true, false}) {
    PdhgSolver solver(p, AssembleOptions{fold});
    const auto steps = solver.step_sizes(solver.estimate_norms(), std::vector<double>(solver.system().duals.size(), 1.0));
    SolveOptions opt;
    opt.budget = 3000;
    opt.record_every_iteration = false;
    auto [state, metrics] = solver.solve(steps, solver.default_init(), opt);
    const auto oracle = oracles::grid_minimize(
        [&](const Tensor& x) { return evaluate_objectives(p, x, forward(p.icnn, x).trace).primal_P; },
        Tensor({1}, {0.0}));
    EXPECT_NEAR(state.x()[0], oracle.x[0], 1e-5) << "fold " << fold;
    EXPECT_NEAR(state.x()[0], -0.5, 1e-5);
  }
}

TEST(Pdhg, StationaryAtConvergedState) {
  const ProblemSpec p = scalar_problem(relu_net(), 2.0, 1.0);
  PdhgSolver solver(p);
  const auto steps = solver.step_sizes(solver.estimate_norms(), {1.0});
  SolveOptions opt;
  opt.budget = 5000;
  opt.record_every_iteration = false;
  auto [state, m1] = solver.solve(steps, solver.default_init(), opt);
  const Tensor before = state.x();
  opt.budget = 10;
  auto [after, m2] = solver.solve(steps, state, opt);
  EXPECT_LE(norm2(after.x() - before), 1e-8);
}

TEST(Pdhg, DualizedKlToyIsFinite) {
  ProblemSpec p = scalar_problem(relu_net(), 4.0, 0.5);
  p.fidelity.kind = FidelityKind::KL;
  p.fidelity.background = Tensor({1}, 1.0);
  p.dualize_fidelity = true;
  p.nonneg_constraint = true;
  PdhgSolver solver(p);
  const auto steps = solver.step_sizes(solver.estimate_norms(), std::vector<double>(solver.system().duals.size(), 1.0));
  SolveOptions opt;
  opt.budget = 4000;
  auto [state, metrics] = solver.solve(steps, solver.default_init(), opt);
  // d/dx [x + 1 - 4 log(x + 1)] + 0.5 = 0  =>  x + 1 = 4 / 1.5
  EXPECT_NEAR(state.x()[0], 4.0 / 1.5 - 1.0, 1e-5);
}

TEST(Pdhg, NonFiniteIsReported) {
  ProblemSpec p = scalar_problem(relu_net(), 1.0, 1.0);
  PdhgSolver solver(p);
  auto steps = solver.step_sizes(solver.estimate_norms(), {1.0});
  SaddleState s = solver.default_init();
  s.u[0][0] = std::numeric_limits<double>::quiet_NaN();
  SolveOptions opt;
  opt.budget = 3;
  try {
    solver.solve(steps, s, opt);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.iteration(), 1u);
    EXPECT_EQ(e.block(), "x");
  }
}

TEST(Pdhg, KlWithoutDualizationRejected) {
  ProblemSpec p = scalar_problem(relu_net(), 1.0, 1.0);
  p.fidelity.kind = FidelityKind::KL;
  p.fidelity.background = Tensor({1}, 1.0);
  EXPECT_THROW(PdhgSolver{p}, Error);
}

TEST(Subgradient, ConstantStepHalvesError) {
  MlpTemplate t;
  t.input_dim = 3;
  ProblemSpec p = scalar_problem(random_admissible(0, t), 0.0, 0.0);
  p.measurement = Tensor({3}, {1.0, -2.0, 0.5});
  SolveOptions opt;
  opt.budget = 1;
  auto [x1, m1] = subgradient_solve(p, SubgradientMode::constant(0.5), Tensor({3}), opt);
  EXPECT_NEAR(norm2(x1 - p.measurement), 0.5 * norm2(p.measurement), 1e-14);
  opt.budget = 10;
  auto [x10, m10] = subgradient_solve(p, SubgradientMode::constant(0.5), Tensor({3}), opt);
  EXPECT_NEAR(norm2(x10 - p.measurement), std::pow(0.5, 10) * norm2(p.measurement), 1e-14);
}

TEST(Subgradient, DiminishingToy) {
  const ProblemSpec p = scalar_problem(relu_net(), 2.0, 1.0);
  SolveOptions opt;
  opt.budget = 10000;
  auto [x, m] = subgradient_solve(p, SubgradientMode::diminishing(1.0), Tensor({1}, {2.0}), opt);
  EXPECT_NEAR(x[0], 1.0, 1e-2);
  for (std::size_t k = 1; k < m.best_objective.size(); ++k) {
    EXPECT_LE(m.best_objective[k], m.best_objective[k - 1]);
  }
}

TEST(StopRule, Arithmetic) {
  EXPECT_TRUE(stop_rule(1.0009, 1e-3, 1.0).stop);
  EXPECT_TRUE(stop_rule(1.0, 1e-3, 1.0).stop);
  EXPECT_FALSE(stop_rule(1.002, 1e-3, 1.0).stop);
  const auto d = stop_rule(1e-4, 1e-3, 0.0);
  EXPECT_TRUE(d.absolute_fallback);
  EXPECT_TRUE(d.stop);
}

TEST(StopRule, FirstCrossing) {
  const std::vector<double> seq{2.0, 1.5, 1.01, 1.0005, 1.0001};
  const auto k = first_crossing(seq, 1e-3, 1.0);
  ASSERT_TRUE(k.has_value());
  EXPECT_EQ(*k, 3u);
  EXPECT_FALSE(first_crossing({2.0, 1.5}, 1e-3, 1.0).has_value());
}

TEST(MetricsCsv, HeaderAndDigits) {
  RunMetrics m;
  IterationRecord r;
  r.iter = 3;
  r.objectives.primal_P = 1.0 / 3.0;
  m.records.push_back(r);
  std::ostringstream os;
  write_metrics_csv(m, os);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')),
            "iter,objective_P,objective_P1,data_term,reg_term,feasibility,psnr,seconds");
  EXPECT_NE(s.find("3,0.33333333333333331,"), std::string::npos);
}
