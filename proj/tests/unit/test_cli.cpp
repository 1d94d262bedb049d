#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "icnnpd_cli/commands.hpp"
#include "icnnpd_cli/experiment.hpp"

using namespace icnnpd;
using namespace icnnpd::cli;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("icnnpd_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json minimal_config() {
  return nlohmann::json::parse(R"({
    "seed": 7,
    "budget": 15,
    "task": {"kind": "denoise_salt_pepper", "image_side": 16, "phantom": "smooth_blobs", "sp_density": 0.1},
    "problem": {"fidelity": "l1", "lambda": 0.02, "gamma": 50},
    "weights": {"template": "conv", "filters": 2, "pool": 4, "hidden": 4},
    "solvers": [
      {"kind": "pdhg", "c": [1, 0.03], "name": "pd"},
      {"kind": "smc", "step": 0.1},
      {"kind": "smd", "step": 1}
    ]
  })");
}

fs::path write_config(const fs::path& dir, nlohmann::json cfg) {
  cfg["output_dir"] = (dir / "out").string();
  const auto p = dir / "config.json";
  std::ofstream(p) << cfg.dump(2);
  return p;
}

// Wraps an operator and negates its adjoint.
class SignFlippedAdjoint final : public LinearOperator {
 public:
  explicit SignFlippedAdjoint(OperatorPtr inner)
      : LinearOperator(inner->input_shape(), inner->output_shape(), std::nullopt), inner_(std::move(inner)) {}
  OperatorKind kind() const noexcept override { return inner_->kind(); }
  std::string describe() const override { return "SignFlipped(" + inner_->describe() + ")"; }
  void apply_add(std::span<const double> x, double alpha, std::span<double> y) const override {
    inner_->apply_add(x, alpha, y);
  }
  void adjoint_add(std::span<const double> w, double alpha, std::span<double> x) const override {
    inner_->adjoint_add(w, -alpha, x);
  }

 private:
  OperatorPtr inner_;
};

}  // namespace

TEST(Config, ParsesMinimal) {
  const RunConfig c = parse_config(minimal_config().dump());
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.budget, 15u);
  EXPECT_EQ(c.task.task, TaskKind::DenoiseSaltPepper);
  EXPECT_EQ(c.problem.fidelity, FidelityKind::L1);
  ASSERT_EQ(c.solvers.size(), 3u);
  EXPECT_EQ(c.solvers[2].kind, SolverEntry::Kind::SMD);
  EXPECT_EQ(c.reference_multiplier, 10u);
}

TEST(Config, ErrorsNameLineOrField) {
  try {
    parse_config("{\n  \"seed\": 1,\n  \"budget\": ]\n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  auto j = minimal_config();
  j["problem"].erase("gamma");
  try {
    parse_config(j.dump());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "problem.gamma");
  }
  j = minimal_config();
  j["solvers"][1]["stepp"] = 1;
  try {
    parse_config(j.dump());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "solvers[1].stepp");
  }
  j = minimal_config();
  j["solvers"] = nlohmann::json::array();
  EXPECT_THROW(parse_config(j.dump()), ConfigError);
  j = minimal_config();
  j["budget"] = 0;
  EXPECT_THROW(parse_config(j.dump()), ConfigError);
}

TEST(Config, SeedSplitting) {
  RunConfig c = parse_config(minimal_config().dump());
  const Seeds s = split_seed(100, c);
  EXPECT_EQ(s.phantom, 100 + kPhantomSeedOffset);
  EXPECT_EQ(s.noise, 100 + kNoiseSeedOffset);
  EXPECT_EQ(s.weights, 100 + kWeightsSeedOffset);
  EXPECT_EQ(s.power, 100 + kPowerSeedOffset);
  c.weights.seed = 5;
  EXPECT_EQ(split_seed(100, c).weights, 5u);
}

TEST(Solve, MinimalConfigWritesThreeFilesPerSolver) {
  const auto dir = fresh_dir("solve_min");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_solve(write_config(dir, minimal_config()), {}, out, err), kExitOk) << err.str();
  for (const char* name : {"pd", "smc_1", "smd_2"}) {
    for (const char* f : {"metrics.csv", "x.pgm", "x.tnsb"}) {
      EXPECT_TRUE(fs::exists(dir / "out" / name / f)) << name << "/" << f;
    }
  }
  const auto summary = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  EXPECT_EQ(summary["seeds"]["global"], 7);
  EXPECT_EQ(summary["seeds"]["noise"], 7 + kNoiseSeedOffset);
  EXPECT_EQ(summary["solvers"].size(), 3u);
  const auto& pd = summary["solvers"][0];
  EXPECT_TRUE(pd["step_sizes"]["certified"].get<bool>());
  for (const auto& ineq : pd["step_sizes"]["inequalities"]) EXPECT_LE(ineq["lhs"].get<double>(), 1.0 + 1e-12);
  EXPECT_FALSE(summary["norm_estimates"].empty());
  EXPECT_EQ(summary["reference"]["budget"], 150);
  EXPECT_LE(summary["reference"]["value"].get<double>(), pd["best_objective"].get<double>());

  // The final image blob has the signal shape.
  const Tensor x = read_blob(dir / "out" / "pd" / "x.tnsb");
  EXPECT_EQ(x.shape(), (Shape{1, 16, 16}));
}

TEST(Solve, InvalidJsonIsAConfigError) {
  const auto dir = fresh_dir("solve_bad");
  std::ofstream(dir / "bad.json") << "{ \"seed\": 1,, }";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_solve(dir / "bad.json", {}, out, err), kExitConfig);
  EXPECT_NE(err.str().find("line 1"), std::string::npos) << err.str();
  EXPECT_EQ(cmd_solve(dir / "missing.json", {}, out, err), kExitConfig);
}

TEST(Solve, WrongNumberOfStepConstants) {
  const auto dir = fresh_dir("solve_c");
  auto j = minimal_config();
  j["solvers"][0]["c"] = {1.0};
  std::ostringstream out, err;
  EXPECT_EQ(cmd_solve(write_config(dir, j), {}, out, err), kExitConfig);
  EXPECT_NE(err.str().find("solvers[0].c"), std::string::npos) << err.str();
}

TEST(Solve, DivergenceExitsNonzero) {
  const auto dir = fresh_dir("solve_diverge");
  auto j = minimal_config();
  j["problem"] = {{"fidelity", "l2"}, {"lambda", 1.0}, {"gamma", 50}};
  j["solvers"] = {{{"kind", "smc"}, {"step", 1e300}}};
  std::ostringstream out, err;
  EXPECT_EQ(cmd_solve(write_config(dir, j), {}, out, err), kExitSolver);
  EXPECT_NE(err.str().find("aborted"), std::string::npos) << err.str();
}

TEST(Solve, BitwiseDeterministic) {
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  std::ostringstream out, err;
  ASSERT_EQ(cmd_solve(write_config(a, minimal_config()), {}, out, err), kExitOk);
  ASSERT_EQ(cmd_solve(write_config(b, minimal_config()), {}, out, err), kExitOk);
  for (const char* name : {"pd", "smc_1", "smd_2"}) {
    EXPECT_EQ(slurp(a / "out" / name / "metrics.csv"), slurp(b / "out" / name / "metrics.csv")) << name;
    EXPECT_EQ(slurp(a / "out" / name / "x.tnsb"), slurp(b / "out" / name / "x.tnsb")) << name;
  }
  EXPECT_EQ(slurp(a / "out" / "summary.json").size(), slurp(b / "out" / "summary.json").size());
}

TEST(Solve, OverridesApply) {
  const auto dir = fresh_dir("overrides");
  Overrides ov;
  ov.seed = 3;
  ov.budget = 4;
  ov.output_dir = dir / "elsewhere";
  std::ostringstream out, err;
  ASSERT_EQ(cmd_solve(write_config(dir, minimal_config()), ov, out, err), kExitOk) << err.str();
  const auto summary = nlohmann::json::parse(slurp(dir / "elsewhere" / "summary.json"));
  EXPECT_EQ(summary["seeds"]["global"], 3);
  EXPECT_EQ(summary["budget"], 4);
  std::istringstream csv(slurp(dir / "elsewhere" / "pd" / "metrics.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 1u + 5u);  // header, start and four iterations
}

TEST(Sweep, TwoByTwoGridHasFourRowsAndArgmin) {
  const auto dir = fresh_dir("sweep22");
  auto j = minimal_config();
  j["sweep"] = {{"c_grid", {{0.3, 1.0}, {0.01, 0.1}}}};
  Overrides ov;
  ov.jobs = 3;
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep(write_config(dir, j), ov, out, err), kExitOk) << err.str();
  std::istringstream csv(slurp(dir / "out" / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "c0,c1,avg_objective,final_objective");
  std::vector<double> avg;
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string cell;
    for (int k = 0; k < 3; ++k) std::getline(row, cell, ',');
    avg.push_back(std::stod(cell));
  }
  ASSERT_EQ(avg.size(), 4u);
  const auto summary = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  const std::size_t best = summary["argmin"]["job"];
  for (double v : avg) EXPECT_LE(summary["argmin"]["avg_objective"].get<double>(), v);
  EXPECT_EQ(summary["argmin"]["avg_objective"].get<double>(), avg[best]);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_TRUE(fs::exists(dir / "out" / "jobs" / ("job_" + std::to_string(i)) / "metrics.csv"));
    EXPECT_TRUE(summary["runs"][i]["step_sizes"]["certified"].get<bool>());
  }

  // Parallel and serial sweeps agree.
  const auto serial = fresh_dir("sweep22_serial");
  ASSERT_EQ(cmd_sweep(write_config(serial, j), {}, out, err), kExitOk);
  EXPECT_EQ(slurp(dir / "out" / "sweep.csv"), slurp(serial / "out" / "sweep.csv"));
}

TEST(Sweep, OneByOneEqualsSolve) {
  const auto dir = fresh_dir("sweep11");
  auto j = minimal_config();
  j["sweep"] = {{"c_grid", {{1.0}, {0.03}}}};
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep(write_config(dir, j), {}, out, err), kExitOk) << err.str();
  const auto sweep = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  const auto solve_dir = fresh_dir("sweep11_solve");
  ASSERT_EQ(cmd_solve(write_config(solve_dir, j), {}, out, err), kExitOk);
  const auto solve = nlohmann::json::parse(slurp(solve_dir / "out" / "summary.json"));
  EXPECT_EQ(sweep["argmin"]["final_objective"].get<double>(),
            solve["solvers"][0]["final_objective"].get<double>());
  EXPECT_EQ(slurp(dir / "out" / "jobs" / "job_0" / "metrics.csv"),
            slurp(solve_dir / "out" / "pd" / "metrics.csv"));
}

TEST(Sweep, MissingGridIsAConfigError) {
  const auto dir = fresh_dir("sweep_none");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_sweep(write_config(dir, minimal_config()), {}, out, err), kExitConfig);
  EXPECT_NE(err.str().find("sweep"), std::string::npos);
}

TEST(Verify, SignFlipFailsAndNamesOperator) {
  auto ops = standard_operators(0);
  const auto clean = verify_adjoint(ops, 0);
  EXPECT_TRUE(clean.passed);
  ops.push_back({"flipped radon", std::make_shared<SignFlippedAdjoint>(make_radon(default_geometry(16, 12), {1, 16, 16}))});
  const auto broken = verify_adjoint(ops, 0);
  EXPECT_FALSE(broken.passed);
  ASSERT_EQ(broken.failures.size(), 1u);
  EXPECT_NE(broken.failures[0].find("flipped radon"), std::string::npos);

  std::ostringstream table;
  print_suite_table({clean, broken}, table);
  EXPECT_NE(table.str().find("FAIL"), std::string::npos);
  EXPECT_NE(table.str().find("seconds"), std::string::npos);
}

TEST(Verify, FastSuitesPass) {
  for (const auto& r : {verify_prox(1, 200), verify_convexity(1), verify_relaxation_fixture()}) {
    EXPECT_TRUE(r.passed) << r.name;
    EXPECT_GT(r.cases, 0u);
  }
}

TEST(Tools, NormAndAdjointTestOnWeightsDir) {
  const auto dir = fresh_dir("weights");
  ConvTemplate t;
  t.image_side = 16;
  t.filters = 2;
  t.pool = 4;
  save_weights(random_admissible(1, t), dir / "w");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_norm(dir / "w", {}, out, err), kExitOk) << err.str();
  EXPECT_NE(out.str().find("Conv2D"), std::string::npos) << out.str();
  std::ostringstream out2;
  EXPECT_EQ(cmd_adjoint_test(dir / "w", {}, out2, err), kExitOk);
  EXPECT_NE(out2.str().find("PASS"), std::string::npos);
  EXPECT_EQ(cmd_norm(dir / "nothing", {}, out, err), kExitConfig);
}
