#include <iostream>

#include "CLI11.hpp"
#include "icnnpd_cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace icnnpd::cli;

  CLI::App app{"Variational reconstruction with ICNN regularizers via epigraphical PDHG"};
  app.require_subcommand(1);

  Overrides ov;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Global seed, overrides the config");
  auto* budget_opt = app.add_option("--budget", budget, "Iteration budget, overrides the config")
                         ->check(CLI::PositiveNumber);
  app.add_option("--jobs", ov.jobs, "Parallel sweep jobs")->check(CLI::PositiveNumber);
  std::string out_dir;
  auto* out_opt = app.add_option("--out", out_dir, "Output directory, overrides the config");

  std::string config, weights;
  auto* solve = app.add_subcommand("solve", "Run every solver entry of a config");
  solve->add_option("config", config, "JSON config")->required();
  auto* sweep = app.add_subcommand("sweep", "PDHG over the c grid of a config");
  sweep->add_option("config", config, "JSON config")->required();
  auto* verify = app.add_subcommand("verify", "Run the built-in property suites");
  auto* norm = app.add_subcommand("norm", "Estimate operator norms of a weights directory");
  norm->add_option("weights", weights, "Weights directory")->required();
  auto* adjoint = app.add_subcommand("adjoint-test", "Adjoint identity for a weights directory");
  adjoint->add_option("weights", weights, "Weights directory")->required();
  for (auto* sub : {solve, sweep, verify, norm, adjoint}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) ov.seed = seed;
  if (*budget_opt) ov.budget = budget;
  if (*out_opt) ov.output_dir = out_dir;

  if (*solve) return cmd_solve(config, ov, std::cout, std::cerr);
  if (*sweep) return cmd_sweep(config, ov, std::cout, std::cerr);
  if (*verify) {
    VerifyOptions vo;
    vo.seed = ov.seed.value_or(0);
    return cmd_verify(vo, std::cout);
  }
  if (*norm) return cmd_norm(weights, ov, std::cout, std::cerr);
  return cmd_adjoint_test(weights, ov, std::cout, std::cerr);
}
