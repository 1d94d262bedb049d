#include "icnnpd_cli/commands.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "icnnpd/blocks.hpp"
#include "icnnpd_cli/experiment.hpp"

namespace icnnpd::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const NormEstimate& e) {
  return {{"value", e.value},
          {"inflated", e.inflated},
          {"iterations", e.iterations},
          {"converged", e.converged}};
}

json to_json(const BlockNorms& norms) {
  json out = json::array();
  for (const auto& [name, e] : norms.estimates) {
    json j = to_json(e);
    j["operator"] = name;
    out.push_back(std::move(j));
  }
  return out;
}

json to_json(const StepSizes& s) {
  json blocks = json::array();
  for (std::size_t i = 0; i < s.sigma.size(); ++i) {
    blocks.push_back({{"block", s.layout.blocks.at(i).label}, {"c", s.c[i]}, {"sigma", s.sigma[i]}});
  }
  json primal = json::array();
  json inequalities = json::array();
  bool certified = true;
  for (std::size_t j = 0; j < s.tau.size(); ++j) {
    primal.push_back({{"block", s.layout.primal_labels.at(j)}, {"tau", s.tau[j]}});
  }
  for (std::size_t j = 0; j < s.certificate.size(); ++j) {
    certified = certified && s.certificate[j] <= 1.0 + 1e-12;
    inequalities.push_back({{"inequality", s.inequalities.at(j)}, {"lhs", s.certificate[j]}});
  }
  return {{"dual", blocks}, {"primal", primal}, {"inequalities", inequalities}, {"certified", certified}};
}

json seeds_json(const RunConfig& cfg, const Seeds& s) {
  return {{"global", cfg.seed},
          {"phantom", s.phantom},
          {"noise", s.noise},
          {"weights", s.weights},
          {"power_iteration", s.power},
          {"offsets",
           {{"phantom", kPhantomSeedOffset},
            {"noise", kNoiseSeedOffset},
            {"weights", kWeightsSeedOffset},
            {"power_iteration", kPowerSeedOffset}}}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

void write_metrics(const fs::path& path, const RunMetrics& metrics) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_metrics_csv(metrics, os);
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

void check_c(const std::vector<double>& c, const PdhgContext& pdhg, const std::string& field) {
  const std::size_t n = pdhg.solver.system().duals.size();
  if (c.size() != n) {
    std::string labels;
    for (const auto& d : pdhg.solver.system().duals) labels += (labels.empty() ? "" : ", ") + d.label;
    throw ConfigError(field, "expected " + std::to_string(n) + " values (" + labels + "), got " +
                                 std::to_string(c.size()));
  }
}

// Load, override and build; config-level failures map to kExitConfig.
struct Setup {
  RunConfig config;
  std::optional<Instance> instance;
  std::optional<PdhgContext> pdhg;
};

int prepare(const fs::path& path, const Overrides& ov, Setup& s, std::ostream& err) {
  try {
    s.config = apply_overrides(load_config(path), ov);
    s.instance.emplace(build_instance(s.config));
    s.pdhg.emplace(*s.instance);
    for (std::size_t i = 0; i < s.config.solvers.size(); ++i) {
      if (s.config.solvers[i].kind == SolverEntry::Kind::PDHG) {
        check_c(s.config.solvers[i].c, *s.pdhg, "solvers[" + std::to_string(i) + "].c");
      }
    }
    make_dir(s.config.output_dir);
  } catch (const std::exception& e) {
    err << "error: " << path.string() << ": " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

json task_json(const RunConfig& cfg) {
  json t = {{"kind", to_string(cfg.task.task)}, {"image_side", cfg.task.image_side}};
  if (cfg.image) t["image"] = cfg.image->string();
  else t["phantom"] = to_string(cfg.phantom);
  return t;
}

}  // namespace

RunConfig apply_overrides(RunConfig config, const Overrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.budget) config.budget = *overrides.budget;
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
  config.validate();
  return config;
}

int cmd_solve(const fs::path& config_path, const Overrides& overrides, std::ostream& out,
              std::ostream& err) {
  Setup s;
  if (const int rc = prepare(config_path, overrides, s, err)) return rc;
  const RunConfig& cfg = s.config;
  const Instance& in = *s.instance;
  const PdhgContext& pdhg = *s.pdhg;

  try {
    std::vector<SolverRun> runs;
    for (std::size_t i = 0; i < cfg.solvers.size(); ++i) {
      runs.push_back(run_entry(in, pdhg, cfg.solvers[i], cfg.budget, cfg.record_wall_clock));
      runs.back().name = entry_name(cfg.solvers[i], i);
    }
    const Reference ref = compute_reference(in, pdhg, reference_c(cfg, pdhg), runs);

    json solvers = json::array();
    for (const auto& r : runs) {
      const fs::path dir = cfg.output_dir / r.name;
      make_dir(dir);
      write_metrics(dir / "metrics.csv", r.metrics);
      write_pgm(r.x, dir / "x.pgm");
      write_blob(r.x, dir / "x.tnsb");

      const auto& last = r.metrics.records.back();
      const auto hit = iterations_to_target(r.metrics, cfg.target_rel_error, ref.value);
      json j = {{"name", r.name},
                {"kind", to_string(r.entry.kind)},
                {"final_objective", number_or_null(last.objectives.primal_P)},
                {"best_objective", number_or_null(r.metrics.best_objective.back())},
                {"final_psnr", number_or_null(last.psnr)},
                {"final_feasibility", r.final_feasibility},
                {"iterations_to_target", hit ? json(*hit) : json(nullptr)},
                {"relative_error", number_or_null((r.metrics.best_objective.back() - ref.value) /
                                                  std::abs(ref.value))}};
      if (r.steps) {
        j["c"] = r.entry.c;
        j["step_sizes"] = to_json(*r.steps);
      } else {
        j["step"] = r.entry.step;
      }
      if (cfg.record_wall_clock) j["seconds"] = last.seconds;
      solvers.push_back(std::move(j));
      out << r.name << ": objective " << last.objectives.primal_P << ", psnr " << last.psnr
          << ", iterations to target " << (hit ? std::to_string(*hit) : "not reached") << "\n";
    }

    const auto start = evaluate_objectives(in.problem, in.x0, forward(in.problem.icnn, in.x0).trace);
    json summary = {
        {"task", task_json(cfg)},
        {"budget", cfg.budget},
        {"target_rel_error", cfg.target_rel_error},
        {"seeds", seeds_json(cfg, in.seeds)},
        {"norm_estimates", to_json(pdhg.norms)},
        {"start", {{"objective", number_or_null(start.primal_P)}, {"psnr", number_or_null(psnr(in.x0, in.truth))}}},
        {"reference",
         {{"value", ref.value},
          {"pdhg_value", ref.pdhg_value},
          {"budget", ref.budget},
          {"c", ref.c},
          {"final_feasibility", ref.final_feasibility},
          {"note", ref.note}}},
        {"solvers", solvers}};
    write_text(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
    out << "reference objective " << ref.value << "; wrote " << (cfg.output_dir / "summary.json").string()
        << "\n";
  } catch (const std::exception& e) {
    err << "error: solver aborted: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}

int cmd_sweep(const fs::path& config_path, const Overrides& overrides, std::ostream& out,
              std::ostream& err) {
  Setup s;
  if (const int rc = prepare(config_path, overrides, s, err)) return rc;
  const RunConfig& cfg = s.config;
  const Instance& in = *s.instance;
  const PdhgContext& pdhg = *s.pdhg;
  if (!cfg.sweep) {
    err << "error: " << config_path.string() << ": sweep: required field is missing\n";
    return kExitConfig;
  }
  const auto& grid = cfg.sweep->c_grid;
  try {
    check_c(std::vector<double>(grid.size()), pdhg, "sweep.c_grid");
  } catch (const std::exception& e) {
    err << "error: " << config_path.string() << ": " << e.what() << "\n";
    return kExitConfig;
  }

  std::vector<std::vector<double>> combos{{}};
  for (const auto& axis : grid) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : combos) {
      for (double v : axis) {
        next.push_back(prefix);
        next.back().push_back(v);
      }
    }
    combos = std::move(next);
  }

  struct Row {
    double average = 0.0;
    double final_objective = 0.0;
    json steps;
  };
  std::vector<Row> rows(combos.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < combos.size(); i = next++) {
      try {
        SolverEntry e;
        e.c = combos[i];
        const SolverRun r = run_entry(in, pdhg, e, cfg.budget);
        const fs::path dir = cfg.output_dir / "jobs" / ("job_" + std::to_string(i));
        make_dir(dir);
        write_metrics(dir / "metrics.csv", r.metrics);
        double sum = 0.0;
        for (std::size_t k = 1; k < r.metrics.records.size(); ++k) sum += r.metrics.records[k].objectives.primal_P;
        rows[i].average = sum / static_cast<double>(r.metrics.records.size() - 1);
        rows[i].final_objective = r.metrics.records.back().objectives.primal_P;
        rows[i].steps = to_json(*r.steps);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(overrides.jobs, combos.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  try {
    if (failure) std::rethrow_exception(failure);
    std::string csv;
    for (std::size_t b = 0; b < grid.size(); ++b) csv += "c" + std::to_string(b) + ",";
    csv += "avg_objective,final_objective\n";
    char buf[64];
    std::size_t best = 0;
    for (std::size_t i = 0; i < combos.size(); ++i) {
      for (double c : combos[i]) {
        const auto res = std::to_chars(buf, buf + sizeof buf, c);
        csv.append(buf, res.ptr);
        csv += ',';
      }
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", rows[i].average, rows[i].final_objective);
      csv += buf;
      if (rows[i].average < rows[best].average) best = i;
    }
    write_text(cfg.output_dir / "sweep.csv", csv);

    json runs = json::array();
    for (std::size_t i = 0; i < combos.size(); ++i) {
      runs.push_back({{"job", i},
                      {"c", combos[i]},
                      {"avg_objective", rows[i].average},
                      {"final_objective", rows[i].final_objective},
                      {"step_sizes", rows[i].steps}});
    }
    json summary = {{"task", task_json(cfg)},
                    {"budget", cfg.budget},
                    {"seeds", seeds_json(cfg, in.seeds)},
                    {"norm_estimates", to_json(pdhg.norms)},
                    {"combinations", combos.size()},
                    {"argmin",
                     {{"job", best},
                      {"c", combos[best]},
                      {"avg_objective", rows[best].average},
                      {"final_objective", rows[best].final_objective}}},
                    {"runs", runs}};
    write_text(cfg.output_dir / "summary.json", summary.dump(2) + "\n");
    out << combos.size() << " combinations; lowest average objective " << rows[best].average
        << " at job " << best << "\n";
  } catch (const std::exception& e) {
    err << "error: solver aborted: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out) {
  const auto results = run_verify(options);
  print_suite_table(results, out);
  for (const auto& r : results) {
    if (!r.passed) return kExitFailure;
  }
  return kExitOk;
}

int cmd_norm(const fs::path& weights_dir, const Overrides& overrides, std::ostream& out,
             std::ostream& err) {
  try {
    const IcnnSpec net = load_weights(weights_dir);
    NormEstimateOptions opts;
    opts.seed = overrides.seed.value_or(0);
    const BlockNorms norms = estimate_block_norms(assemble_blocks(net), opts);
    char line[160];
    std::snprintf(line, sizeof line, "%-28s %14s %14s %8s %s\n", "operator", "norm", "inflated", "iters",
                  "converged");
    out << line;
    for (const auto& [name, e] : norms.estimates) {
      std::snprintf(line, sizeof line, "%-28s %14.8g %14.8g %8zu %s\n", name.c_str(), e.value, e.inflated,
                    e.iterations, e.converged ? "yes" : "no");
      out << line;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

int cmd_adjoint_test(const fs::path& weights_dir, const Overrides& overrides, std::ostream& out,
                     std::ostream& err) {
  std::vector<NamedOperator> ops;
  try {
    const IcnnSpec net = load_weights(weights_dir);
    for (std::size_t l = 0; l < net.depth(); ++l) {
      const auto& layer = net.layers[l];
      const std::string tag = "layer" + std::to_string(l + 1);
      if (layer.V) ops.push_back({tag + " V", layer.V});
      if (layer.W) ops.push_back({tag + " W", layer.W});
    }
    const BlockSystem sys = assemble_blocks(net);
    for (std::size_t i = 0; i < sys.duals.size(); ++i) {
      ops.push_back({"K_" + std::to_string(i) + " (" + sys.duals[i].label + ")", sys.block_operator(i)});
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  const auto r = verify_adjoint(ops, overrides.seed.value_or(0));
  print_suite_table({r}, out);
  return r.passed ? kExitOk : kExitFailure;
}

}  // namespace icnnpd::cli
