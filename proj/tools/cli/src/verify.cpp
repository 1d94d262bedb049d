#include "icnnpd_cli/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>

#include "icnnpd/blocks.hpp"
#include "icnnpd/oracles.hpp"
#include "icnnpd/power_iteration.hpp"
#include "icnnpd/prox.hpp"
#include "icnnpd/radon.hpp"
#include "icnnpd/solver.hpp"

namespace icnnpd::cli {

void SuiteResult::fail(std::string what) {
  passed = false;
  failures.push_back(std::move(what));
}

namespace {

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

template <class F>
SuiteResult timed(const std::string& name, std::uint64_t seed, double tolerance, F&& body) {
  SuiteResult r;
  r.name = name;
  r.seed = seed;
  r.tolerance = tolerance;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.fail(std::string("exception: ") + e.what());
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

void note(SuiteResult& r, double err, const std::string& what) {
  ++r.cases;
  r.worst = std::max(r.worst, err);
  if (!(err <= r.tolerance)) r.fail(what + ": error " + fmt("%.3g", err));
}

ProblemSpec l2_problem(IcnnSpec net, Tensor y, double gamma) {
  ProblemSpec p;
  p.fidelity.kind = FidelityKind::L2;
  p.fidelity.lambda = 1.0;
  p.measurement = std::move(y);
  p.reg_weight = gamma;
  p.icnn = std::move(net);
  return p;
}

IcnnSpec small_conv_net(std::uint64_t seed, std::size_t side, std::size_t filters, std::size_t pool) {
  ConvTemplate t;
  t.image_side = side;
  t.filters = filters;
  t.kernel = 3;
  t.pool = pool;
  t.hidden = 4;
  return random_admissible(seed, t);
}

}  // namespace

double adjoint_defect(const LinearOperator& op, std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) {
    const Tensor x = uniform(op.input_shape(), rng);
    const Tensor w = uniform(op.output_shape(), rng);
    const double lhs = dot(op.apply(x), w);
    const double rhs = dot(x, op.adjoint(w));
    worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + norm2(x) * norm2(w)));
  }
  return worst;
}

std::vector<NamedOperator> standard_operators(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<NamedOperator> ops;
  ops.push_back({"identity", make_identity({3, 4})});
  ops.push_back({"dense", make_dense(uniform({5, 7}, rng))});
  ops.push_back({"conv2d", make_conv2d(uniform({3, 2, 3, 3}, rng), 8, 8)});
  ops.push_back({"avgpool2d", make_avgpool2d({2, 8, 8}, 4)});
  Tensor mask({1, 6, 6});
  for (auto& v : mask.data()) v = rng() % 2 ? 1.0 : 0.0;
  ops.push_back({"mask", make_mask(mask)});
  ops.push_back({"radon", make_radon(default_geometry(16, 12), {1, 16, 16})});
  ops.push_back({"compose", make_compose({make_conv2d(uniform({2, 1, 3, 3}, rng), 8, 8),
                                          make_avgpool2d({2, 8, 8}, 2)})});

  const auto add_blocks = [&](const std::string& tag, const BlockSystem& sys) {
    for (std::size_t i = 0; i < sys.duals.size(); ++i) {
      ops.push_back({tag + " K_" + std::to_string(i) + " (" + sys.duals[i].label + ")",
                     sys.block_operator(i)});
    }
    ops.push_back({tag + " K", sys.stacked_operator()});
  };
  MlpTemplate mt;
  mt.input_dim = 4;
  mt.hidden = {5, 5};
  mt.residual = {true};
  add_blocks("mlp", assemble_blocks(random_admissible(seed, mt), make_identity({4}), {false}));
  const IcnnSpec conv = small_conv_net(seed, 16, 2, 4);
  add_blocks("ct", assemble_blocks(conv, make_radon(default_geometry(16, 12), {1, 16, 16})));
  return ops;
}

SuiteResult verify_prox(std::uint64_t seed, std::size_t instances) {
  return timed("prox", seed, 1e-6, [&](SuiteResult& r) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-4, 4), pos(0.1, 3);
    const auto where = [&](const char* op, std::size_t k) {
      return std::string(op) + " instance " + std::to_string(k) + " (seed " + std::to_string(seed) + ")";
    };

    // Soft shrinkage: prox of lambda |v - y|.
    int shrink[3] = {0, 0, 0};
    for (std::size_t k = 0; k < instances; ++k) {
      const double lam = pos(rng), s = pos(rng), y = u(rng), x = u(rng);
      const double got = prox(L1Shift{lam, Tensor({1}, {y}), {}}, s, Tensor({1}, {x}))[0];
      const double want = numeric_prox_oracle([&](double v) { return lam * std::abs(v - y); }, s, x,
                                              {-20, 20});
      ++shrink[x - y > s * lam ? 0 : (x - y < -s * lam ? 1 : 2)];
      note(r, std::abs(got - want), where("soft shrinkage", k));
    }
    for (int b = 0; b < 3; ++b) {
      if (shrink[b] == 0) r.fail("soft shrinkage branch " + std::to_string(b) + " never reached");
    }

    // KL conjugate, against a nested oracle f* evaluated by golden section.
    int kl[3] = {0, 0, 0};
    std::uniform_real_distribution<double> yd(0.1, 5), rd(0.0, 3);
    for (std::size_t k = 0; k < instances; ++k) {
      const bool zero_y = k % 4 == 3;
      const double y = zero_y ? 0.0 : yd(rng), bg = rd(rng), s = pos(rng), w = u(rng);
      const double got = prox_kl_conjugate(Tensor({1}, {y}), Tensor({1}, {bg}), s, Tensor({1}, {w}))[0];
      std::function<double(double)> fstar;
      if (zero_y) {
        // f(u) = u + r on u >= -r, so f*(v) = -r v for v <= 1.
        fstar = [&](double v) { return -bg * v; };
        ++kl[w + s * bg < 1.0 ? 0 : 1];
      } else {
        fstar = [&](double v) {
          auto neg = [&](double t) { return -(t * v - (t + bg - y + y * std::log(y / (t + bg)))); };
          const double tmax = y / std::max(1e-3, 1.0 - v) * 4 + 10;
          return -neg(oracles::golden_section(neg, -bg + 1e-12, tmax, 1e-14));
        };
        ++kl[2];
      }
      const double want = numeric_prox_oracle(fstar, s, w, {std::min(w, 1.0) - 20.0, 1.0 - 1e-9, true});
      note(r, std::abs(got - want), where("KL conjugate", k));
    }
    for (int b = 0; b < 3; ++b) {
      if (kl[b] == 0) r.fail("KL conjugate branch " + std::to_string(b) + " never reached");
    }

    // Leaky ReLU epigraph projection, all four regions for each alpha.
    for (double a : {0.0, 0.2}) {
      int hits[4] = {0, 0, 0, 0};
      for (std::size_t k = 0; k < instances; ++k) {
        const double p = u(rng), q = u(rng);
        const double hp = p >= 0 ? p : a * p;
        ++hits[hp <= q ? 0 : (std::abs(q) <= p ? 1 : (q <= a * p && p <= -a * q ? 2 : 3))];
        double pp = p, qq = q;
        kernels::project_leaky_epigraph(a, pp, qq);
        const auto [po, qo] = oracles::project_epigraph(Activation::leaky_relu(a), p, q);
        note(r, std::max(std::abs(pp - po), std::abs(qq - qo)),
             where(a == 0.0 ? "ReLU epigraph" : "leaky epigraph", k));
      }
      for (int b = 0; b < 4; ++b) {
        if (hits[b] == 0) r.fail("epigraph alpha " + fmt("%g", a) + " region " + std::to_string(b) + " never reached");
      }
    }

    // Final-layer conjugate against the primal prox through Moreau.
    int clip[3] = {0, 0, 0};
    for (std::size_t k = 0; k < instances; ++k) {
      const double a = pos(rng), b = u(rng), s = pos(rng), w = u(rng);
      const double got = prox_final_conjugate(Tensor({1}, {a}), Tensor({1}, {b}), s, Tensor({1}, {w}))[0];
      const double primal = numeric_prox_oracle([&](double v) { return a * std::max(v + b, 0.0); },
                                                1.0 / s, w / s, {-100, 100});
      const double t = w + s * b;
      ++clip[t < 0 ? 0 : (t > a ? 1 : 2)];
      note(r, std::abs(got - (w - s * primal)), where("final-layer conjugate", k));
    }
    for (int b = 0; b < 3; ++b) {
      if (clip[b] == 0) r.fail("final-layer conjugate branch " + std::to_string(b) + " never reached");
    }
  });
}

SuiteResult verify_adjoint(const std::vector<NamedOperator>& operators, std::uint64_t seed) {
  return timed("adjoint", seed, 1e-8, [&](SuiteResult& r) {
    for (std::size_t i = 0; i < operators.size(); ++i) {
      const auto& o = operators[i];
      note(r, adjoint_defect(*o.op, 100, seed + i),
           o.name + " [" + o.op->describe() + "] (seed " + std::to_string(seed + i) + ")");
    }
  });
}

SuiteResult verify_norms(std::uint64_t seed) {
  return timed("norms", seed, 1e-5, [&](SuiteResult& r) {
    NormEstimateOptions opts;
    opts.tol = 1e-14;
    opts.max_iters = 100000;
    opts.seed = seed;
    for (const auto& o : standard_operators(seed)) {
      if (o.op->input_size() > 400 || o.op->output_size() > 2000) continue;
      const double want = oracles::spectral_norm(materialize(*o.op));
      const double got = estimate_norm(*o.op, opts).value;
      note(r, std::abs(got - want) / std::max(1.0, want), o.name + " (seed " + std::to_string(seed) + ")");
    }
  });
}

SuiteResult verify_convexity(std::uint64_t seed) {
  return timed("convexity", seed, 1e-9, [&](SuiteResult& r) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> l(0.0, 1.0);
    for (std::uint64_t n = 0; n < 20; ++n) {
      IcnnSpec net;
      if (n % 5 == 4) {
        net = small_conv_net(seed + n, 8, 2, 4);
      } else {
        MlpTemplate t;
        t.input_dim = 2 + n % 4;
        t.hidden = {4, 4, 3};
        t.residual = {n % 2 == 0, false};
        t.first_activation = n % 3 == 0 ? Activation::leaky_relu(0.2) : Activation::relu();
        t.hidden_activation = n % 3 == 1 ? Activation::leaky_relu(0.5) : Activation::relu();
        net = random_admissible(seed + n, t);
      }
      for (int k = 0; k < 50; ++k) {
        const Tensor a = uniform(net.input_shape, rng, -3, 3), b = uniform(net.input_shape, rng, -3, 3);
        const double t = l(rng);
        const double lhs = forward(net, t * a + (1 - t) * b).value;
        const double rhs = t * forward(net, a).value + (1 - t) * forward(net, b).value;
        note(r, std::max(0.0, lhs - rhs),
             "network " + std::to_string(n) + " triple " + std::to_string(k) + " (seed " +
                 std::to_string(seed + n) + ")");
      }
    }
  });
}

SuiteResult verify_equivalence(std::uint64_t seed) {
  return timed("equivalence", seed, 1e-4, [&](SuiteResult& r) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> g(0.2, 2.0);
    double worst_dist = 0.0, worst_grid = 0.0;
    for (std::uint64_t k = 0; k < 25; ++k) {
      MlpTemplate t;
      t.input_dim = 2 + k % 3;
      t.hidden = {3 + k % 3};
      Tensor y = uniform({t.input_dim}, rng);
      const double gamma = g(rng);
      const ProblemSpec p = l2_problem(random_admissible(seed + k, t), std::move(y), gamma);
      PdhgSolver solver(p);
      const auto steps = solver.step_sizes(solver.estimate_norms({1e-12, 20000, seed + k, 1.01}),
                                           std::vector<double>(solver.system().duals.size(), 1.0));
      SolveOptions opts;
      opts.budget = 20000;
      opts.record_every_iteration = false;
      const auto [state, metrics] = solver.solve(steps, solver.default_init(), opts);
      const auto objective = [&](const Tensor& x) {
        return evaluate_objectives(p, x, forward(p.icnn, x).trace).primal_P;
      };
      oracles::GridSearchOptions go;
      go.points = 9;
      go.shrink = 0.8;
      go.tol = 1e-9;
      // Restarts in randomly rotated coordinates follow valleys that cross
      // the grid axes obliquely.
      auto grid = oracles::grid_minimize(objective, p.measurement, go);
      go.half_width = 0.05;
      const std::size_t n = t.input_dim;
      std::normal_distribution<double> gauss;
      for (int restart = 0, stale = 0; restart < 60 && stale < 6; ++restart) {
        std::vector<Tensor> q;
        while (q.size() < n) {
          Tensor v = uniform({n}, rng);
          for (auto& e : v.data()) e = gauss(rng);
          for (const auto& b : q) v.axpy(-dot(v, b), b);
          if (norm2(v) < 1e-8) continue;
          v *= 1.0 / norm2(v);
          q.push_back(std::move(v));
        }
        const Tensor centre = grid.x;
        const auto to_x = [&](const Tensor& c) {
          Tensor x = centre;
          for (std::size_t i = 0; i < n; ++i) x.axpy(c[i], q[i]);
          return x;
        };
        const auto again = oracles::grid_minimize([&](const Tensor& c) { return objective(to_x(c)); },
                                                  Tensor({n}), go);
        if (again.value < grid.value - 1e-13) {
          grid.value = again.value;
          grid.x = to_x(again.x);
          stale = 0;
        } else {
          ++stale;
        }
      }
      const double gap = std::abs(objective(state.x()) - grid.value);
      const Tensor exact = oracles::two_layer_l2_minimizer(p.icnn, p.measurement, p.fidelity.lambda, p.reg_weight);
      const double dist = norm2(state.x() - exact);
      worst_dist = std::max(worst_dist, dist);
      worst_grid = std::max(worst_grid, norm2(grid.x - exact));
      const std::string what = "instance " + std::to_string(k) + " (seed " + std::to_string(seed + k) + ")";
      note(r, gap, what);
      if (dist > 1e-3) r.fail(what + ": argument distance " + fmt("%.3g", dist));
    }
    r.detail = "largest distance to the exact minimizer " + fmt("%.3g", worst_dist) +
               ", grid argmin to exact " + fmt("%.3g", worst_grid);
  });
}

SuiteResult verify_step_sizes(std::uint64_t seed) {
  return timed("step-sizes", seed, 1e-6, [&](SuiteResult& r) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::string, ProblemSpec>> problems;
    MlpTemplate t;
    t.input_dim = 4;
    t.hidden = {5, 4};
    problems.emplace_back("mlp l2", l2_problem(random_admissible(seed, t), uniform({4}, rng), 1.0));
    {
      ProblemSpec p = l2_problem(small_conv_net(seed + 1, 8, 2, 4), uniform({1, 8, 8}, rng), 0.5);
      p.fidelity.kind = FidelityKind::L1;
      problems.emplace_back("conv l1", std::move(p));
    }
    {
      ProblemSpec p = l2_problem(small_conv_net(seed + 2, 8, 2, 4), Tensor(), 0.5);
      const auto g = default_geometry(8, 6);
      p.forward = make_radon(g, {1, 8, 8});
      p.measurement = uniform(p.forward->output_shape(), rng, 1.0, 5.0);
      p.fidelity.kind = FidelityKind::KL;
      p.fidelity.background = Tensor(p.measurement.shape(), 0.5);
      p.dualize_fidelity = true;
      p.nonneg_constraint = true;
      problems.emplace_back("conv ct kl", std::move(p));
    }
    std::uniform_real_distribution<double> cd(-2.0, 2.0);
    for (const auto& [name, p] : problems) {
      PdhgSolver solver(p);
      const auto norms = solver.estimate_norms({1e-10, 20000, seed, 1.01});
      const Tensor k = materialize(*solver.system().stacked_operator());
      const std::size_t rows = k.shape()[0], cols = k.shape()[1];
      for (int trial = 0; trial < 4; ++trial) {
        std::vector<double> c;
        for (std::size_t i = 0; i < solver.system().duals.size(); ++i) c.push_back(std::pow(10.0, cd(rng)));
        const StepSizes steps = solver.step_sizes(norms, c);
        for (std::size_t j = 0; j < steps.certificate.size(); ++j) {
          if (!(steps.certificate[j] <= 1.0 + 1e-12)) {
            r.fail(name + ": inequality " + steps.inequalities.at(j) + " = " + fmt("%.12g", steps.certificate[j]));
          }
        }
        std::vector<double> s, tc;
        for (std::size_t i = 0; i < solver.system().duals.size(); ++i)
          for (const auto& row : solver.system().duals[i].rows)
            s.insert(s.end(), shape_size(row.shape), steps.sigma[i]);
        for (std::size_t j = 0; j < solver.system().primal_count(); ++j)
          tc.insert(tc.end(), shape_size(solver.system().primal_shapes[j]), steps.tau[j]);
        Tensor scaled = k;
        for (std::size_t a = 0; a < rows; ++a)
          for (std::size_t b = 0; b < cols; ++b) scaled[a * cols + b] *= std::sqrt(s[a] * tc[b]);
        note(r, std::max(0.0, oracles::spectral_norm(scaled) - 1.0), name + " trial " + std::to_string(trial));
      }
    }
  });
}

SuiteResult verify_relaxation_fixture() {
  return timed("relaxation-fixture", 0, 0.0, [&](SuiteResult& r) {
    const auto fixed = [&](double p, double q, const std::string& what) {
      double pp = p, qq = q;
      kernels::project_leaky_epigraph(0.0, pp, qq);
      note(r, std::max(std::abs(pp - p), std::abs(qq - q)), what + " is not a fixed point");
    };
    fixed(-1.0, 0.0, "(-1, 0)");
    fixed(1.0, 1.0, "(1, 1)");
    fixed(0.0, 0.5, "midpoint (0, 0.5)");
    const double x = 0.0, z = 0.5;
    ++r.cases;
    if (z == std::max(x, 0.0)) r.fail("midpoint satisfies z = max(x, 0)");
  });
}

std::vector<SuiteResult> run_verify(const VerifyOptions& options) {
  const std::uint64_t s = options.seed;
  std::vector<SuiteResult> out;
  out.push_back(verify_prox(s));
  out.push_back(verify_adjoint(options.adjoint_operators.empty() ? standard_operators(s)
                                                                 : options.adjoint_operators,
                               s));
  out.push_back(verify_norms(s));
  out.push_back(verify_convexity(s));
  out.push_back(verify_equivalence(s));
  out.push_back(verify_step_sizes(s));
  out.push_back(verify_relaxation_fixture());
  return out;
}

void print_suite_table(const std::vector<SuiteResult>& results, std::ostream& os) {
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %-6s %7s %11s %9s %9s %6s\n", "suite", "status", "cases",
                "worst", "tol", "seconds", "seed");
  os << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-20s %-6s %7zu %11.3e %9.1e %9.2f %6llu\n", r.name.c_str(),
                  r.passed ? "PASS" : "FAIL", r.cases, r.worst, r.tolerance, r.seconds,
                  static_cast<unsigned long long>(r.seed));
    os << line;
  }
  for (const auto& r : results) {
    if (!r.detail.empty()) os << "  " << r.name << ": " << r.detail << "\n";
    for (const auto& f : r.failures) os << "  " << r.name << ": " << f << "\n";
  }
}

}  // namespace icnnpd::cli
