#include "icnnpd_cli/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace icnnpd::cli {

using nlohmann::json;

ConfigError::ConfigError(std::string field, const std::string& message)
    : Error(ErrorKind::Config, field.empty() ? message : field + ": " + message),
      field_(std::move(field)) {}

const char* to_string(SolverEntry::Kind kind) {
  switch (kind) {
    case SolverEntry::Kind::PDHG: return "pdhg";
    case SolverEntry::Kind::SMC: return "smc";
    case SolverEntry::Kind::SMD: return "smd";
  }
  return "?";
}

namespace {

// Typed access to one JSON object with field paths in every error.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& at(const char* key) const {
    if (!has(key)) throw ConfigError(field(key), "required field is missing");
    return j_.at(key);
  }

  double number(const char* key) const {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }
  double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::uint64_t count(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_unsigned()) throw ConfigError(field(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t count(const char* key, std::uint64_t fallback) const {
    return has(key) ? count(key) : fallback;
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const char* key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  std::vector<double> numbers(const char* key) const {
    const json& v = at(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a number");
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  void only(std::initializer_list<const char*> allowed) const {
    for (const auto& [k, _] : j_.items()) {
      bool ok = false;
      for (const char* a : allowed) ok |= k == a;
      if (!ok) throw ConfigError(field(k.c_str()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
};

template <typename E, std::size_t N>
E pick(const Reader& r, const char* key, const std::pair<const char*, E> (&options)[N]) {
  const std::string s = r.string(key);
  std::string names;
  for (const auto& [name, value] : options) {
    if (s == name) return value;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ConfigError(r.field(key), "unknown value \"" + s + "\" (expected one of " + names + ")");
}

Activation parse_activation(const Reader& r, const char* key, Activation fallback) {
  if (!r.has(key)) return fallback;
  const std::string s = r.string(key);
  if (s == "relu") return Activation::relu();
  if (s == "identity") return Activation::identity();
  if (s.rfind("leaky_relu", 0) == 0) {
    const std::string rest = s.substr(10);
    double a = 0.2;
    if (!rest.empty()) {
      if (rest.front() != ':') throw ConfigError(r.field(key), "expected leaky_relu or leaky_relu:<alpha>");
      try {
        a = std::stod(rest.substr(1));
      } catch (const std::exception&) {
        throw ConfigError(r.field(key), "bad leaky slope \"" + rest.substr(1) + "\"");
      }
    }
    return Activation::leaky_relu(a);
  }
  throw ConfigError(r.field(key), "unknown activation \"" + s + "\"");
}

void parse_task(const Reader& t, RunConfig& cfg) {
  t.only({"kind", "image_side", "phantom", "image", "sp_density", "gaussian_sigma", "mask_fraction",
          "peak_counts", "count_scale", "background", "n_angles", "detector_spacing"});
  static constexpr std::pair<const char*, TaskKind> kinds[] = {
      {"denoise_salt_pepper", TaskKind::DenoiseSaltPepper},
      {"inpaint", TaskKind::Inpaint},
      {"ct", TaskKind::CT}};
  static constexpr std::pair<const char*, PhantomKind> phantoms[] = {
      {"shepp_logan", PhantomKind::ShepLoganLike},
      {"smooth_blobs", PhantomKind::SmoothBlobs},
      {"checker", PhantomKind::Checker}};

  TaskConfig& task = cfg.task;
  task.task = pick(t, "kind", kinds);
  if (t.has("image")) {
    cfg.image = t.string("image");
  } else {
    task.image_side = t.count("image_side");
    cfg.phantom = pick(t, "phantom", phantoms);
  }
  switch (task.task) {
    case TaskKind::DenoiseSaltPepper:
      task.sp_density = t.number("sp_density");
      break;
    case TaskKind::Inpaint:
      task.mask_fraction = t.number("mask_fraction");
      task.gaussian_sigma = t.number("gaussian_sigma");
      break;
    case TaskKind::CT: {
      if (!t.has("peak_counts") && !t.has("count_scale")) {
        throw ConfigError(t.field("peak_counts"), "CT needs peak_counts or count_scale");
      }
      task.peak_counts = t.number("peak_counts", task.peak_counts);
      task.count_scale = t.number("count_scale", 0.0);
      task.background = t.number("background");
      const std::uint64_t angles = t.count("n_angles");
      task.geometry.n_angles = angles;  // completed once the image side is known
      task.geometry.detector_spacing = t.number("detector_spacing", 1.0);
      break;
    }
  }
}

void parse_problem(const Reader& p, ProblemConfig& pc) {
  p.only({"fidelity", "lambda", "gamma", "nonneg", "dualize_fidelity", "init"});
  static constexpr std::pair<const char*, FidelityKind> kinds[] = {
      {"l1", FidelityKind::L1}, {"l2", FidelityKind::L2}, {"kl", FidelityKind::KL}};
  pc.fidelity = pick(p, "fidelity", kinds);
  pc.lambda = p.number("lambda");
  pc.gamma = p.number("gamma");
  pc.nonneg = p.boolean("nonneg", false);
  pc.dualize_fidelity = p.boolean("dualize_fidelity", pc.fidelity == FidelityKind::KL);
  const std::string init = p.string("init", "default");
  if (init != "default" && init != "fbp") {
    throw ConfigError(p.field("init"), "expected \"default\" or \"fbp\"");
  }
  pc.fbp_init = init == "fbp";
}

void parse_weights(const Reader& w, WeightsConfig& wc) {
  wc.allow_inadmissible = w.boolean("allow_inadmissible", false);
  if (w.has("seed")) wc.seed = w.count("seed");
  if (w.has("path")) {
    w.only({"path", "allow_inadmissible"});
    wc.path = w.string("path");
    return;
  }
  wc.template_kind = w.string("template");
  if (wc.template_kind == "conv") {
    w.only({"template", "seed", "allow_inadmissible", "filters", "kernel", "pool", "hidden",
            "leaky_slope", "bias_scale"});
    auto& c = wc.conv;
    c.filters = w.count("filters", c.filters);
    c.kernel = w.count("kernel", c.kernel);
    c.pool = w.count("pool", c.pool);
    c.hidden = w.count("hidden", c.hidden);
    c.leaky_slope = w.number("leaky_slope", c.leaky_slope);
    c.bias_scale = w.number("bias_scale", c.bias_scale);
  } else if (wc.template_kind == "mlp") {
    w.only({"template", "seed", "allow_inadmissible", "hidden", "first_activation",
            "hidden_activation", "final_activation", "v_scale", "w_scale", "bias_scale"});
    auto& m = wc.mlp;
    if (w.has("hidden")) {
      m.hidden.clear();
      std::size_t i = 0;
      for (double h : w.numbers("hidden")) {
        if (h < 1 || h != static_cast<std::size_t>(h)) {
          throw ConfigError(w.field("hidden") + "[" + std::to_string(i) + "]", "expected a positive integer");
        }
        m.hidden.push_back(static_cast<std::size_t>(h));
        ++i;
      }
    }
    m.first_activation = parse_activation(w, "first_activation", m.first_activation);
    m.hidden_activation = parse_activation(w, "hidden_activation", m.hidden_activation);
    m.final_activation = parse_activation(w, "final_activation", m.final_activation);
    m.v_scale = w.number("v_scale", m.v_scale);
    m.w_scale = w.number("w_scale", m.w_scale);
    m.bias_scale = w.number("bias_scale", m.bias_scale);
  } else {
    throw ConfigError(w.field("template"), "expected \"conv\" or \"mlp\"");
  }
}

SolverEntry parse_solver(const Reader& s) {
  static constexpr std::pair<const char*, SolverEntry::Kind> kinds[] = {
      {"pdhg", SolverEntry::Kind::PDHG}, {"smc", SolverEntry::Kind::SMC}, {"smd", SolverEntry::Kind::SMD}};
  SolverEntry e;
  e.kind = pick(s, "kind", kinds);
  if (e.kind == SolverEntry::Kind::PDHG) {
    s.only({"kind", "c", "name"});
    e.c = s.numbers("c");
  } else {
    s.only({"kind", "step", "name"});
    e.step = s.number("step");
  }
  e.name = s.string("name", "");
  return e;
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

void RunConfig::validate() const {
  if (solvers.empty()) throw ConfigError("solvers", "at least one solver entry is required");
  if (budget < 1) throw ConfigError("budget", "must be >= 1");
  if (reference_multiplier < 1) throw ConfigError("reference_budget_multiplier", "must be >= 1");
  if (!(target_rel_error > 0.0)) throw ConfigError("target_rel_error", "must be > 0");
  if (!(problem.lambda > 0.0)) throw ConfigError("problem.lambda", "must be > 0");
  if (!(problem.gamma >= 0.0)) throw ConfigError("problem.gamma", "must be >= 0");
  if (problem.fbp_init && task.task != TaskKind::CT) {
    throw ConfigError("problem.init", "fbp is only available for CT");
  }
  for (std::size_t i = 0; i < solvers.size(); ++i) {
    const auto& s = solvers[i];
    const std::string f = "solvers[" + std::to_string(i) + "]";
    if (s.kind == SolverEntry::Kind::PDHG) {
      if (s.c.empty()) throw ConfigError(f + ".c", "needs one value per dual block");
      for (double c : s.c) {
        if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError(f + ".c", "values must be > 0");
      }
    } else if (!(s.step > 0.0)) {
      throw ConfigError(f + ".step", "must be > 0");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (!s.name.empty() && s.name == solvers[j].name) {
        throw ConfigError(f + ".name", "duplicate solver name \"" + s.name + "\"");
      }
    }
  }
  if (sweep) {
    if (sweep->c_grid.empty()) throw ConfigError("sweep.c_grid", "needs one list per dual block");
    for (std::size_t i = 0; i < sweep->c_grid.size(); ++i) {
      if (sweep->c_grid[i].empty()) {
        throw ConfigError("sweep.c_grid[" + std::to_string(i) + "]", "empty grid");
      }
      for (double c : sweep->c_grid[i]) {
        if (!(c > 0.0) || !std::isfinite(c)) {
          throw ConfigError("sweep.c_grid[" + std::to_string(i) + "]", "values must be > 0");
        }
      }
    }
  }
  try {
    if (!image) task.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("task", e.what());
  }
}

Seeds split_seed(std::uint64_t global, const RunConfig& cfg) {
  Seeds s{global + kPhantomSeedOffset, global + kNoiseSeedOffset, global + kWeightsSeedOffset,
          global + kPowerSeedOffset};
  if (cfg.weights.seed) s.weights = *cfg.weights.seed;
  return s;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError("", "JSON syntax error at line " + std::to_string(line) + ", column " +
                              std::to_string(col) + ": " + e.what());
  }
  const Reader r(j, "");
  r.only({"seed", "budget", "reference_budget_multiplier", "target_rel_error", "output_dir",
          "record_wall_clock", "task", "problem", "weights", "solvers", "sweep", "norms"});

  RunConfig cfg;
  cfg.seed = r.count("seed", 0);
  cfg.budget = r.count("budget");
  cfg.reference_multiplier = r.count("reference_budget_multiplier", cfg.reference_multiplier);
  cfg.target_rel_error = r.number("target_rel_error", cfg.target_rel_error);
  cfg.output_dir = r.string("output_dir", cfg.output_dir.string());
  cfg.record_wall_clock = r.boolean("record_wall_clock", false);

  parse_task(Reader(r.at("task"), "task"), cfg);
  parse_problem(Reader(r.at("problem"), "problem"), cfg.problem);
  parse_weights(Reader(r.at("weights"), "weights"), cfg.weights);

  const json& solvers = r.at("solvers");
  if (!solvers.is_array()) throw ConfigError("solvers", "expected an array");
  for (std::size_t i = 0; i < solvers.size(); ++i) {
    cfg.solvers.push_back(parse_solver(Reader(solvers[i], "solvers[" + std::to_string(i) + "]")));
  }

  if (r.has("sweep")) {
    const Reader s(r.at("sweep"), "sweep");
    s.only({"c_grid"});
    const json& grid = s.at("c_grid");
    if (!grid.is_array()) throw ConfigError("sweep.c_grid", "expected an array of arrays");
    SweepConfig sc;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const std::string f = "sweep.c_grid[" + std::to_string(i) + "]";
      if (!grid[i].is_array()) throw ConfigError(f, "expected an array of numbers");
      std::vector<double> axis;
      for (const auto& v : grid[i]) {
        if (!v.is_number()) throw ConfigError(f, "expected an array of numbers");
        axis.push_back(v.get<double>());
      }
      sc.c_grid.push_back(std::move(axis));
    }
    cfg.sweep = std::move(sc);
  }

  if (r.has("norms")) {
    const Reader n(r.at("norms"), "norms");
    n.only({"tol", "max_iters", "safety_factor"});
    cfg.norms.tol = n.number("tol", cfg.norms.tol);
    cfg.norms.max_iters = n.count("max_iters", cfg.norms.max_iters);
    cfg.norms.safety_factor = n.number("safety_factor", cfg.norms.safety_factor);
  }

  if (cfg.task.task == TaskKind::CT && !cfg.image) {
    const std::size_t angles = cfg.task.geometry.n_angles;
    const double spacing = cfg.task.geometry.detector_spacing;
    cfg.task.geometry = default_geometry(cfg.task.image_side, angles);
    cfg.task.geometry.detector_spacing = spacing;
    cfg.task.geometry.n_bins = static_cast<std::size_t>(
        std::ceil(std::sqrt(2.0) * static_cast<double>(cfg.task.image_side) / spacing)) + 2;
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace icnnpd::cli
