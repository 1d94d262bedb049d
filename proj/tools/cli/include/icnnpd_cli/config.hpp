#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icnnpd/icnn.hpp"
#include "icnnpd/power_iteration.hpp"
#include "icnnpd/solver.hpp"
#include "icnnpd/tasks.hpp"

namespace icnnpd::cli {

/// Config problem with the offending JSON field (e.g. "solvers[1].c") or,
/// for syntax errors, the line and column.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct WeightsConfig {
  std::optional<std::filesystem::path> path;  // weights directory; otherwise a template
  std::string template_kind = "conv";         // "conv" or "mlp"
  ConvTemplate conv;
  MlpTemplate mlp;
  std::optional<std::uint64_t> seed;          // defaults to the global seed + 3
  bool allow_inadmissible = false;
};

struct ProblemConfig {
  FidelityKind fidelity = FidelityKind::L2;
  double lambda = 1.0;
  double gamma = 1.0;
  bool nonneg = false;
  bool dualize_fidelity = false;
  bool fbp_init = false;  // CT only: start from FBP instead of the scaled backprojection
};

struct SolverEntry {
  enum class Kind { PDHG, SMC, SMD };
  Kind kind = Kind::PDHG;
  std::vector<double> c;  // PDHG: one value per dual block
  double step = 1.0;      // SM-C step or SM-D initial step
  std::string name;       // output subdirectory; derived when absent
};

const char* to_string(SolverEntry::Kind kind);

struct SweepConfig {
  std::vector<std::vector<double>> c_grid;  // one list per dual block
};

struct RunConfig {
  TaskConfig task;
  PhantomKind phantom = PhantomKind::SmoothBlobs;
  std::optional<std::filesystem::path> image;  // PGM ground truth instead of a phantom
  ProblemConfig problem;
  WeightsConfig weights;
  std::vector<SolverEntry> solvers;
  std::size_t budget = 200;
  std::size_t reference_multiplier = 10;
  double target_rel_error = 1e-3;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  bool record_wall_clock = false;
  NormEstimateOptions norms;
  std::optional<SweepConfig> sweep;

  void validate() const;
};

// Per-component seeds derived from the global seed.
struct Seeds {
  std::uint64_t phantom, noise, weights, power;
};
inline constexpr std::uint64_t kPhantomSeedOffset = 1;
inline constexpr std::uint64_t kNoiseSeedOffset = 2;
inline constexpr std::uint64_t kWeightsSeedOffset = 3;
inline constexpr std::uint64_t kPowerSeedOffset = 4;
Seeds split_seed(std::uint64_t global, const RunConfig& cfg);

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace icnnpd::cli
