#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "icnnpd_cli/config.hpp"
#include "icnnpd_cli/verify.hpp"

namespace icnnpd::cli {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verification failed
inline constexpr int kExitConfig = 2;   // unreadable or invalid config
inline constexpr int kExitSolver = 3;   // a solver aborted

/// Command-line flags that override the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget;
  std::optional<std::filesystem::path> output_dir;
  std::size_t jobs = 1;
};

RunConfig apply_overrides(RunConfig config, const Overrides& overrides);

/// Runs every solver entry on one instance. Writes <output_dir>/<solver>/
/// {metrics.csv, x.pgm, x.tnsb} and <output_dir>/summary.json.
int cmd_solve(const std::filesystem::path& config_path, const Overrides& overrides,
              std::ostream& out, std::ostream& err);

/// PDHG over the Cartesian product of sweep.c_grid, --jobs at a time.
/// Writes <output_dir>/sweep.csv, <output_dir>/summary.json and one
/// <output_dir>/jobs/job_<i>/metrics.csv per combination.
int cmd_sweep(const std::filesystem::path& config_path, const Overrides& overrides,
              std::ostream& out, std::ostream& err);

int cmd_verify(const VerifyOptions& options, std::ostream& out);

/// Operator norm estimates of the block system of a weights directory.
int cmd_norm(const std::filesystem::path& weights_dir, const Overrides& overrides,
             std::ostream& out, std::ostream& err);

/// Adjoint identity for every layer operator and block of a weights
/// directory.
int cmd_adjoint_test(const std::filesystem::path& weights_dir, const Overrides& overrides,
                     std::ostream& out, std::ostream& err);

}  // namespace icnnpd::cli
