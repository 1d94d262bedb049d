#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "icnnpd/linops.hpp"
#include "icnnpd/radon.hpp"

namespace icnnpd {

enum class TaskKind { DenoiseSaltPepper, Inpaint, CT };
enum class PhantomKind { ShepLoganLike, SmoothBlobs, Checker };

const char* to_string(TaskKind kind);
const char* to_string(PhantomKind kind);

struct TaskConfig {
  TaskKind task = TaskKind::DenoiseSaltPepper;
  std::size_t image_side = 64;
  double sp_density = 0.1;       // fraction of pixels hit by salt-and-pepper noise
  double gaussian_sigma = 0.03;  // fraction of the [0, 1] dynamic range
  double mask_fraction = 0.3;    // fraction of pixels removed
  double peak_counts = 1e4;      // expected counts at the brightest CT bin
  double count_scale = 0.0;      // photons per unit projection; 0 derives it from peak_counts
  double background = 50.0;      // CT background counts r
  RadonGeometry geometry;        // CT only; image_side 0 selects default_geometry(side, 60)
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic test image with values in [0, 1] and shape [1, side, side].
Tensor make_phantom(PhantomKind kind, std::size_t side, std::uint64_t seed);

struct Measurement {
  Tensor y;
  OperatorPtr forward;  // Identity, DiagonalMask or Radon
  Tensor background;    // CT: r per bin; empty otherwise
  RadonGeometry geometry;  // CT: geometry without the count scale
  double count_scale = 1.0;  // CT: photons per unit of the geometric projection
};

/// Simulates the measurement of x (shape [1, side, side], values in [0, 1]).
/// For CT the returned forward operator already includes the count scale,
/// so y ~ Poisson(forward(x) + r).
Measurement corrupt(const TaskConfig& task, const Tensor& x);

/// 10 log10(peak^2 / MSE); +inf when the images agree exactly.
double psnr(const Tensor& x, const Tensor& ref, double peak = 1.0);

/// Ram-Lak filtered back-projection of a [n_angles, n_bins] sinogram taken
/// with `geometry` (including its scale), clamped at zero. Returns
/// [1, side, side].
Tensor fbp(const RadonGeometry& geometry, const Tensor& sinogram);

// Image files: 8-bit binary PGM for viewing, with the linear rescale kept in
// a JSON sidecar (<file>.json), and TNSB blobs for exact round trips.
struct PgmScaling {
  double lo = 0.0;
  double hi = 1.0;
};

PgmScaling write_pgm(const Tensor& image, const std::filesystem::path& path,
                     std::optional<PgmScaling> scaling = std::nullopt);
/// Pixel values divided by maxval, shape [1, height, width].
Tensor read_pgm(const std::filesystem::path& path);

}  // namespace icnnpd
