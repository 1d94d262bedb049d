#pragma once

#include <vector>

#include "icnnpd/linops.hpp"

namespace icnnpd {

/// Parallel-beam acquisition geometry. Angles are uniformly spaced in [0, pi).
struct RadonGeometry {
  std::size_t image_side = 0;
  std::size_t n_angles = 0;
  std::size_t n_bins = 0;
  double detector_spacing = 1.0;  // in pixel widths
  double scale = 0.0;             // 0 selects 1 / image_side

  std::vector<double> angles() const;
  double effective_scale() const;
  /// Throws DegenerateGeometry when the geometry cannot be discretized.
  void validate() const;
};

/// Geometry with enough bins at unit spacing to cover the image diagonal.
RadonGeometry default_geometry(std::size_t image_side, std::size_t n_angles);

/// Pixel-driven parallel-beam projector: each pixel's mass is split
/// bilinearly between the two detector bins nearest to its projected centre.
/// The adjoint is the exact transpose of that splatting.
class RadonOperator final : public LinearOperator {
 public:
  /// `image_shape` may add singleton axes to [side, side], e.g. [1, side, side].
  explicit RadonOperator(RadonGeometry geometry, Shape image_shape = {});

  OperatorKind kind() const noexcept override { return OperatorKind::Radon; }
  std::string describe() const override;
  const RadonGeometry& geometry() const noexcept { return geom_; }

  void apply_add(std::span<const double> x, double alpha,
                 std::span<double> y) const override;
  void adjoint_add(std::span<const double> w, double alpha,
                   std::span<double> x) const override;

 private:
  struct Splat {
    int bin;       // first bin, may be -1 or n_bins - 1 at the edges
    double frac;   // weight of bin + 1; bin gets 1 - frac
  };

  RadonGeometry geom_;
  double scale_;
  std::vector<Splat> splats_;  // [angle][pixel]
};

OperatorPtr make_radon(RadonGeometry geometry, Shape image_shape = {});

Tensor radon_apply(const RadonGeometry& geometry, const Tensor& image);
Tensor radon_adjoint(const RadonGeometry& geometry, const Tensor& sinogram);

}  // namespace icnnpd
