#include "icnnpd/radon.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace icnnpd {

std::vector<double> RadonGeometry::angles() const {
  std::vector<double> a(n_angles);
  for (std::size_t i = 0; i < n_angles; ++i) {
    a[i] = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_angles);
  }
  return a;
}

double RadonGeometry::effective_scale() const {
  return scale > 0.0 ? scale : 1.0 / static_cast<double>(image_side);
}

void RadonGeometry::validate() const {
  if (image_side == 0 || n_angles == 0 || n_bins == 0) {
    throw Error(ErrorKind::DegenerateGeometry,
                "Radon geometry needs image_side, n_angles and n_bins >= 1");
  }
  if (!(detector_spacing > 0.0) || !std::isfinite(detector_spacing)) {
    throw Error(ErrorKind::DegenerateGeometry, "Radon detector spacing must be positive");
  }
  if (scale < 0.0 || !std::isfinite(scale)) {
    throw Error(ErrorKind::DegenerateGeometry, "Radon scale must be positive");
  }
}

RadonGeometry default_geometry(std::size_t image_side, std::size_t n_angles) {
  RadonGeometry g;
  g.image_side = image_side;
  g.n_angles = n_angles;
  g.n_bins = static_cast<std::size_t>(
                 std::ceil(std::sqrt(2.0) * static_cast<double>(image_side))) + 2;
  return g;
}

namespace {

Shape image_shape_for(const RadonGeometry& g, Shape requested) {
  g.validate();
  const Shape plain{g.image_side, g.image_side};
  if (requested.empty()) return plain;
  if (shape_size(requested) != g.image_side * g.image_side || requested.size() < 2 ||
      requested[requested.size() - 1] != g.image_side ||
      requested[requested.size() - 2] != g.image_side) {
    throw ShapeError("Radon image shape", plain, requested);
  }
  return requested;
}

}  // namespace

RadonOperator::RadonOperator(RadonGeometry geometry, Shape image_shape)
    : LinearOperator(image_shape_for(geometry, std::move(image_shape)),
                     Shape{geometry.n_angles, geometry.n_bins}, std::nullopt),
      geom_(geometry),
      scale_(geometry.effective_scale()) {
  const std::size_t n = geom_.image_side;
  const double centre = (static_cast<double>(n) - 1.0) / 2.0;
  const double bin_centre = (static_cast<double>(geom_.n_bins) - 1.0) / 2.0;
  const auto thetas = geom_.angles();
  splats_.resize(geom_.n_angles * n * n);
  for (std::size_t a = 0; a < geom_.n_angles; ++a) {
    const double c = std::cos(thetas[a]), s = std::sin(thetas[a]);
    for (std::size_t i = 0; i < n; ++i) {
      const double py = centre - static_cast<double>(i);
      for (std::size_t j = 0; j < n; ++j) {
        const double px = static_cast<double>(j) - centre;
        const double t = (px * c + py * s) / geom_.detector_spacing + bin_centre;
        const double fl = std::floor(t);
        splats_[(a * n + i) * n + j] = Splat{static_cast<int>(fl), t - fl};
      }
    }
  }
}

std::string RadonOperator::describe() const {
  std::ostringstream os;
  os << "Radon[" << geom_.image_side << "px, " << geom_.n_angles << " angles, "
     << geom_.n_bins << " bins]";
  return os.str();
}

void RadonOperator::apply_add(std::span<const double> x, double alpha,
                              std::span<double> y) const {
  const std::size_t npix = geom_.image_side * geom_.image_side;
  const int nb = static_cast<int>(geom_.n_bins);
  const double s = alpha * scale_;
  for (std::size_t a = 0; a < geom_.n_angles; ++a) {
    double* row = y.data() + a * geom_.n_bins;
    const Splat* sp = splats_.data() + a * npix;
    for (std::size_t p = 0; p < npix; ++p) {
      const double v = s * x[p];
      const int b = sp[p].bin;
      const double f = sp[p].frac;
      if (b >= 0 && b < nb) row[b] += (1.0 - f) * v;
      if (b + 1 >= 0 && b + 1 < nb) row[b + 1] += f * v;
    }
  }
}

void RadonOperator::adjoint_add(std::span<const double> w, double alpha,
                                std::span<double> x) const {
  const std::size_t npix = geom_.image_side * geom_.image_side;
  const int nb = static_cast<int>(geom_.n_bins);
  const double s = alpha * scale_;
  for (std::size_t a = 0; a < geom_.n_angles; ++a) {
    const double* row = w.data() + a * geom_.n_bins;
    const Splat* sp = splats_.data() + a * npix;
    for (std::size_t p = 0; p < npix; ++p) {
      const int b = sp[p].bin;
      const double f = sp[p].frac;
      double acc = 0.0;
      if (b >= 0 && b < nb) acc += (1.0 - f) * row[b];
      if (b + 1 >= 0 && b + 1 < nb) acc += f * row[b + 1];
      x[p] += s * acc;
    }
  }
}

OperatorPtr make_radon(RadonGeometry geometry, Shape image_shape) {
  return std::make_shared<RadonOperator>(geometry, std::move(image_shape));
}

Tensor radon_apply(const RadonGeometry& geometry, const Tensor& image) {
  return RadonOperator(geometry, image.shape()).apply(image);
}

Tensor radon_adjoint(const RadonGeometry& geometry, const Tensor& sinogram) {
  return RadonOperator(geometry).adjoint(sinogram);
}

}  // namespace icnnpd
