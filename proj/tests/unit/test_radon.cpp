#include <gtest/gtest.h>

#include "common.hpp"
#include "icnnpd/radon.hpp"

using namespace icnnpd;
using namespace testing_support;

TEST(Radon, ZeroImage) {
  const auto g = default_geometry(8, 5);
  EXPECT_EQ(norm2(radon_apply(g, Tensor({8, 8}))), 0.0);
}

TEST(Radon, CentredPixelMassPerAngle) {
  for (std::size_t side : {7u, 9u}) {
    auto g = default_geometry(side, 13);
    Tensor img({side, side});
    img[(side / 2) * side + side / 2] = 1.0;
    const Tensor s = radon_apply(g, img);
    for (std::size_t a = 0; a < g.n_angles; ++a) {
      double mass = 0.0;
      for (std::size_t b = 0; b < g.n_bins; ++b) mass += s[a * g.n_bins + b];
      EXPECT_NEAR(mass, g.effective_scale(), 1e-12);
    }
  }
}

TEST(Radon, AdjointIdentity) {
  RadonGeometry g;
  g.image_side = 16;
  g.n_angles = 12;
  g.n_bins = 24;
  EXPECT_LE(adjoint_defect(RadonOperator(g), 100, 2), 1e-8);
  EXPECT_LE(adjoint_defect(RadonOperator(g, {1, 16, 16}), 20, 3), 1e-8);
}

TEST(Radon, GeometryValidation) {
  RadonGeometry g;
  EXPECT_THROW(g.validate(), Error);
  g = default_geometry(8, 4);
  g.detector_spacing = 0.0;
  EXPECT_THROW(RadonOperator{g}, Error);
  const auto a = default_geometry(8, 4).angles();
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_GT(a[i], a[i - 1]);
  EXPECT_THROW(RadonOperator(default_geometry(8, 4), {2, 8, 8}), ShapeError);
}

TEST(Radon, ScaleIsLinear) {
  auto g = default_geometry(8, 6);
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({8, 8}, rng);
  const Tensor s1 = radon_apply(g, x);
  g.scale = 3.0 * g.effective_scale();
  const Tensor s3 = radon_apply(g, x);
  EXPECT_LE(norm2(s3 - 3.0 * s1), 1e-12 * norm2(s3));
}
