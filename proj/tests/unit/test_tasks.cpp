#include <gtest/gtest.h>

#include <filesystem>

#include "common.hpp"
#include "icnnpd/tasks.hpp"

using namespace icnnpd;
using namespace testing_support;

TEST(Phantom, CheckerAndDeterminism) {
  const Tensor c = make_phantom(PhantomKind::Checker, 8, 0);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(c[i * 8 + j], (i + j) % 2 == 0 ? 0.0 : 1.0);
  for (auto k : {PhantomKind::ShepLoganLike, PhantomKind::SmoothBlobs, PhantomKind::Checker}) {
    EXPECT_EQ(make_phantom(k, 32, 5), make_phantom(k, 32, 5));
    const Tensor p = make_phantom(k, 32, 5);
    EXPECT_GE(min_value(p), 0.0);
    EXPECT_LE(max_value(p), 1.0);
  }
  EXPECT_NE(make_phantom(PhantomKind::SmoothBlobs, 32, 1), make_phantom(PhantomKind::SmoothBlobs, 32, 2));
  EXPECT_THROW(make_phantom(PhantomKind::Checker, 4, 0), Error);
}

TEST(Corrupt, SaltPepper) {
  const Tensor x = make_phantom(PhantomKind::SmoothBlobs, 32, 0);
  TaskConfig t;
  t.image_side = 32;
  t.sp_density = 0.0;
  EXPECT_EQ(corrupt(t, x).y, x);
  t.sp_density = 0.2;
  t.seed = 4;
  const auto m = corrupt(t, x);
  std::size_t hit = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (m.y[k] != x[k]) {
      ++hit;
      EXPECT_TRUE(m.y[k] == 0.0 || m.y[k] == 1.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(hit) / x.size(), 0.2, 0.05);
  EXPECT_EQ(m.forward->kind(), OperatorKind::Identity);
  t.seed = 5;
  EXPECT_NE(corrupt(t, x).y, m.y);
  EXPECT_EQ(corrupt(t, x).y.shape(), m.y.shape());
}

TEST(Corrupt, InpaintMaskIsProjection) {
  const Tensor x = make_phantom(PhantomKind::ShepLoganLike, 16, 0);
  TaskConfig t;
  t.task = TaskKind::Inpaint;
  t.image_side = 16;
  t.seed = 3;
  const auto m = corrupt(t, x);
  std::mt19937_64 rng(1);
  const Tensor v = random_tensor(x.shape(), rng);
  const Tensor av = m.forward->apply(v);
  EXPECT_LE(norm2(av - m.forward->adjoint(v)), 1e-12);
  EXPECT_LE(norm2(av - m.forward->apply(av)), 1e-12);
  const auto& mask = static_cast<const DiagonalMaskOperator&>(*m.forward).mask();
  double removed = 0;
  for (double d : mask.data()) removed += d == 0.0;
  EXPECT_EQ(removed, std::round(0.3 * 256));

  t.mask_fraction = 1.0;
  const auto all = corrupt(t, x);
  EXPECT_EQ(norm_inf(all.y), 0.0);
  EXPECT_EQ(norm_inf(static_cast<const DiagonalMaskOperator&>(*all.forward).mask()), 0.0);
}

TEST(Corrupt, CtPoissonLawOfLargeNumbers) {
  const Tensor x = make_phantom(PhantomKind::SmoothBlobs, 16, 1);
  TaskConfig t;
  t.task = TaskKind::CT;
  t.image_side = 16;
  t.geometry = default_geometry(16, 20);
  t.count_scale = 1e6;
  const Tensor ax = radon_apply(t.geometry, x.reshaped({16, 16}));
  const double peak = max_value(ax);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    t.seed = seed;
    const auto m = corrupt(t, x);
    for (double v : m.y.data()) EXPECT_GE(v, 0.0);
    for (std::size_t k = 0; k < ax.size(); ++k) {
      if (ax[k] < 0.5 * peak) continue;
      const double expect = ax[k] + t.background / 1e6;
      EXPECT_NEAR(m.y[k] / 1e6, expect, 0.01 * expect);
    }
  }
  const auto m = corrupt(t, x);
  EXPECT_LE(norm2(m.forward->apply(x) - 1e6 * ax.reshaped(m.y.shape())), 1e-9 * 1e6 * norm2(ax));
}

TEST(Psnr, Examples) {
  const Tensor x = make_phantom(PhantomKind::SmoothBlobs, 16, 0);
  EXPECT_TRUE(std::isinf(psnr(x, x)));
  Tensor off = x;
  for (auto& v : off.data()) v += 0.1;
  EXPECT_NEAR(psnr(off, x), 20.0, 1e-9);
  EXPECT_NEAR(psnr(off, x, 255.0) - psnr(off, x), 20.0 * std::log10(255.0), 1e-9);
  EXPECT_THROW(psnr(x, Tensor({2})), ShapeError);
}

TEST(Fbp, ZeroLinearAndBetterThanBackprojection) {
  const auto g = default_geometry(64, 60);
  EXPECT_EQ(norm_inf(fbp(g, Tensor({60, g.n_bins}))), 0.0);

  const Tensor x = make_phantom(PhantomKind::SmoothBlobs, 64, 0);
  const Tensor s = RadonOperator(g, x.shape()).apply(x);
  const Tensor f = fbp(g, s);
  const Tensor f3 = fbp(g, 3.0 * s);
  EXPECT_LE(norm2(f3 - 3.0 * f), 1e-12 * norm2(f3));

  Tensor bp = RadonOperator(g, x.shape()).adjoint(s);
  bp *= dot(bp, x) / dot(bp, bp);  // best possible scaling of the plain backprojection
  EXPECT_GT(psnr(f, x), psnr(bp, x));
}

TEST(Pgm, RoundTripWithSidecar) {
  const auto dir = std::filesystem::temp_directory_path() / "icnnpd_pgm";
  std::filesystem::create_directories(dir);
  const Tensor x = make_phantom(PhantomKind::Checker, 16, 0);
  const auto sc = write_pgm(x, dir / "a.pgm");
  EXPECT_EQ(sc.lo, 0.0);
  EXPECT_EQ(sc.hi, 1.0);
  EXPECT_TRUE(std::filesystem::exists(dir / "a.pgm.json"));
  EXPECT_EQ(read_pgm(dir / "a.pgm"), x);
  EXPECT_THROW(read_pgm(dir / "none.pgm"), Error);
  std::filesystem::remove_all(dir);
}
