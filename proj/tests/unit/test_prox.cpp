#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"
#include "icnnpd/oracles.hpp"
#include "icnnpd/prox.hpp"

using namespace icnnpd;
using namespace testing_support;

namespace {

double leaky(double a, double p) { return p >= 0 ? p : a * p; }

}  // namespace

TEST(Prox, L1ShiftExamples) {
  const L1Shift d{1.0, Tensor({2}), {}};
  const Tensor out = prox(d, 0.5, Tensor({2}, {2.0, 0.3}));
  EXPECT_DOUBLE_EQ(out[0], 1.5);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
}

TEST(Prox, NonNegAndZero) {
  EXPECT_EQ(prox(NonNegProject{}, 1.0, Tensor({2}, {-1, 2})).values(), (std::vector<double>{0, 2}));
  EXPECT_EQ(prox(Zero{}, 3.0, Tensor({2}, {-1, 2})).values(), (std::vector<double>{-1, 2}));
}

TEST(Prox, L2ShiftMatchesOracle) {
  const L2Shift d{1.0, Tensor({1}, {1.0}), {}};
  const double got = prox(d, 0.7, Tensor({1}, {3.0}))[0];
  EXPECT_NEAR(got, 3.7 / 1.7, 1e-14);
  const double oracle = numeric_prox_oracle([](double v) { return 0.5 * (v - 1) * (v - 1); }, 0.7, 3.0, {-10, 10});
  EXPECT_NEAR(got, oracle, 1e-7);
}

TEST(Prox, DiagonalStep) {
  const L1Shift d{1.0, Tensor({2}), {}};
  const Tensor out = prox(d, Tensor({2}, {0.5, 2.0}), Tensor({2}, {1.0, 1.0}));
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
  EXPECT_THROW(prox(d, -1.0, Tensor({2})), Error);
}

TEST(Prox, EpigraphExamples) {
  for (double a : {0.0, 0.2}) {
    auto [p, q] = project_epigraph_leaky_relu(a, Tensor({2}, {-1, 1}), Tensor({2}, {0, 1}));
    EXPECT_EQ(p.values(), (std::vector<double>{-1, 1}));
    EXPECT_EQ(q.values(), (std::vector<double>{0, 1}));
  }
  auto [p0, q0] = project_epigraph_leaky_relu(0.0, Tensor({1}, {1}), Tensor({1}, {-1}));
  EXPECT_DOUBLE_EQ(p0[0], 0.0);
  EXPECT_DOUBLE_EQ(q0[0], 0.0);
  auto [p1, q1] = project_epigraph_leaky_relu(0.2, Tensor({1}, {-1}), Tensor({1}, {-1}));
  EXPECT_NEAR(p1[0], -1.2 / 1.04, 1e-12);
  EXPECT_NEAR(q1[0], -0.24 / 1.04, 1e-12);
  const auto [po, qo] = oracles::project_epigraph(Activation::leaky_relu(0.2), -1, -1);
  EXPECT_NEAR(p1[0], po, 1e-6);
  EXPECT_NEAR(q1[0], qo, 1e-6);
}

TEST(Prox, EpigraphBranchesMembershipIdempotence) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (double a : {0.0, 0.2, 0.5}) {
    int hits[4] = {0, 0, 0, 0};
    for (int k = 0; k < 4000; ++k) {
      const double p = u(rng), q = u(rng);
      if (leaky(a, p) <= q) ++hits[0];
      else if (std::abs(q) <= p) ++hits[1];
      else if (q <= a * p && p <= -a * q) ++hits[2];
      else ++hits[3];
      double pp = p, qq = q;
      kernels::project_leaky_epigraph(a, pp, qq);
      EXPECT_LE(leaky(a, pp), qq + 1e-12);
      double p2 = pp, q2 = qq;
      kernels::project_leaky_epigraph(a, p2, q2);
      EXPECT_EQ(p2, pp);
      EXPECT_EQ(q2, qq);
      const auto [po, qo] = oracles::project_epigraph(Activation::leaky_relu(a), p, q);
      EXPECT_NEAR(pp, po, 1e-6);
      EXPECT_NEAR(qq, qo, 1e-6);
    }
    for (int b = 0; b < 4; ++b) EXPECT_GT(hits[b], 0) << "alpha " << a << " branch " << b;
  }
}

TEST(Prox, EpigraphContinuousAcrossBoundaries) {
  const double e = 1e-11;
  for (double a : {0.0, 0.2}) {
    // Boundary q = p (branch 2 meets branch 1), q = -p, q = a p, p = -a q.
    const std::pair<double, double> pts[] = {{1.0, 1.0}, {1.0, -1.0}, {-1.0, -a}, {a * 2.0, -2.0}};
    for (auto [p, q] : pts) {
      double p1 = p + e, q1 = q - e, p2 = p - e, q2 = q + e;
      kernels::project_leaky_epigraph(a, p1, q1);
      kernels::project_leaky_epigraph(a, p2, q2);
      EXPECT_NEAR(p1, p2, 1e-9);
      EXPECT_NEAR(q1, q2, 1e-9);
    }
  }
}

TEST(Prox, FinalConjugateExamples) {
  const Tensor a({1}, {1.0}), b({1}, {0.0});
  EXPECT_DOUBLE_EQ(prox_final_conjugate(a, b, 1.0, Tensor({1}, {2.0}))[0], 1.0);
  EXPECT_DOUBLE_EQ(prox_final_conjugate(a, b, 1.0, Tensor({1}, {-0.5}))[0], 0.0);
  EXPECT_DOUBLE_EQ(prox_final_conjugate(a, b, 1.0, Tensor({1}, {0.3}))[0], 0.3);
  EXPECT_DOUBLE_EQ(prox_final_conjugate(Tensor({1}), b, 1.0, Tensor({1}, {0.3}))[0], 0.0);
  EXPECT_THROW(prox_final_conjugate(Tensor({1}, {-1.0}), b, 1.0, Tensor({1})), Error);
}

TEST(Prox, FinalConjugateMoreau) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3), pos(0.1, 3);
  for (int k = 0; k < 100; ++k) {
    const double a = pos(rng), b = u(rng), s = pos(rng), w = u(rng);
    const double conj = prox_final_conjugate(Tensor({1}, {a}), Tensor({1}, {b}), s, Tensor({1}, {w}))[0];
    // prox of s f^* via the primal prox of f(w) = a relu(w + b) with step 1/s.
    const double primal = numeric_prox_oracle([&](double v) { return a * std::max(v + b, 0.0); },
                                              1.0 / s, w / s, {-100, 100});
    EXPECT_NEAR(conj, w - s * primal, 1e-6);
  }
}

TEST(Prox, KlConjugateExamples) {
  EXPECT_DOUBLE_EQ(prox_kl_conjugate(Tensor({1}), Tensor({1}), 1.0, Tensor({1}, {3.0}))[0], 1.0);
  EXPECT_DOUBLE_EQ(prox_kl_conjugate(Tensor({1}), Tensor({1}), 1.0, Tensor({1}, {0.4}))[0], 0.4);
  EXPECT_DOUBLE_EQ(prox_kl_conjugate(Tensor({1}, {1.0}), Tensor({1}), 1.0, Tensor({1}, {1.0}))[0], 0.0);
  EXPECT_THROW(prox_kl_conjugate(Tensor({1}, {-1.0}), Tensor({1}), 1.0, Tensor({1})), Error);
}

TEST(Prox, KlConjugateNestedOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> yd(0.1, 5), rd(0.0, 3), sd(0.1, 3), wd(-4, 4);
  for (int k = 0; k < 200; ++k) {
    const double y = yd(rng), r = rd(rng), s = sd(rng), w = wd(rng);
    const double got = prox_kl_conjugate(Tensor({1}, {y}), Tensor({1}, {r}), s, Tensor({1}, {w}))[0];
    EXPECT_LT(got, 1.0);
    // f*(v) = sup_u u v - f(u), f(u) = u + r - y + y log(y / (u + r)).
    auto fstar = [&](double v) {
      auto neg = [&](double u) { return -(u * v - (u + r - y + y * std::log(y / (u + r)))); };
      const double umax = y / std::max(1e-3, 1.0 - v) * 4 + 10;
      const double u = oracles::golden_section(neg, -r + 1e-12, umax, 1e-14);
      return -neg(u);
    };
    const double oracle = numeric_prox_oracle(fstar, s, w, {std::min(w, 1.0) - 20.0, 1.0 - 1e-9, true});
    EXPECT_NEAR(got, oracle, 1e-6) << "y=" << y << " r=" << r << " s=" << s << " w=" << w;
  }
}

TEST(Prox, OracleExamples) {
  // Golden section on a smooth valley resolves about sqrt(eps) of the bracket.
  EXPECT_NEAR(numeric_prox_oracle([](double) { return 0.0; }, 1.0, 0.7, {-5, 5}), 0.7, 1e-7);
  EXPECT_NEAR(numeric_prox_oracle([](double v) { return std::abs(v); }, 1.0, 2.0, {-5, 5}), 1.0, 1e-7);
  auto box = [](double v) { return (v < 0 || v > 1) ? std::numeric_limits<double>::infinity() : 0.0; };
  EXPECT_NEAR(numeric_prox_oracle(box, 1.0, 5.0, {0, 1, true}), 1.0, 1e-8);
  EXPECT_THROW(numeric_prox_oracle([](double) { return 0.0; }, 1.0, 50.0, {-5, 5}), Error);
}

TEST(Prox, MoreauExamples) {
  const ProxFunction zero_indicator = [](double, const Tensor& x) { return Tensor(x.shape()); };
  const Tensor x({2}, {1.5, -2});
  EXPECT_EQ(moreau_decompose(zero_indicator, 1.0, x), x);
  const ProxFunction half_sq = [](double s, const Tensor& v) { return (1.0 / (1.0 + s)) * v; };
  const Tensor h = moreau_decompose(half_sq, 1.0, x);
  EXPECT_DOUBLE_EQ(h[0], 0.75);
  EXPECT_DOUBLE_EQ(h[1], -1.0);
}

TEST(Prox, MoreauRandomPiecewiseLinear) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-3, 3), pos(0.1, 2);
  for (int k = 0; k < 100; ++k) {
    // h(v) = c1 max(v - t, 0) + c2 max(t - v, 0), h*(s) = s t on [-c2, c1].
    const double c1 = pos(rng), c2 = pos(rng), t = u(rng), tau = pos(rng), x = u(rng);
    auto h = [&](double v) { return c1 * std::max(v - t, 0.0) + c2 * std::max(t - v, 0.0); };
    const ProxFunction ph = [&](double s, const Tensor& in) {
      return Tensor({1}, {numeric_prox_oracle(h, s, in[0], {-200, 200})});
    };
    const double lhs = moreau_decompose(ph, tau, Tensor({1}, {x}))[0];
    const double direct = std::clamp(x - tau * t, -c2, c1);
    EXPECT_NEAR(lhs, direct, 1e-6);
  }
}

TEST(Prox, FirmNonexpansive) {
  std::mt19937_64 rng(4);
  const Tensor y = random_tensor({5}, rng), r = random_tensor({5}, rng, 0, 1);
  const Tensor yk = random_tensor({5}, rng, 0, 3);
  const Tensor a = random_tensor({5}, rng, 0, 2), b = random_tensor({5}, rng);
  const std::vector<ProxDescriptor> descs{
      L1Shift{0.7, y, {}}, L2Shift{1.3, y, {}}, KLConjugate{yk, r},
      FinalLayerConjugate{a, b, 0.2}, NonNegProject{}, Zero{}};
  for (const auto& d : descs) {
    for (int k = 0; k < 50; ++k) {
      const Tensor x1 = random_tensor({5}, rng, -3, 3), x2 = random_tensor({5}, rng, -3, 3);
      const Tensor p1 = prox(d, 0.8, x1), p2 = prox(d, 0.8, x2);
      const Tensor dp = p1 - p2;
      EXPECT_LE(dot(dp, dp), dot(dp, x1 - x2) + 1e-10);
    }
  }
  for (double alpha : {0.0, 0.2}) {
    for (int k = 0; k < 50; ++k) {
      const Tensor x1 = random_tensor({2, 5}, rng, -3, 3), x2 = random_tensor({2, 5}, rng, -3, 3);
      const Tensor p1 = prox(EpigraphLeakyReLU{alpha}, 1.0, x1), p2 = prox(EpigraphLeakyReLU{alpha}, 1.0, x2);
      const Tensor dp = p1 - p2;
      EXPECT_LE(dot(dp, dp), dot(dp, x1 - x2) + 1e-10);
    }
  }
}
