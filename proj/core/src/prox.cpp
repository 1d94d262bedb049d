#include "icnnpd/prox.hpp"

#include <algorithm>
#include <cmath>

namespace icnnpd {

namespace kernels {

double soft_shrink_shift(double xbar, double y, double thresh) noexcept {
  const double d = xbar - y;
  if (d > thresh) return xbar - thresh;
  if (d < -thresh) return xbar + thresh;
  return y;
}

void project_leaky_epigraph(double alpha, double& p, double& q) noexcept {
  const double hp = p >= 0.0 ? p : alpha * p;
  if (hp <= q) return;
  if (std::abs(q) <= p) {
    const double m = 0.5 * (p + q);
    p = m;
    q = m;
    return;
  }
  if (q <= alpha * p && p <= -alpha * q) {
    const double t = (p + alpha * q) / (1.0 + alpha * alpha);
    p = t;
    q = alpha * t;
    return;
  }
  p = 0.0;
  q = 0.0;
}

void project_identity_epigraph(double& p, double& q) noexcept {
  if (p <= q) return;
  const double m = 0.5 * (p + q);
  p = m;
  q = m;
}

void project_epigraph(const Activation& act, std::span<double> p, std::span<double> q) noexcept {
  if (act.kind == Activation::Kind::Identity) {
    for (std::size_t i = 0; i < p.size(); ++i) project_identity_epigraph(p[i], q[i]);
  } else {
    const double alpha = act.negative_slope();
    for (std::size_t i = 0; i < p.size(); ++i) project_leaky_epigraph(alpha, p[i], q[i]);
  }
}

double kl_conjugate(double w, double y, double r, double sigma) noexcept {
  const double sr = sigma * r;
  const double d = w - 1.0 + sr;
  return 0.5 * (w + 1.0 + sr - std::sqrt(d * d + 4.0 * sigma * y));
}

}  // namespace kernels

namespace {

struct StepView {
  const ProxStep& step;
  const Tensor& like;

  double operator[](std::size_t i) const {
    if (const auto* s = std::get_if<double>(&step)) return *s;
    return std::get<Tensor>(step)[i];
  }

  void check() const {
    if (const auto* s = std::get_if<double>(&step)) {
      if (!(*s > 0.0) || !std::isfinite(*s)) {
        throw Error(ErrorKind::InvalidArgument, "prox: step must be positive and finite");
      }
      return;
    }
    const auto& t = std::get<Tensor>(step);
    require_shape("prox step", like.shape(), t.shape());
    for (double v : t.data()) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw Error(ErrorKind::InvalidArgument, "prox: diagonal step entries must be positive");
      }
    }
  }
};

double weight_at(const Tensor& w, std::size_t i) { return w.empty() ? 1.0 : w[i]; }

void require_nonneg(const Tensor& t, const char* what) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < 0.0) {
      throw Error(ErrorKind::InvalidArgument, std::string(what) + " has negative entry at index " +
                                                  std::to_string(i));
    }
  }
}

}  // namespace

std::pair<Tensor, Tensor> project_epigraph_leaky_relu(double alpha, const Tensor& pbar,
                                                      const Tensor& qbar) {
  require_shape("epigraph projection", pbar.shape(), qbar.shape());
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "epigraph projection: alpha must lie in [0, 1)");
  }
  Tensor p = pbar, q = qbar;
  for (std::size_t i = 0; i < p.size(); ++i) kernels::project_leaky_epigraph(alpha, p[i], q[i]);
  return {std::move(p), std::move(q)};
}

Tensor prox_final_conjugate(const Tensor& a, const Tensor& b, double sigma, const Tensor& wbar) {
  return prox(FinalLayerConjugate{a, b, 0.0}, sigma, wbar);
}

Tensor prox_kl_conjugate(const Tensor& y, const Tensor& r, double sigma, const Tensor& wbar) {
  return prox(KLConjugate{y, r}, sigma, wbar);
}

Tensor prox(const ProxDescriptor& desc, const ProxStep& step, const Tensor& xbar) {
  const StepView s{step, xbar};
  s.check();
  Tensor out = xbar;
  auto x = out.data();

  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, L1Shift>) {
          require_shape("L1Shift y", xbar.shape(), d.y.shape());
          if (!d.weight.empty()) require_shape("L1Shift weight", xbar.shape(), d.weight.shape());
          if (!(d.lambda > 0.0)) throw Error(ErrorKind::InvalidArgument, "L1Shift: lambda must be > 0");
          for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = kernels::soft_shrink_shift(x[i], d.y[i], s[i] * d.lambda * weight_at(d.weight, i));
          }
        } else if constexpr (std::is_same_v<D, L2Shift>) {
          require_shape("L2Shift y", xbar.shape(), d.y.shape());
          if (!d.mask.empty()) require_shape("L2Shift mask", xbar.shape(), d.mask.shape());
          if (!(d.weight > 0.0)) throw Error(ErrorKind::InvalidArgument, "L2Shift: weight must be > 0");
          for (std::size_t i = 0; i < x.size(); ++i) {
            const double c = s[i] * d.weight * weight_at(d.mask, i);
            x[i] = (x[i] + c * d.y[i]) / (1.0 + c);
          }
        } else if constexpr (std::is_same_v<D, KLConjugate>) {
          require_shape("KLConjugate y", xbar.shape(), d.y.shape());
          require_shape("KLConjugate r", xbar.shape(), d.r.shape());
          require_nonneg(d.y, "KLConjugate y");
          require_nonneg(d.r, "KLConjugate r");
          for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = kernels::kl_conjugate(x[i], d.y[i], d.r[i], s[i]);
          }
        } else if constexpr (std::is_same_v<D, EpigraphLeakyReLU>) {
          if (xbar.rank() < 1 || xbar.shape()[0] != 2) {
            throw ShapeError("EpigraphLeakyReLU input (leading axis 2)", Shape{2}, xbar.shape());
          }
          if (!(d.alpha >= 0.0 && d.alpha < 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "EpigraphLeakyReLU: alpha must lie in [0, 1)");
          }
          const std::size_t half = x.size() / 2;
          for (std::size_t i = 0; i < half; ++i) {
            kernels::project_leaky_epigraph(d.alpha, x[i], x[half + i]);
          }
        } else if constexpr (std::is_same_v<D, FinalLayerConjugate>) {
          require_shape("FinalLayerConjugate a", xbar.shape(), d.a.shape());
          require_shape("FinalLayerConjugate b", xbar.shape(), d.b.shape());
          require_nonneg(d.a, "FinalLayerConjugate a");
          for (std::size_t i = 0; i < x.size(); ++i) {
            const double hi = d.a[i];
            const double lo = d.alpha * hi;
            x[i] = std::clamp(x[i] + s[i] * d.b[i], lo, hi);
          }
        } else if constexpr (std::is_same_v<D, NonNegProject>) {
          for (auto& v : x) v = std::max(v, 0.0);
        } else {
          static_assert(std::is_same_v<D, Zero>);
        }
      },
      desc);
  return out;
}

Tensor moreau_decompose(const ProxFunction& prox_h, double tau, const Tensor& xbar) {
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "moreau_decompose: tau must be > 0");
  Tensor scaled = xbar;
  scaled *= 1.0 / tau;
  Tensor inner = prox_h(1.0 / tau, scaled);
  Tensor out = xbar;
  out.axpy(-tau, inner);
  return out;
}

double numeric_prox_oracle(const std::function<double(double)>& h, double step, double xbar,
                           Bracket bracket) {
  if (!(step > 0.0) || !(bracket.lo < bracket.hi)) {
    throw Error(ErrorKind::InvalidArgument, "numeric_prox_oracle: need step > 0 and lo < hi");
  }
  auto phi = [&](double v) { return 0.5 / step * (v - xbar) * (v - xbar) + h(v); };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  const double width0 = bracket.hi - bracket.lo;
  const double tol = 1e-9 * std::max(1.0, std::max(std::abs(bracket.lo), std::abs(bracket.hi)));
  double a = bracket.lo, b = bracket.hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = phi(c), fd = phi(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = phi(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = phi(d);
    }
  }
  const double v = 0.5 * (a + b);
  if (!bracket.is_domain) {
    const double edge = 1e-6 * width0;
    if (v - bracket.lo < edge || bracket.hi - v < edge) {
      throw Error(ErrorKind::InvalidArgument,
                  "numeric_prox_oracle: minimizer at the bracket edge; bracket does not capture descent");
    }
  } else {
    // Golden section never evaluates the endpoints; snap to them when the
    // search collapsed onto one.
    if (v - bracket.lo <= tol && phi(bracket.lo) <= phi(v)) return bracket.lo;
    if (bracket.hi - v <= tol && phi(bracket.hi) <= phi(v)) return bracket.hi;
  }
  return v;
}

}  // namespace icnnpd
