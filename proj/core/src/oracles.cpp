#include "icnnpd/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "icnnpd/linops.hpp"

namespace icnnpd::oracles {

double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

std::pair<double, double> project_epigraph(const Activation& act, double p, double q) {
  if (act(p) <= q) return {p, q};
  auto dist = [&](double s) {
    const double gap = std::max(0.0, act(s) - q);
    return (s - p) * (s - p) + gap * gap;
  };
  const double span = 4.0 * (std::abs(p) + std::abs(q) + 1.0);
  const double s = golden_section(dist, p - span, p + span, 1e-14);
  return {s, std::max(q, act(s))};
}

std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i * n + i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

double spectral_norm(const Tensor& matrix) {
  if (matrix.rank() != 2) throw ShapeError("spectral_norm", Shape{0, 0}, matrix.shape());
  const std::size_t m = matrix.shape()[0], n = matrix.shape()[1];
  // Gram matrix on the smaller side.
  const bool rows = m <= n;
  const std::size_t k = rows ? m : n;
  std::vector<double> g(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      if (rows) {
        for (std::size_t l = 0; l < n; ++l) acc += matrix[i * n + l] * matrix[j * n + l];
      } else {
        for (std::size_t l = 0; l < m; ++l) acc += matrix[l * n + i] * matrix[l * n + j];
      }
      g[i * k + j] = acc;
    }
  }
  const auto ev = symmetric_eigenvalues(std::move(g), k);
  return std::sqrt(std::max(0.0, ev.back()));
}

GridSearchResult grid_minimize(const std::function<double(const Tensor&)>& f, Tensor centre,
                               const GridSearchOptions& options) {
  const std::size_t dim = centre.size();
  const std::size_t pts = options.points | 1;
  const long half = static_cast<long>(pts / 2);
  GridSearchResult res;
  res.x = centre;
  res.value = f(centre);
  res.evaluations = 1;
  double hw = options.half_width;
  std::vector<long> idx(dim);
  Tensor probe = centre;

  while (hw > options.tol && res.levels < options.max_levels) {
    ++res.levels;
    const double step = hw / static_cast<double>(half);
    const Tensor c = res.x;
    std::fill(idx.begin(), idx.end(), -half);
    bool edge = false;
    while (true) {
      for (std::size_t d = 0; d < dim; ++d) probe[d] = c[d] + step * static_cast<double>(idx[d]);
      const double v = f(probe);
      ++res.evaluations;
      if (v < res.value) {
        res.value = v;
        res.x = probe;
        edge = std::any_of(idx.begin(), idx.end(), [&](long i) { return std::abs(i) == half; });
      }
      std::size_t d = 0;
      while (d < dim && ++idx[d] > half) idx[d++] = -half;
      if (d == dim) break;
    }
    if (!edge) hw *= options.shrink;
  }
  return res;
}

double icnn_value_dense(const IcnnSpec& spec, const Tensor& x) {
  std::vector<double> z;
  const auto xs = x.values();
  for (std::size_t i = 0; i < spec.depth(); ++i) {
    const auto& layer = spec.layers[i];
    std::vector<double> pre(layer.b.values().begin(), layer.b.values().end());
    auto add = [&](const OperatorPtr& op, const std::vector<double>& in) {
      const Tensor m = materialize(*op);
      const std::size_t rows = m.shape()[0], cols = m.shape()[1];
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) pre[r] += m[r * cols + c] * in[c];
    };
    if (layer.V) add(layer.V, std::vector<double>(xs.begin(), xs.end()));
    if (layer.W && i > 0) add(layer.W, z);
    std::vector<double> out(pre.size());
    const double a = layer.activation.negative_slope();
    for (std::size_t k = 0; k < pre.size(); ++k) {
      out[k] = pre[k] >= 0.0 ? pre[k] : a * pre[k];
      if (layer.residual) out[k] += z[k];
    }
    z = std::move(out);
  }
  return z.at(0);
}

Tensor two_layer_l2_minimizer(const IcnnSpec& spec, const Tensor& y, double lambda, double gamma) {
  if (spec.depth() != 2 || spec.layers[1].residual || spec.layers[1].activation.negative_slope() != 1.0) {
    throw Error(ErrorKind::InvalidArgument, "two_layer_l2_minimizer: expects a two-layer network with a linear read-out");
  }
  const Tensor V = materialize(*spec.layers[0].V);
  const std::size_t h = V.shape()[0], n = V.shape()[1];
  const Tensor b0 = spec.layers[0].b;
  const double alpha = spec.layers[0].activation.negative_slope();
  const Tensor w = spec.layers[1].W ? materialize(*spec.layers[1].W) : Tensor({1, h});
  const Tensor v = spec.layers[1].V ? materialize(*spec.layers[1].V) : Tensor({1, n});
  const double s = gamma / lambda;
  const auto row = [&](std::size_t j, std::size_t i) { return V[j * n + i]; };

  // state: 0 off (slope alpha), 1 on (slope 1), 2 at the kink.
  std::vector<int> state(h, 0);
  const double tol = 1e-10;
  for (std::size_t code = 0, total = static_cast<std::size_t>(std::pow(3.0, static_cast<double>(h)));
       code < total; ++code) {
    std::size_t c = code;
    for (std::size_t j = 0; j < h; ++j, c /= 3) state[j] = static_cast<int>(c % 3);

    // x = base - s * sum_{k in K} w_k theta_k V_k
    std::vector<double> base(n);
    for (std::size_t i = 0; i < n; ++i) {
      double g = v[i];
      for (std::size_t j = 0; j < h; ++j) {
        if (state[j] != 2) g += w[j] * (state[j] == 1 ? 1.0 : alpha) * row(j, i);
      }
      base[i] = y[i] - s * g;
    }
    std::vector<std::size_t> K;
    for (std::size_t j = 0; j < h; ++j) {
      if (state[j] == 2) K.push_back(j);
    }
    // Kink rows: V_k x + b_k = 0, linear in theta_K.
    const std::size_t m = K.size();
    std::vector<double> A(m * m), r(m);
    for (std::size_t a = 0; a < m; ++a) {
      double vb = b0[K[a]];
      for (std::size_t i = 0; i < n; ++i) vb += row(K[a], i) * base[i];
      r[a] = vb;
      for (std::size_t bcol = 0; bcol < m; ++bcol) {
        double g = 0.0;
        for (std::size_t i = 0; i < n; ++i) g += row(K[a], i) * row(K[bcol], i);
        A[a * m + bcol] = s * w[K[bcol]] * g;
      }
    }
    // Gaussian elimination with partial pivoting.
    bool singular = false;
    for (std::size_t col = 0; col < m && !singular; ++col) {
      std::size_t piv = col;
      for (std::size_t a = col + 1; a < m; ++a) {
        if (std::abs(A[a * m + col]) > std::abs(A[piv * m + col])) piv = a;
      }
      if (std::abs(A[piv * m + col]) < 1e-14) {
        singular = true;
        break;
      }
      for (std::size_t k = 0; k < m; ++k) std::swap(A[col * m + k], A[piv * m + k]);
      std::swap(r[col], r[piv]);
      for (std::size_t a = col + 1; a < m; ++a) {
        const double f = A[a * m + col] / A[col * m + col];
        for (std::size_t k = col; k < m; ++k) A[a * m + k] -= f * A[col * m + k];
        r[a] -= f * r[col];
      }
    }
    if (singular) continue;
    std::vector<double> theta(m);
    for (std::size_t a = m; a-- > 0;) {
      double acc = r[a];
      for (std::size_t k = a + 1; k < m; ++k) acc -= A[a * m + k] * theta[k];
      theta[a] = acc / A[a * m + a];
    }
    bool ok = true;
    for (double t : theta) ok = ok && t >= alpha - tol && t <= 1.0 + tol;
    if (!ok) continue;

    Tensor x(spec.input_shape);
    for (std::size_t i = 0; i < n; ++i) {
      double xi = base[i];
      for (std::size_t a = 0; a < m; ++a) xi -= s * w[K[a]] * theta[a] * row(K[a], i);
      x[i] = xi;
    }
    for (std::size_t j = 0; j < h && ok; ++j) {
      if (state[j] == 2) continue;
      double u = b0[j];
      for (std::size_t i = 0; i < n; ++i) u += row(j, i) * x[i];
      ok = state[j] == 1 ? u >= -tol : u <= tol;
    }
    if (ok) return x;
  }
  throw Error(ErrorKind::InvalidArgument, "two_layer_l2_minimizer: no consistent activation pattern");
}

}  // namespace icnnpd::oracles
