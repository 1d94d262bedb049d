#include "icnnpd/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace icnnpd {

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::DenoiseSaltPepper: return "denoise_salt_pepper";
    case TaskKind::Inpaint: return "inpaint";
    case TaskKind::CT: return "ct";
  }
  return "?";
}

const char* to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::ShepLoganLike: return "shepp_logan";
    case PhantomKind::SmoothBlobs: return "smooth_blobs";
    case PhantomKind::Checker: return "checker";
  }
  return "?";
}

namespace {

void check_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorKind::Config, std::string(name) + " must lie in [0, 1]");
  }
}

RadonGeometry ct_geometry(const TaskConfig& t) {
  RadonGeometry g = t.geometry.image_side == 0 ? default_geometry(t.image_side, 60) : t.geometry;
  g.validate();
  if (g.image_side != t.image_side) {
    throw Error(ErrorKind::Config, "CT geometry image_side " + std::to_string(g.image_side) +
                                       " differs from image_side " +
                                       std::to_string(t.image_side));
  }
  return g;
}

struct Ellipse {
  double value, a, b, x0, y0, phi_deg;
};

// Modified Shepp-Logan table on [-1, 1]^2.
constexpr Ellipse kSheppLogan[] = {
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},        {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
    {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
    {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},       {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
    {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},     {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
    {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},   {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
};

}  // namespace

void TaskConfig::validate() const {
  if (image_side < 8) throw Error(ErrorKind::Config, "image_side must be >= 8");
  check_fraction(sp_density, "sp_density");
  check_fraction(mask_fraction, "mask_fraction");
  if (!(gaussian_sigma >= 0.0) || !std::isfinite(gaussian_sigma)) {
    throw Error(ErrorKind::Config, "gaussian_sigma must be >= 0");
  }
  if (task == TaskKind::CT) {
    if (!(peak_counts > 0.0) || !std::isfinite(peak_counts)) {
      throw Error(ErrorKind::Config, "peak_counts must be > 0");
    }
    if (!(count_scale >= 0.0) || !std::isfinite(count_scale)) {
      throw Error(ErrorKind::Config, "count_scale must be >= 0");
    }
    if (!(background >= 0.0) || !std::isfinite(background)) {
      throw Error(ErrorKind::Config, "background must be >= 0");
    }
    ct_geometry(*this);
  }
}

Tensor make_phantom(PhantomKind kind, std::size_t side, std::uint64_t seed) {
  if (side < 8) throw Error(ErrorKind::InvalidArgument, "phantom side must be >= 8");
  Tensor img(Shape{1, side, side});
  const double n = static_cast<double>(side);
  auto coord = [n](std::size_t k) { return (2.0 * static_cast<double>(k) + 1.0) / n - 1.0; };
  std::mt19937_64 rng(seed);

  switch (kind) {
    case PhantomKind::Checker: {
      const std::size_t block = std::max<std::size_t>(1, side / 8);
      for (std::size_t i = 0; i < side; ++i) {
        for (std::size_t j = 0; j < side; ++j) {
          img[i * side + j] = ((i / block + j / block) % 2 == 0) ? 0.0 : 1.0;
        }
      }
      break;
    }
    case PhantomKind::ShepLoganLike: {
      // seed 0 is the plain table; other seeds jitter centres and contrasts.
      std::uniform_real_distribution<double> jitter(-1.0, 1.0);
      const double amount = seed == 0 ? 0.0 : 1.0;
      std::vector<Ellipse> table(std::begin(kSheppLogan), std::end(kSheppLogan));
      for (std::size_t e = 2; e < table.size(); ++e) {
        table[e].x0 += amount * 0.03 * jitter(rng);
        table[e].y0 += amount * 0.03 * jitter(rng);
        table[e].value *= 1.0 + amount * 0.3 * jitter(rng);
      }
      for (std::size_t i = 0; i < side; ++i) {
        const double y = -coord(i);
        for (std::size_t j = 0; j < side; ++j) {
          const double x = coord(j);
          double v = 0.0;
          for (const auto& e : table) {
            const double phi = e.phi_deg * std::numbers::pi / 180.0;
            const double dx = x - e.x0, dy = y - e.y0;
            const double u = (dx * std::cos(phi) + dy * std::sin(phi)) / e.a;
            const double w = (-dx * std::sin(phi) + dy * std::cos(phi)) / e.b;
            if (u * u + w * w <= 1.0) v += e.value;
          }
          img[i * side + j] = std::clamp(v, 0.0, 1.0);
        }
      }
      break;
    }
    case PhantomKind::SmoothBlobs: {
      std::uniform_real_distribution<double> centre(-0.6, 0.6);
      std::uniform_real_distribution<double> width(0.12, 0.35);
      std::uniform_real_distribution<double> amp(0.3, 1.0);
      struct Blob { double x, y, s, a; };
      std::vector<Blob> blobs(6);
      for (auto& b : blobs) b = {centre(rng), centre(rng), width(rng), amp(rng)};
      for (std::size_t i = 0; i < side; ++i) {
        const double y = -coord(i);
        for (std::size_t j = 0; j < side; ++j) {
          const double x = coord(j);
          double v = 0.0;
          for (const auto& b : blobs) {
            const double r2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
            v += b.a * std::exp(-r2 / (2.0 * b.s * b.s));
          }
          img[i * side + j] = v;
        }
      }
      const double peak = max_value(img);
      if (peak > 0.0) img *= 1.0 / peak;
      for (auto& v : img.data()) v = std::clamp(v, 0.0, 1.0);
      break;
    }
  }
  return img;
}

Measurement corrupt(const TaskConfig& task, const Tensor& x) {
  task.validate();
  require_shape("corrupt input", Shape{1, task.image_side, task.image_side}, x.shape());
  std::mt19937_64 rng(task.seed);
  Measurement m;

  switch (task.task) {
    case TaskKind::DenoiseSaltPepper: {
      m.y = x;
      m.forward = make_identity(x.shape());
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::bernoulli_distribution salt(0.5);
      for (auto& v : m.y.data()) {
        if (u(rng) < task.sp_density) v = salt(rng) ? 1.0 : 0.0;
      }
      break;
    }
    case TaskKind::Inpaint: {
      const std::size_t n = x.size();
      const auto removed = static_cast<std::size_t>(std::llround(task.mask_fraction * static_cast<double>(n)));
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      Tensor mask(x.shape(), 1.0);
      for (std::size_t k = 0; k < removed; ++k) mask[order[k]] = 0.0;
      std::normal_distribution<double> noise(0.0, 1.0);
      m.y = Tensor(x.shape());
      for (std::size_t k = 0; k < n; ++k) {
        const double e = noise(rng);
        if (mask[k] != 0.0) m.y[k] = x[k] + task.gaussian_sigma * e;
      }
      m.forward = make_mask(std::move(mask));
      break;
    }
    case TaskKind::CT: {
      m.geometry = ct_geometry(task);
      const Tensor ax = RadonOperator(m.geometry, x.shape()).apply(x);
      const double peak = max_value(ax);
      m.count_scale = task.count_scale > 0.0 ? task.count_scale
                                             : (peak > 0.0 ? task.peak_counts / peak : 1.0);
      RadonGeometry scaled = m.geometry;
      scaled.scale = m.geometry.effective_scale() * m.count_scale;
      m.forward = make_radon(scaled, x.shape());
      m.background = Tensor(ax.shape(), task.background);
      m.y = Tensor(ax.shape());
      for (std::size_t k = 0; k < ax.size(); ++k) {
        const double mean = std::max(0.0, m.count_scale * ax[k] + task.background);
        m.y[k] = mean > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(mean)(rng)) : 0.0;
      }
      break;
    }
  }
  return m;
}

double psnr(const Tensor& x, const Tensor& ref, double peak) {
  require_shape("psnr", ref.shape(), x.shape());
  if (!(peak > 0.0)) throw Error(ErrorKind::InvalidArgument, "psnr peak must be > 0");
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) se += (x[i] - ref[i]) * (x[i] - ref[i]);
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(x.size());
  return 10.0 * std::log10(peak * peak / mse);
}

Tensor fbp(const RadonGeometry& geometry, const Tensor& sinogram) {
  geometry.validate();
  const std::size_t na = geometry.n_angles, nb = geometry.n_bins;
  require_shape("fbp sinogram", Shape{na, nb}, sinogram.shape());
  const double d = geometry.detector_spacing;

  // Spatial Ram-Lak kernel sampled at the detector spacing.
  std::vector<double> h(2 * nb - 1, 0.0);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const long off = static_cast<long>(k) - static_cast<long>(nb - 1);
    if (off == 0) {
      h[k] = 1.0 / (4.0 * d * d);
    } else if (off % 2 != 0) {
      const double den = std::numbers::pi * static_cast<double>(off) * d;
      h[k] = -1.0 / (den * den);
    }
  }
  Tensor filtered(sinogram.shape());
  for (std::size_t a = 0; a < na; ++a) {
    const double* row = sinogram.values().data() + a * nb;
    for (std::size_t t = 0; t < nb; ++t) {
      double acc = 0.0;
      for (std::size_t s = 0; s < nb; ++s) acc += row[s] * h[t + (nb - 1) - s];
      filtered[a * nb + t] = d * acc;
    }
  }
  const double scale = geometry.effective_scale();
  const std::size_t side = geometry.image_side;
  Tensor img = RadonOperator(geometry, Shape{1, side, side}).adjoint(filtered);
  img *= std::numbers::pi / (static_cast<double>(na) * scale * scale);
  for (auto& v : img.data()) v = std::max(v, 0.0);
  return img;
}

namespace {

std::pair<std::size_t, std::size_t> image_dims(const Tensor& image) {
  const auto& s = image.shape();
  if (s.size() < 2) throw ShapeError("PGM image", Shape{1, 0, 0}, s);
  for (std::size_t k = 0; k + 2 < s.size(); ++k) {
    if (s[k] != 1) throw ShapeError("PGM image", Shape{1, s[s.size() - 2], s.back()}, s);
  }
  return {s[s.size() - 2], s.back()};
}

std::filesystem::path sidecar_path(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".json");
}

}  // namespace

PgmScaling write_pgm(const Tensor& image, const std::filesystem::path& path,
                     std::optional<PgmScaling> scaling) {
  const auto [h, w] = image_dims(image);
  PgmScaling sc;
  if (scaling) {
    sc = *scaling;
  } else {
    sc.lo = min_value(image);
    sc.hi = max_value(image);
  }
  if (!(sc.hi > sc.lo)) sc.hi = sc.lo + 1.0;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << "P5\n" << w << ' ' << h << "\n255\n";
  std::vector<unsigned char> bytes(h * w);
  for (std::size_t k = 0; k < bytes.size(); ++k) {
    const double t = (image[k] - sc.lo) / (sc.hi - sc.lo);
    bytes[k] = static_cast<unsigned char>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorKind::Io, "failed writing " + path.string());

  nlohmann::json meta = {{"format", "pgm-scaling"},
                         {"width", w},
                         {"height", h},
                         {"lo", sc.lo},
                         {"hi", sc.hi},
                         {"mapping", "pixel = round(255 * clamp((value - lo) / (hi - lo), 0, 1))"}};
  std::ofstream js(sidecar_path(path));
  if (!js) throw Error(ErrorKind::Io, "cannot write " + sidecar_path(path).string());
  js << meta.dump(2) << '\n';
  return sc;
}

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (is.get(c)) {
      if (c == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  if (token() != "P5") throw Error(ErrorKind::Format, path.string() + ": not a binary PGM");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(token());
    h = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw Error(ErrorKind::Format, path.string() + ": malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255) {
    throw Error(ErrorKind::Format, path.string() + ": unsupported PGM dimensions or maxval");
  }
  std::vector<unsigned char> bytes(w * h);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) {
    throw Error(ErrorKind::Format, path.string() + ": truncated PGM data");
  }
  Tensor img(Shape{1, h, w});
  for (std::size_t k = 0; k < bytes.size(); ++k) {
    img[k] = static_cast<double>(bytes[k]) / static_cast<double>(maxval);
  }
  return img;
}

}  // namespace icnnpd
