#include "icnnpd/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace icnnpd {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("Tensor", shape_, Shape{data_.size()});
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("reshape", shape, shape_);
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) { return axpy(1.0, other); }
Tensor& Tensor::operator-=(const Tensor& other) { return axpy(-1.0, other); }

Tensor& Tensor::operator*=(double alpha) {
  for (auto& v : data_) v *= alpha;
  return *this;
}

Tensor& Tensor::axpy(double alpha, const Tensor& other) {
  require_shape("axpy", shape_, other.shape_);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += alpha * other.data_[i];
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double alpha, Tensor a) { return a *= alpha; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double dot(const Tensor& a, const Tensor& b) {
  require_shape("dot", a.shape(), b.shape());
  return dot(a.data(), b.data());
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }
double norm2(const Tensor& a) { return norm2(a.data()); }

double norm_inf(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_value(const Tensor& a) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : a.data()) m = std::max(m, v);
  return m;
}

double min_value(const Tensor& a) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : a.data()) m = std::min(m, v);
  return m;
}

void require_shape(const std::string& context, const Shape& expected,
                   const Shape& actual) {
  if (expected != actual) throw ShapeError(context, expected, actual);
}

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'T', 'N', 'S', 'B'};
constexpr std::uint16_t kBlobVersion = 1;

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <class T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) {
    throw Error(ErrorKind::Format, "TNSB blob truncated");
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[pos + i]) << (8 * i);
  }
  pos += sizeof(T);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_blob(const Tensor& t) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_le<std::uint16_t>(out, kBlobVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.rank()));
  for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
  out.reserve(out.size() + 8 * t.size());
  for (double v : t.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_le<std::uint64_t>(out, bits);
  }
  return out;
}

Tensor decode_blob(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorKind::Format, "not a TNSB blob (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = get_le<std::uint16_t>(bytes, pos);
  if (version != kBlobVersion) {
    throw Error(ErrorKind::Format,
                "unsupported TNSB version " + std::to_string(version));
  }
  const auto rank = get_le<std::uint16_t>(bytes, pos);
  Shape shape(rank);
  for (auto& d : shape) {
    d = static_cast<std::size_t>(get_le<std::uint64_t>(bytes, pos));
    if (d == 0) throw Error(ErrorKind::Format, "TNSB blob has a zero dimension");
  }
  const std::size_t n = shape_size(shape);
  if (bytes.size() - pos != 8 * n) {
    throw Error(ErrorKind::Format, "TNSB payload size does not match shape " +
                                       to_string(shape));
  }
  std::vector<double> data(n);
  for (auto& v : data) {
    const auto bits = get_le<std::uint64_t>(bytes, pos);
    std::memcpy(&v, &bits, sizeof v);
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_blob(const Tensor& t, const std::filesystem::path& path) {
  const auto bytes = encode_blob(t);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

Tensor read_blob(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::MissingFile, "blob file not found: " + path.string());
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_blob(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace icnnpd
