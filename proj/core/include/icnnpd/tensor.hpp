#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "icnnpd/error.hpp"

namespace icnnpd {

std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles. Every signal, weight and iterate in the
/// library lives in one of these.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Same data, different shape of equal total size.
  Tensor reshaped(Shape shape) const;

  void fill(double value);
  bool all_finite() const noexcept;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double alpha);

  /// this += alpha * other
  Tensor& axpy(double alpha, const Tensor& other);

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double alpha, Tensor a);

double dot(std::span<const double> a, std::span<const double> b);
double dot(const Tensor& a, const Tensor& b);
double norm2(std::span<const double> a);
double norm2(const Tensor& a);
double norm_inf(const Tensor& a);
double max_value(const Tensor& a);
double min_value(const Tensor& a);

void require_shape(const std::string& context, const Shape& expected,
                   const Shape& actual);

// "TNSB" blob format: magic, u16 version (1), u16 rank, rank x u64 dims,
// then the data as f64. Everything little-endian.
std::vector<std::uint8_t> encode_blob(const Tensor& t);
Tensor decode_blob(std::span<const std::uint8_t> bytes);
void write_blob(const Tensor& t, const std::filesystem::path& path);
Tensor read_blob(const std::filesystem::path& path);

}  // namespace icnnpd
