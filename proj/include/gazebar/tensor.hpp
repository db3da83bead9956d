#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gazebar {

using Shape = std::vector<std::size_t>;

/// Number of elements described by a shape. An empty shape describes no tensor (0).
std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles.
///
/// A default-constructed tensor is "absent": empty shape, no data. Every
/// non-empty tensor has strictly positive dimensions and
/// `size() == shape_numel(shape())`.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // [C,H,W] accessors
  double& at(std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  void fill(double value) noexcept;
  bool all_finite() const noexcept;
  double sum() const noexcept;

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  /// Element-wise bitwise equality (distinguishes -0.0 from 0.0, NaN payloads).
  bool bit_equal(const Tensor& other) const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws std::invalid_argument naming both shapes when they differ.
void require_shape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace gazebar
