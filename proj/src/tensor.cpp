#include "flowcast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "flowcast/errors.hpp"

namespace flowcast {

Tensor::Tensor(std::initializer_list<std::size_t> shape, double fill)
    : Tensor(std::span<const std::size_t>(shape.begin(), shape.size()), fill) {}

Tensor::Tensor(std::span<const std::size_t> shape, double fill) {
  init_shape(shape);
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  data_.assign(n, fill);
}

Tensor::Tensor(std::initializer_list<std::size_t> shape, std::vector<double> data) {
  init_shape(std::span<const std::size_t>(shape.begin(), shape.size()));
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (data.size() != n) {
    throw StructuralError("tensor data length " + std::to_string(data.size()) +
                          " does not match shape " + shape_string());
  }
  data_ = std::move(data);
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

void Tensor::init_shape(std::span<const std::size_t> shape) {
  if (shape.empty() || shape.size() > kMaxRank) {
    throw StructuralError("tensor rank must be between 1 and 3");
  }
  rank_ = shape.size();
  std::copy(shape.begin(), shape.end(), shape_.begin());
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank_) {
    throw StructuralError("axis " + std::to_string(axis) + " out of range for shape " +
                          shape_string());
  }
  return shape_[axis];
}

std::span<double> Tensor::slab(std::size_t i) {
  const std::size_t stride = rank_ == 0 ? 0 : data_.size() / shape_[0];
  return std::span<double>(data_).subspan(i * stride, stride);
}

std::span<const double> Tensor::slab(std::size_t i) const {
  const std::size_t stride = rank_ == 0 ? 0 : data_.size() / shape_[0];
  return std::span<const double>(data_).subspan(i * stride, stride);
}

bool Tensor::same_shape(const Tensor& other) const noexcept {
  return rank_ == other.rank_ && std::equal(shape_.begin(), shape_.begin() + rank_,
                                            other.shape_.begin());
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::ensure_finite(std::string_view op) const {
  if (!all_finite()) {
    throw NumericError("non-finite value produced by " + std::string(op));
  }
}

void Tensor::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < rank_; ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

bool operator==(const Tensor& a, const Tensor& b) noexcept {
  if (!a.same_shape(b)) return false;
  // Bitwise comparison so that NaN sentinels in the same cells compare equal.
  return a.data_.size() == b.data_.size() &&
         (a.data_.empty() ||
          std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(double)) == 0);
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw StructuralError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                          b.shape_string());
  }
}

}  // namespace flowcast
