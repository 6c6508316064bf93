#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace flowcast {

// Dense row-major tensor of doubles with rank 1 to 3.
class Tensor {
 public:
  static constexpr std::size_t kMaxRank = 3;

  Tensor() = default;
  explicit Tensor(std::initializer_list<std::size_t> shape, double fill = 0.0);
  Tensor(std::span<const std::size_t> shape, double fill = 0.0);
  Tensor(std::initializer_list<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rank() const noexcept { return rank_; }
  std::size_t dim(std::size_t axis) const;
  std::span<const std::size_t> shape() const noexcept { return {shape_.data(), rank_}; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * shape_[1] + j]; }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Contiguous sub-block for a fixed leading index.
  std::span<double> slab(std::size_t i);
  std::span<const double> slab(std::size_t i) const;

  bool same_shape(const Tensor& other) const noexcept;
  bool all_finite() const noexcept;
  // Throws NumericError naming `op` if any element is NaN or infinite.
  void ensure_finite(std::string_view op) const;

  void fill(double value) noexcept;
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) noexcept;

 private:
  void init_shape(std::span<const std::size_t> shape);

  std::array<std::size_t, kMaxRank> shape_{};
  std::size_t rank_ = 0;
  std::vector<double> data_;
};

// Throws StructuralError unless both tensors have the same shape.
void require_same_shape(const Tensor& a, const Tensor& b, std::string_view what);

}  // namespace flowcast
