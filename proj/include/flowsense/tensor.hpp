#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flowsense::neural {

// Dense row-major tensor of 64-bit reals. Rank 0 (scalar), 1 and 2 cover
// everything this engine needs; shape is kept general for serialization.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor matrix(int rows, int cols, std::vector<double> values);
  static Tensor row(std::vector<double> values);

  const std::vector<int>& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

  // Rank-2 view; rank-1 counts as a single row, scalars as 1x1.
  int rows() const;
  int cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& at(int64_t i) { return data_[static_cast<size_t>(i)]; }
  double at(int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols() + c]; }

  bool all_finite() const;
  void fill(double v);

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// out = transpose of 2-D tensor
Tensor transpose(const Tensor& m);

}  // namespace flowsense::neural
