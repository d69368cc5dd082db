#include "flowsense/tensor.hpp"

#include <cmath>
#include <sstream>

#include "flowsense/errors.hpp"

namespace flowsense::neural {

namespace {

int64_t shape_product(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ValidationError("tensor dimension must be non-negative");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_product(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_product(shape_) != static_cast<int64_t>(data_.size())) {
    throw ValidationError("tensor value count " + std::to_string(data_.size()) +
                          " does not match shape " + shape_str());
  }
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::row(std::vector<double> values) {
  int n = static_cast<int>(values.size());
  return Tensor({n}, std::move(values));
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

int Tensor::rows() const {
  if (shape_.size() >= 3) throw ValidationError("rank>2 tensor has no rows()");
  return shape_.size() == 2 ? shape_[0] : 1;
}

int Tensor::cols() const {
  if (shape_.size() >= 3) throw ValidationError("rank>2 tensor has no cols()");
  if (shape_.empty()) return 1;
  return shape_.size() == 2 ? shape_[1] : shape_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double v) { data_.assign(data_.size(), v); }

Tensor transpose(const Tensor& m) {
  const int r = m.rows();
  const int c = m.cols();
  Tensor out({c, r});
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) out.at(j, i) = m.at(i, j);
  }
  return out;
}

}  // namespace flowsense::neural
