#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "reid/common.hpp"

namespace reid {

using Scalar = double;
using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major n-d array. The buffer is shared between views (reshape),
// and tensors that entered an autodiff graph are treated as immutable.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Scalar v);
  static Tensor scalar(Scalar v) { return full({1}, v); }
  static Tensor from(std::vector<Scalar> data, Shape shape);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const;
  int64_t numel() const { return numel_; }

  Scalar* data() { return data_->data(); }
  const Scalar* data() const { return data_->data(); }
  Scalar item() const;

  // Shares the underlying buffer.
  Tensor reshaped(Shape shape) const;
  Tensor clone() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

 private:
  Shape shape_;
  int64_t numel_ = 0;
  std::shared_ptr<std::vector<Scalar>> data_;
};

}  // namespace reid
