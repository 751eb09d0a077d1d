#include "reid/tensor.hpp"

#include <cmath>
#include <sstream>

namespace reid {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  numel_ = shape_numel(shape_);
  data_ = std::make_shared<std::vector<Scalar>>(numel_, 0.0);
}

Tensor Tensor::full(Shape shape, Scalar v) {
  Tensor t(std::move(shape));
  std::fill(t.data_->begin(), t.data_->end(), v);
  return t;
}

Tensor Tensor::from(std::vector<Scalar> data, Shape shape) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.numel_ = shape_numel(t.shape_);
  if (static_cast<int64_t>(data.size()) != t.numel_)
    throw ShapeError("data size " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(t.shape_));
  t.data_ = std::make_shared<std::vector<Scalar>>(std::move(data));
  return t;
}

int Tensor::dim(int i) const {
  int n = ndim();
  if (i < 0) i += n;
  if (i < 0 || i >= n) throw ShapeError("dim index out of range for " + shape_str(shape_));
  return shape_[i];
}

Scalar Tensor::item() const {
  if (numel_ != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_str(shape_));
  return (*data_)[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel_)
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.numel_ = numel_;
  t.data_ = data_;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.numel_ = numel_;
  t.data_ = std::make_shared<std::vector<Scalar>>(*data_);
  return t;
}

bool Tensor::all_finite() const {
  for (Scalar v : *data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace reid
