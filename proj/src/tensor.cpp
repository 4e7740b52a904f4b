#include "vilab/tensor.hpp"

#include <sstream>

namespace vilab {

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out << 'x';
    out << s[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, Array data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (Eigen::Index d : shape_) {
    if (d <= 0)
      throw ValidationError("tensor shape has non-positive dimension " +
                            shape_str(shape_));
  }
  if (shape_numel(shape_) != data_.size())
    throw ValidationError("tensor shape " + shape_str(shape_) +
                          " does not match data length " +
                          std::to_string(data_.size()));
}

Tensor Tensor::zeros(Shape shape) {
  Eigen::Index n = shape_numel(shape);
  return Tensor(std::move(shape), Array::Zero(n));
}

Tensor Tensor::full(Shape shape, Scalar v) {
  Eigen::Index n = shape_numel(shape);
  return Tensor(std::move(shape), Array::Constant(n, v));
}

Tensor Tensor::vector(const Array& v) {
  return Tensor({v.size()}, v);
}

Tensor Tensor::vector(std::initializer_list<Scalar> v) {
  const Eigen::Index n = static_cast<Eigen::Index>(v.size());
  Array a(n);
  Eigen::Index i = 0;
  for (Scalar x : v) a[i++] = x;
  return Tensor({n}, std::move(a));
}

Tensor Tensor::matrix(Eigen::Index rows, Eigen::Index cols, Array data) {
  return Tensor({rows, cols}, std::move(data));
}

Scalar Tensor::as_scalar() const {
  if (numel() != 1)
    throw ValidationError("tensor " + shape_str(shape_) + " is not a scalar");
  return data_[0];
}

Eigen::Map<const RowMat> Tensor::as_matrix() const {
  if (rank() != 2)
    throw ValidationError("tensor " + shape_str(shape_) + " is not rank-2");
  return {data_.data(), shape_[0], shape_[1]};
}

Eigen::Map<RowMat> Tensor::as_matrix() {
  if (rank() != 2)
    throw ValidationError("tensor " + shape_str(shape_) + " is not rank-2");
  return {data_.data(), shape_[0], shape_[1]};
}

}  // namespace vilab
