#pragma once

#include <Eigen/Dense>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "vilab/errors.hpp"

namespace vilab {

using Scalar = double;
using Array = Eigen::ArrayXd;
using Shape = std::vector<Eigen::Index>;
using RowMat =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Index shape_numel(const Shape& s) {
  Eigen::Index n = 1;
  for (Eigen::Index d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s);

/// Dense n-dimensional array of doubles, flat row-major storage.
/// A rank-0 tensor (empty shape) is a scalar with one element.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, Array data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, Scalar v);
  static Tensor scalar(Scalar v) { return Tensor({}, Array::Constant(1, v)); }
  static Tensor vector(const Array& v);
  static Tensor vector(std::initializer_list<Scalar> v);
  static Tensor matrix(Eigen::Index rows, Eigen::Index cols, Array data);

  const Shape& shape() const { return shape_; }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(shape_.size()); }
  Eigen::Index numel() const { return data_.size(); }
  Eigen::Index dim(int i) const { return shape_[static_cast<size_t>(i)]; }

  const Array& data() const { return data_; }
  Array& data() { return data_; }

  Scalar at(Eigen::Index flat) const { return data_[flat]; }
  Scalar as_scalar() const;

  /// Rank-2 view mapped onto the flat row-major buffer.
  Eigen::Map<const RowMat> as_matrix() const;
  Eigen::Map<RowMat> as_matrix();

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const { return data_.isFinite().all(); }

 private:
  Shape shape_;
  Array data_;
};

}  // namespace vilab
