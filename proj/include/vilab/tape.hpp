#pragma once

#include <string>
#include <vector>

#include "vilab/tensor.hpp"

namespace vilab {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Value {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  explicit operator bool() const { return tape != nullptr && id >= 0; }
};

enum class OpKind {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kScale,        // x * c
  kAddScalar,    // x + c
  kMatMul,
  kBroadcastAddRows,      // [R x C] + [C]
  kBroadcastAddChannels,  // [B x C x H x W] + [C]
  kConv2d,                // valid convolution, stride 1
  kRelu,
  kTanh,
  kExp,
  kLog,
  kSoftplus,
  kSquare,
  kClamp,
  kSumAll,
  kMeanAll,
  kSumAxis,        // rank-2, axis 0 or 1
  kLogSumExp,      // axis = -1: whole tensor -> scalar; else rank-2 along axis
  kLogSoftmaxRows, // rank-2, along axis 1
  kStackRows,      // M vectors [N] -> [M x N]
  kReshape,
  kSlice,          // contiguous range of the flat buffer -> rank-1
  kTakePerRow,     // [R x C], labels[R] -> [R]
};

const char* op_name(OpKind k);

/// Reverse-mode autodiff tape, define-by-run: every op computes its forward
/// value at construction and records what backward needs. Rebuilt per
/// minibatch. Forward values are validated to be finite as they are produced;
/// a non-finite intermediate raises NumericError naming the offending node.
///
/// Tensors on the tape are immutable once created. backward() may be called
/// on any single-element node; gradients accumulate over all paths and are
/// retrievable per node with grad().
class Tape {
 public:
  Value leaf(Tensor v, std::string name = "");
  Value constant(Tensor v, std::string name = "");

  const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].val; }

  /// Seeds d(out)/d(out) = 1 and sweeps the tape in reverse creation order.
  /// Throws ValidationError if out is not a single-element tensor.
  void backward(Value out);

  /// Gradient of the last backward() output w.r.t. this node.
  Tensor grad(Value v) const;

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind op;
    Tensor val;
    std::vector<int> inputs;
    double a = 0, b = 0;          // op parameters (scale factor, clamp bounds, ...)
    int axis = -1;
    Eigen::Index offset = 0, len = 0;  // slice
    std::vector<int> labels;           // take_per_row
    std::string name;
  };

  Value push(Node n);
  const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
  void backprop_node(int id);
  Array& grad_buf(int id) { return grads_[static_cast<size_t>(id)]; }

  std::vector<Node> nodes_;
  std::vector<Array> grads_;
  bool has_grads_ = false;

  friend Value make_op(Tape& t, OpKind op, std::vector<int> inputs, Tensor val,
                       double a, double b, int axis, Eigen::Index offset,
                       Eigen::Index len, std::vector<int> labels);
};

// ---- primitive suite (free functions; result lives on the inputs' tape) ----

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value div(Value a, Value b);
Value neg(Value x);
Value scale(Value x, double c);
Value add_scalar(Value x, double c);
Value matmul(Value a, Value b);
Value broadcast_add_rows(Value m, Value v);
Value broadcast_add_channels(Value x, Value bias);
Value conv2d(Value x, Value kernel);
Value relu(Value x);
Value tanh(Value x);
Value exp(Value x);
Value log(Value x);
Value softplus(Value x);
Value square(Value x);
Value clamp(Value x, double lo, double hi);
Value sum(Value x);
Value mean(Value x);
Value sum_axis(Value x, int axis);
Value logsumexp(Value x);            // over the whole tensor
Value logsumexp(Value x, int axis);  // rank-2, along rows (axis 1) or columns (axis 0)
Value log_softmax_rows(Value x);
Value stack_rows(const std::vector<Value>& rows);
Value reshape(Value x, Shape shape);
Value slice(Value x, Eigen::Index offset, Eigen::Index len);
Value take_per_row(Value x, const std::vector<int>& labels);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }
inline Value operator/(Value a, Value b) { return div(a, b); }
inline Value operator-(Value x) { return neg(x); }

}  // namespace vilab
