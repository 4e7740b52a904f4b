#include "vilab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "vilab/errors.hpp"

namespace vilab {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kNeg: return "neg";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kBroadcastAddRows: return "broadcast_add_rows";
    case OpKind::kBroadcastAddChannels: return "broadcast_add_channels";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kSquare: return "square";
    case OpKind::kClamp: return "clamp";
    case OpKind::kSumAll: return "sum";
    case OpKind::kMeanAll: return "mean";
    case OpKind::kSumAxis: return "sum_axis";
    case OpKind::kLogSumExp: return "logsumexp";
    case OpKind::kLogSoftmaxRows: return "log_softmax_rows";
    case OpKind::kStackRows: return "stack_rows";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSlice: return "slice";
    case OpKind::kTakePerRow: return "take_per_row";
  }
  return "?";
}

const Tensor& Value::value() const { return tape->value(id); }

namespace {

Array stable_softplus(const Array& x) {
  return x.max(0.0) + (-x.abs()).exp().log1p();
}

Array sigmoid(const Array& x) {
  // exp(-|x|) never overflows; both branches share it.
  Array e = (-x.abs()).exp();
  return (x >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e));
}

void check_same_tape(Value a, Value b) {
  if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape)
    throw ValidationError("operands belong to different tapes");
}

}  // namespace

Value make_op(Tape& t, OpKind op, std::vector<int> inputs, Tensor val,
              double a = 0, double b = 0, int axis = -1,
              Eigen::Index offset = 0, Eigen::Index len = 0,
              std::vector<int> labels = {}) {
  Tape::Node n;
  n.op = op;
  n.val = std::move(val);
  n.inputs = std::move(inputs);
  n.a = a;
  n.b = b;
  n.axis = axis;
  n.offset = offset;
  n.len = len;
  n.labels = std::move(labels);
  return t.push(std::move(n));
}

Value Tape::push(Node n) {
  int id = static_cast<int>(nodes_.size());
  if (!n.val.all_finite())
    throw NumericError("non-finite value produced at node #" +
                       std::to_string(id) + " (" + op_name(n.op) +
                       (n.name.empty() ? std::string() : " '" + n.name + "'") +
                       ")");
  nodes_.push_back(std::move(n));
  has_grads_ = false;
  return Value{this, id};
}

Value Tape::leaf(Tensor v, std::string name) {
  Node n;
  n.op = OpKind::kLeaf;
  n.val = std::move(v);
  n.name = std::move(name);
  return push(std::move(n));
}

Value Tape::constant(Tensor v, std::string name) {
  Node n;
  n.op = OpKind::kConstant;
  n.val = std::move(v);
  n.name = std::move(name);
  return push(std::move(n));
}

Tensor Tape::grad(Value v) const {
  if (!has_grads_) throw ValidationError("grad() before backward()");
  if (v.tape != this) throw ValidationError("value from another tape");
  const Array& g = grads_[static_cast<size_t>(v.id)];
  const Tensor& val = nodes_[static_cast<size_t>(v.id)].val;
  if (g.size() == 0) return Tensor::zeros(val.shape());
  return Tensor(val.shape(), g);
}

void Tape::backward(Value out) {
  if (out.tape != this) throw ValidationError("value from another tape");
  if (value(out.id).numel() != 1)
    throw ValidationError("backward requires a scalar output, got " +
                          shape_str(value(out.id).shape()));
  grads_.assign(nodes_.size(), Array());
  grads_[static_cast<size_t>(out.id)] = Array::Ones(1);
  for (int i = out.id; i >= 0; --i) backprop_node(i);
  has_grads_ = true;
}

namespace {

// Accumulates `full` into the gradient of input node `target`, collapsing to
// a scalar when the input was broadcast.
void acc_broadcast(Array& gt, Eigen::Index target_numel, const Array& full) {
  if (gt.size() == 0) gt = Array::Zero(target_numel);
  if (target_numel == 1 && full.size() > 1)
    gt[0] += full.sum();
  else
    gt += full;
}

}  // namespace

void Tape::backprop_node(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const Array& g = grads_[static_cast<size_t>(id)];
  if (g.size() == 0) return;  // no path from the output

  auto in_val = [&](int slot) -> const Tensor& {
    return nodes_[static_cast<size_t>(n.inputs[static_cast<size_t>(slot)])].val;
  };
  auto acc = [&](int slot, const Array& contribution) {
    int t = n.inputs[static_cast<size_t>(slot)];
    Array& gt = grads_[static_cast<size_t>(t)];
    acc_broadcast(gt, nodes_[static_cast<size_t>(t)].val.numel(), contribution);
  };
  auto bval = [&](int slot) -> Array {
    // input value expanded to the output's size (scalar broadcast)
    const Tensor& v = in_val(slot);
    if (v.numel() == 1 && n.val.numel() > 1)
      return Array::Constant(n.val.numel(), v.at(0));
    return v.data();
  };

  switch (n.op) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
      break;
    case OpKind::kAdd:
      acc(0, g);
      acc(1, g);
      break;
    case OpKind::kSub:
      acc(0, g);
      acc(1, -g);
      break;
    case OpKind::kMul:
      acc(0, g * bval(1));
      acc(1, g * bval(0));
      break;
    case OpKind::kDiv: {
      Array bb = bval(1);
      acc(0, g / bb);
      acc(1, -g * bval(0) / bb.square());
      break;
    }
    case OpKind::kNeg:
      acc(0, -g);
      break;
    case OpKind::kScale:
      acc(0, n.a * g);
      break;
    case OpKind::kAddScalar:
      acc(0, g);
      break;
    case OpKind::kMatMul: {
      const Tensor& a = in_val(0);
      const Tensor& b = in_val(1);
      Eigen::Map<const RowMat> ga(g.data(), n.val.dim(0), n.val.dim(1));
      Array da(a.numel()), db(b.numel());
      Eigen::Map<RowMat>(da.data(), a.dim(0), a.dim(1)) =
          ga * b.as_matrix().transpose();
      Eigen::Map<RowMat>(db.data(), b.dim(0), b.dim(1)) =
          a.as_matrix().transpose() * ga;
      acc(0, da);
      acc(1, db);
      break;
    }
    case OpKind::kBroadcastAddRows: {
      const Tensor& m = in_val(0);
      Eigen::Map<const RowMat> gm(g.data(), m.dim(0), m.dim(1));
      acc(0, g);
      acc(1, Array(gm.colwise().sum().transpose().array()));
      break;
    }
    case OpKind::kBroadcastAddChannels: {
      const Tensor& x = in_val(0);
      const Eigen::Index B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
      Array gb = Array::Zero(C);
      for (Eigen::Index bb = 0; bb < B; ++bb)
        for (Eigen::Index c = 0; c < C; ++c)
          gb[c] += g.segment((bb * C + c) * HW, HW).sum();
      acc(0, g);
      acc(1, gb);
      break;
    }
    case OpKind::kConv2d: {
      const Tensor& x = in_val(0);
      const Tensor& k = in_val(1);
      const Eigen::Index B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
      const Eigen::Index Co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
      const Eigen::Index Ho = H - kh + 1, Wo = W - kw + 1;
      Array gx = Array::Zero(x.numel());
      Array gk = Array::Zero(k.numel());
      const Array& xd = x.data();
      const Array& kd = k.data();
      for (Eigen::Index bb = 0; bb < B; ++bb)
        for (Eigen::Index co = 0; co < Co; ++co)
          for (Eigen::Index i = 0; i < Ho; ++i)
            for (Eigen::Index j = 0; j < Wo; ++j) {
              const double go = g[((bb * Co + co) * Ho + i) * Wo + j];
              for (Eigen::Index ci = 0; ci < Ci; ++ci)
                for (Eigen::Index u = 0; u < kh; ++u)
                  for (Eigen::Index v = 0; v < kw; ++v) {
                    const Eigen::Index xi =
                        ((bb * Ci + ci) * H + i + u) * W + (j + v);
                    const Eigen::Index ki = ((co * Ci + ci) * kh + u) * kw + v;
                    gx[xi] += go * kd[ki];
                    gk[ki] += go * xd[xi];
                  }
            }
      acc(0, gx);
      acc(1, gk);
      break;
    }
    case OpKind::kRelu:
      acc(0, (in_val(0).data() > 0.0).select(g, 0.0));
      break;
    case OpKind::kTanh:
      acc(0, g * (1.0 - n.val.data().square()));
      break;
    case OpKind::kExp:
      acc(0, g * n.val.data());
      break;
    case OpKind::kLog:
      acc(0, g / in_val(0).data());
      break;
    case OpKind::kSoftplus:
      acc(0, g * sigmoid(in_val(0).data()));
      break;
    case OpKind::kSquare:
      acc(0, 2.0 * g * in_val(0).data());
      break;
    case OpKind::kClamp: {
      const Array& x = in_val(0).data();
      acc(0, (x >= n.a && x <= n.b).select(g, 0.0));
      break;
    }
    case OpKind::kSumAll:
      acc(0, Array::Constant(in_val(0).numel(), g[0]));
      break;
    case OpKind::kMeanAll:
      acc(0, Array::Constant(in_val(0).numel(),
                             g[0] / static_cast<double>(in_val(0).numel())));
      break;
    case OpKind::kSumAxis: {
      const Tensor& x = in_val(0);
      const Eigen::Index R = x.dim(0), C = x.dim(1);
      Array gx(x.numel());
      Eigen::Map<RowMat> gm(gx.data(), R, C);
      if (n.axis == 0)
        gm = Eigen::Map<const Eigen::RowVectorXd>(g.data(), C).replicate(R, 1);
      else
        gm = Eigen::Map<const Eigen::VectorXd>(g.data(), R).replicate(1, C);
      acc(0, gx);
      break;
    }
    case OpKind::kLogSumExp: {
      const Tensor& x = in_val(0);
      if (n.axis < 0) {
        acc(0, g[0] * (x.data() - n.val.at(0)).exp());
      } else {
        const Eigen::Index R = x.dim(0), C = x.dim(1);
        Array gx(x.numel());
        for (Eigen::Index r = 0; r < R; ++r)
          for (Eigen::Index c = 0; c < C; ++c) {
            const Eigen::Index o = n.axis == 1 ? r : c;
            gx[r * C + c] = g[o] * std::exp(x.at(r * C + c) - n.val.at(o));
          }
        acc(0, gx);
      }
      break;
    }
    case OpKind::kLogSoftmaxRows: {
      const Tensor& x = in_val(0);
      const Eigen::Index R = x.dim(0), C = x.dim(1);
      Array gx(x.numel());
      for (Eigen::Index r = 0; r < R; ++r) {
        const double rowsum = g.segment(r * C, C).sum();
        gx.segment(r * C, C) =
            g.segment(r * C, C) -
            n.val.data().segment(r * C, C).exp() * rowsum;
      }
      acc(0, gx);
      break;
    }
    case OpKind::kStackRows: {
      const Eigen::Index N = n.val.dim(1);
      for (size_t m = 0; m < n.inputs.size(); ++m)
        acc(static_cast<int>(m), g.segment(static_cast<Eigen::Index>(m) * N, N));
      break;
    }
    case OpKind::kReshape:
      acc(0, g);
      break;
    case OpKind::kSlice: {
      Array gx = Array::Zero(in_val(0).numel());
      gx.segment(n.offset, n.len) = g;
      acc(0, gx);
      break;
    }
    case OpKind::kTakePerRow: {
      const Tensor& x = in_val(0);
      const Eigen::Index C = x.dim(1);
      Array gx = Array::Zero(x.numel());
      for (Eigen::Index r = 0; r < x.dim(0); ++r)
        gx[r * C + n.labels[static_cast<size_t>(r)]] += g[r];
      acc(0, gx);
      break;
    }
  }
}

// ---- op constructors -------------------------------------------------------

namespace {

// elementwise binary with scalar broadcast: shapes equal, or one side has a
// single element
void check_binary_shapes(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b) || a.numel() == 1 || b.numel() == 1) return;
  throw ValidationError(std::string(op) + ": shape mismatch " +
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor binary_apply(const Tensor& a, const Tensor& b,
                    const std::function<Array(const Array&, const Array&)>& f) {
  if (a.same_shape(b)) return Tensor(a.shape(), f(a.data(), b.data()));
  if (a.numel() == 1)
    return Tensor(b.shape(), f(Array::Constant(b.numel(), a.at(0)), b.data()));
  return Tensor(a.shape(), f(a.data(), Array::Constant(a.numel(), b.at(0))));
}

}  // namespace

Value add(Value a, Value b) {
  check_same_tape(a, b);
  check_binary_shapes(a.value(), b.value(), "add");
  Tensor out = binary_apply(a.value(), b.value(),
                            [](const Array& x, const Array& y) -> Array { return x + y; });
  return make_op(*a.tape, OpKind::kAdd, {a.id, b.id}, std::move(out));
}

Value sub(Value a, Value b) {
  check_same_tape(a, b);
  check_binary_shapes(a.value(), b.value(), "sub");
  Tensor out = binary_apply(a.value(), b.value(),
                            [](const Array& x, const Array& y) -> Array { return x - y; });
  return make_op(*a.tape, OpKind::kSub, {a.id, b.id}, std::move(out));
}

Value mul(Value a, Value b) {
  check_same_tape(a, b);
  check_binary_shapes(a.value(), b.value(), "mul");
  Tensor out = binary_apply(a.value(), b.value(),
                            [](const Array& x, const Array& y) -> Array { return x * y; });
  return make_op(*a.tape, OpKind::kMul, {a.id, b.id}, std::move(out));
}

Value div(Value a, Value b) {
  check_same_tape(a, b);
  check_binary_shapes(a.value(), b.value(), "div");
  Tensor out = binary_apply(a.value(), b.value(),
                            [](const Array& x, const Array& y) -> Array { return x / y; });
  return make_op(*a.tape, OpKind::kDiv, {a.id, b.id}, std::move(out));
}

Value neg(Value x) {
  return make_op(*x.tape, OpKind::kNeg, {x.id},
                 Tensor(x.value().shape(), -x.value().data()));
}

Value scale(Value x, double c) {
  return make_op(*x.tape, OpKind::kScale, {x.id},
                 Tensor(x.value().shape(), c * x.value().data()), c);
}

Value add_scalar(Value x, double c) {
  return make_op(*x.tape, OpKind::kAddScalar, {x.id},
                 Tensor(x.value().shape(), x.value().data() + c), c);
}

Value matmul(Value a, Value b) {
  check_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw ValidationError("matmul: incompatible shapes " +
                          shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  Array out(av.dim(0) * bv.dim(1));
  Eigen::Map<RowMat>(out.data(), av.dim(0), bv.dim(1)) =
      av.as_matrix() * bv.as_matrix();
  return make_op(*a.tape, OpKind::kMatMul, {a.id, b.id},
                 Tensor({av.dim(0), bv.dim(1)}, std::move(out)));
}

Value broadcast_add_rows(Value m, Value v) {
  check_same_tape(m, v);
  const Tensor& mv = m.value();
  const Tensor& vv = v.value();
  if (mv.rank() != 2 || vv.rank() != 1 || vv.dim(0) != mv.dim(1))
    throw ValidationError("broadcast_add_rows: shapes " + shape_str(mv.shape()) +
                          " + " + shape_str(vv.shape()));
  Array out(mv.numel());
  Eigen::Map<RowMat>(out.data(), mv.dim(0), mv.dim(1)) =
      mv.as_matrix().rowwise() +
      Eigen::Map<const Eigen::RowVectorXd>(vv.data().data(), vv.numel());
  return make_op(*m.tape, OpKind::kBroadcastAddRows, {m.id, v.id},
                 Tensor(mv.shape(), std::move(out)));
}

Value broadcast_add_channels(Value x, Value bias) {
  check_same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 4 || bv.rank() != 1 || bv.dim(0) != xv.dim(1))
    throw ValidationError("broadcast_add_channels: shapes " +
                          shape_str(xv.shape()) + " + " + shape_str(bv.shape()));
  const Eigen::Index B = xv.dim(0), C = xv.dim(1), HW = xv.dim(2) * xv.dim(3);
  Array out = xv.data();
  for (Eigen::Index bb = 0; bb < B; ++bb)
    for (Eigen::Index c = 0; c < C; ++c)
      out.segment((bb * C + c) * HW, HW) += bv.at(c);
  return make_op(*x.tape, OpKind::kBroadcastAddChannels, {x.id, bias.id},
                 Tensor(xv.shape(), std::move(out)));
}

Value conv2d(Value x, Value kernel) {
  check_same_tape(x, kernel);
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  if (xv.rank() != 4 || kv.rank() != 4 || kv.dim(1) != xv.dim(1))
    throw ValidationError("conv2d: shapes " + shape_str(xv.shape()) + " * " +
                          shape_str(kv.shape()));
  const Eigen::Index B = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const Eigen::Index Co = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
  if (kh > H || kw > W)
    throw ValidationError("conv2d: kernel larger than input");
  const Eigen::Index Ho = H - kh + 1, Wo = W - kw + 1;
  Array out = Array::Zero(B * Co * Ho * Wo);
  const Array& xd = xv.data();
  const Array& kd = kv.data();
  for (Eigen::Index bb = 0; bb < B; ++bb)
    for (Eigen::Index co = 0; co < Co; ++co)
      for (Eigen::Index i = 0; i < Ho; ++i)
        for (Eigen::Index j = 0; j < Wo; ++j) {
          double s = 0;
          for (Eigen::Index ci = 0; ci < Ci; ++ci)
            for (Eigen::Index u = 0; u < kh; ++u)
              for (Eigen::Index v = 0; v < kw; ++v)
                s += xd[((bb * Ci + ci) * H + i + u) * W + (j + v)] *
                     kd[((co * Ci + ci) * kh + u) * kw + v];
          out[((bb * Co + co) * Ho + i) * Wo + j] = s;
        }
  return make_op(*x.tape, OpKind::kConv2d, {x.id, kernel.id},
                 Tensor({B, Co, Ho, Wo}, std::move(out)));
}

Value relu(Value x) {
  return make_op(*x.tape, OpKind::kRelu, {x.id},
                 Tensor(x.value().shape(), x.value().data().max(0.0)));
}

Value tanh(Value x) {
  return make_op(*x.tape, OpKind::kTanh, {x.id},
                 Tensor(x.value().shape(), x.value().data().tanh()));
}

Value exp(Value x) {
  return make_op(*x.tape, OpKind::kExp, {x.id},
                 Tensor(x.value().shape(), x.value().data().exp()));
}

Value log(Value x) {
  if ((x.value().data() <= 0.0).any())
    throw NumericError("log of non-positive value at node #" +
                       std::to_string(x.id));
  return make_op(*x.tape, OpKind::kLog, {x.id},
                 Tensor(x.value().shape(), x.value().data().log()));
}

Value softplus(Value x) {
  return make_op(*x.tape, OpKind::kSoftplus, {x.id},
                 Tensor(x.value().shape(), stable_softplus(x.value().data())));
}

Value square(Value x) {
  return make_op(*x.tape, OpKind::kSquare, {x.id},
                 Tensor(x.value().shape(), x.value().data().square()));
}

Value clamp(Value x, double lo, double hi) {
  if (!(lo <= hi)) throw ValidationError("clamp: lo > hi");
  return make_op(*x.tape, OpKind::kClamp, {x.id},
                 Tensor(x.value().shape(), x.value().data().max(lo).min(hi)),
                 lo, hi);
}

Value sum(Value x) {
  return make_op(*x.tape, OpKind::kSumAll, {x.id},
                 Tensor::scalar(x.value().data().sum()));
}

Value mean(Value x) {
  return make_op(*x.tape, OpKind::kMeanAll, {x.id},
                 Tensor::scalar(x.value().data().mean()));
}

Value sum_axis(Value x, int axis) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || (axis != 0 && axis != 1))
    throw ValidationError("sum_axis: rank-2 tensor and axis in {0,1} required");
  Array out;
  if (axis == 0)
    out = xv.as_matrix().colwise().sum().transpose().array();
  else
    out = xv.as_matrix().rowwise().sum().array();
  return make_op(*x.tape, OpKind::kSumAxis, {x.id},
                 Tensor({axis == 0 ? xv.dim(1) : xv.dim(0)}, std::move(out)),
                 0, 0, axis);
}

namespace {

// max-shift stabilized: logsumexp(x) = m + log(sum(exp(x - m)))
double lse_of(const double* p, Eigen::Index n, Eigen::Index stride) {
  double m = p[0];
  for (Eigen::Index i = 1; i < n; ++i) m = std::max(m, p[i * stride]);
  double s = 0;
  for (Eigen::Index i = 0; i < n; ++i) s += std::exp(p[i * stride] - m);
  return m + std::log(s);
}

}  // namespace

Value logsumexp(Value x) {
  const Array& d = x.value().data();
  return make_op(*x.tape, OpKind::kLogSumExp, {x.id},
                 Tensor::scalar(lse_of(d.data(), d.size(), 1)));
}

Value logsumexp(Value x, int axis) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || (axis != 0 && axis != 1))
    throw ValidationError("logsumexp: rank-2 tensor and axis in {0,1} required");
  const Eigen::Index R = xv.dim(0), C = xv.dim(1);
  const Eigen::Index n = axis == 1 ? R : C;
  Array out(n);
  if (axis == 1)
    for (Eigen::Index r = 0; r < R; ++r)
      out[r] = lse_of(xv.data().data() + r * C, C, 1);
  else
    for (Eigen::Index c = 0; c < C; ++c)
      out[c] = lse_of(xv.data().data() + c, R, C);
  return make_op(*x.tape, OpKind::kLogSumExp, {x.id},
                 Tensor({n}, std::move(out)), 0, 0, axis);
}

Value log_softmax_rows(Value x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2)
    throw ValidationError("log_softmax_rows: rank-2 tensor required");
  const Eigen::Index R = xv.dim(0), C = xv.dim(1);
  Array out(xv.numel());
  for (Eigen::Index r = 0; r < R; ++r) {
    const double lse = lse_of(xv.data().data() + r * C, C, 1);
    out.segment(r * C, C) = xv.data().segment(r * C, C) - lse;
  }
  return make_op(*x.tape, OpKind::kLogSoftmaxRows, {x.id},
                 Tensor(xv.shape(), std::move(out)));
}

Value stack_rows(const std::vector<Value>& rows) {
  if (rows.empty()) throw ValidationError("stack_rows: no inputs");
  Tape& t = *rows[0].tape;
  const Eigen::Index N = rows[0].value().numel();
  std::vector<int> ids;
  Array out(static_cast<Eigen::Index>(rows.size()) * N);
  for (size_t m = 0; m < rows.size(); ++m) {
    check_same_tape(rows[0], rows[m]);
    const Tensor& v = rows[m].value();
    if (v.rank() != 1 || v.numel() != N)
      throw ValidationError("stack_rows: inputs must be rank-1 of equal length");
    out.segment(static_cast<Eigen::Index>(m) * N, N) = v.data();
    ids.push_back(rows[m].id);
  }
  return make_op(t, OpKind::kStackRows, std::move(ids),
                 Tensor({static_cast<Eigen::Index>(rows.size()), N}, std::move(out)));
}

Value reshape(Value x, Shape shape) {
  if (shape_numel(shape) != x.value().numel())
    throw ValidationError("reshape: " + shape_str(x.value().shape()) + " -> " +
                          shape_str(shape) + " changes element count");
  return make_op(*x.tape, OpKind::kReshape, {x.id},
                 Tensor(std::move(shape), x.value().data()));
}

Value slice(Value x, Eigen::Index offset, Eigen::Index len) {
  if (offset < 0 || len <= 0 || offset + len > x.value().numel())
    throw ValidationError("slice: range [" + std::to_string(offset) + ", " +
                          std::to_string(offset + len) + ") out of bounds for " +
                          std::to_string(x.value().numel()) + " elements");
  return make_op(*x.tape, OpKind::kSlice, {x.id},
                 Tensor({len}, x.value().data().segment(offset, len)), 0, 0, -1,
                 offset, len);
}

Value take_per_row(Value x, const std::vector<int>& labels) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2)
    throw ValidationError("take_per_row: rank-2 tensor required");
  const Eigen::Index R = xv.dim(0), C = xv.dim(1);
  if (static_cast<Eigen::Index>(labels.size()) != R)
    throw ValidationError("take_per_row: got " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(R) + " rows");
  Array out(R);
  for (Eigen::Index r = 0; r < R; ++r) {
    const int c = labels[static_cast<size_t>(r)];
    if (c < 0 || c >= C)
      throw ValidationError("take_per_row: label " + std::to_string(c) +
                            " out of range [0, " + std::to_string(C) + ")");
    out[r] = xv.at(r * C + c);
  }
  return make_op(*x.tape, OpKind::kTakePerRow, {x.id},
                 Tensor({R}, std::move(out)), 0, 0, -1, 0, 0, labels);
}

}  // namespace vilab
