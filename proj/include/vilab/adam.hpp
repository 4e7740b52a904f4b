#pragma once

#include <cmath>

#include "vilab/errors.hpp"
#include "vilab/tensor.hpp"

namespace vilab {

/// First/second moment accumulators for Adam.
struct AdamState {
  Array m;
  Array v;
  long t = 0;

  static AdamState zeros(Eigen::Index n) {
    return {Array::Zero(n), Array::Zero(n), 0};
  }
};

/// Standard Adam update with bias correction:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   p <- p - lr * m-hat / (sqrt(v-hat) + eps)
inline void adam_step(Array& params, const Array& grad, AdamState& state,
                      double lr, double beta1, double beta2, double eps) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw ValidationError("adam_step: size mismatch");
  state.t += 1;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.square();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  params -= lr * (state.m / c1) / ((state.v / c2).sqrt() + eps);
}

}  // namespace vilab
