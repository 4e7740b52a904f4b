#pragma once

#include <string>
#include <variant>
#include <vector>

#include "vilab/gaussian.hpp"
#include "vilab/tape.hpp"

namespace vilab {

enum class Activation { none, relu, tanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& s);

struct DenseSpec {
  Eigen::Index out = 0;
  Activation act = Activation::none;
};
struct ConvSpec {
  Eigen::Index channels = 0;
  Eigen::Index kernel = 0;
  Activation act = Activation::none;
};
struct FlattenSpec {};

using LayerSpec = std::variant<DenseSpec, ConvSpec, FlattenSpec>;

struct LikelihoodSpec {
  enum class Kind { categorical, gaussian };
  Kind kind = Kind::categorical;
  Eigen::Index classes = 0;  // categorical: output dim == classes
  double tau2 = 1.0;         // gaussian observation noise (fixed, not learned)
};

/// Network architecture: input shape ({features} or {channels, height,
/// width}), a chain of layers, and the output likelihood.
struct ArchSpec {
  Shape input;
  std::vector<LayerSpec> layers;
  LikelihoodSpec likelihood;

  /// Checks the layer chain and likelihood; returns the final output dim.
  Eigen::Index validate() const;
  Eigen::Index param_count() const;

  bool operator==(const ArchSpec& o) const;

  /// Canonical one-line description, parseable by arch_from_string.
  std::string to_string() const;
};

ArchSpec arch_from_string(const std::string& s);

/// Named desk-scale presets: "mlp-2x64" (dense 64 relu, dense 64 relu,
/// dense C) and "tinyconv" (conv 8@3x3 relu, flatten, dense C).
ArchSpec make_preset(const std::string& name, Shape input, Eigen::Index classes);

/// Flattened parameter layout: one global theta vector, one block per
/// weight/bias tensor in layer order.
struct ParamBlock {
  Eigen::Index offset;
  Shape shape;
};
std::vector<ParamBlock> param_layout(const ArchSpec& arch);

struct Batch {
  Tensor inputs;            // [B x flat-input]
  std::vector<int> labels;  // categorical targets
  Tensor targets;           // gaussian targets [B x K]

  Eigen::Index size() const { return inputs.dim(0); }
};

/// Logits (or regression outputs) for a full batch under one shared theta.
Value network_outputs(Tape& tape, const ArchSpec& arch, Value theta,
                      Value inputs);

/// Per-example log p(y_i | theta, x_i), length B.
Value log_likelihood(Tape& tape, const ArchSpec& arch, Value theta,
                     const Batch& batch);

/// No-grad convenience wrapper over a private tape.
Array log_likelihood(const ArchSpec& arch, const Array& theta, const Batch& batch);

/// log predictive probabilities log( (1/M) sum_m p(y=c | theta_m, x) ) as a
/// [B x C] tensor, computed per class as logsumexp_m(log p_m) - ln M.
/// Categorical likelihoods only.
Tensor predictive_log_probs(const ArchSpec& arch, const MeanFieldGaussian& q,
                            const Batch& batch, int M, const CounterRng& rng);

}  // namespace vilab
