#include "vilab/model.hpp"

#include <cmath>
#include <sstream>

#include "vilab/errors.hpp"

namespace vilab {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation activation_from_name(const std::string& s) {
  if (s == "none") return Activation::none;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ValidationError("unknown activation '" + s + "'");
}

namespace {

Value apply_activation(Value x, Activation a) {
  switch (a) {
    case Activation::none: return x;
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh(x);
  }
  return x;
}

// Walks the layer chain calling f(layer, in_shape) before advancing the shape.
template <typename F>
Eigen::Index walk_layers(const ArchSpec& arch, F&& f) {
  Shape cur = arch.input;
  if (cur.empty()) throw ValidationError("arch: empty input shape");
  for (Eigen::Index d : cur)
    if (d <= 0) throw ValidationError("arch: non-positive input dimension");
  for (const LayerSpec& layer : arch.layers) {
    f(layer, cur);
    if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
      if (cur.size() != 1)
        throw ValidationError(
            "arch: dense layer needs flat input; insert flatten before it");
      if (dense->out <= 0) throw ValidationError("arch: dense out dim <= 0");
      cur = {dense->out};
    } else if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      if (cur.size() != 3)
        throw ValidationError("arch: conv layer needs [c,h,w] input");
      if (conv->channels <= 0 || conv->kernel <= 0)
        throw ValidationError("arch: conv channels/kernel <= 0");
      if (conv->kernel > cur[1] || conv->kernel > cur[2])
        throw ValidationError("arch: conv kernel larger than input");
      cur = {conv->channels, cur[1] - conv->kernel + 1, cur[2] - conv->kernel + 1};
    } else {
      cur = {shape_numel(cur)};
    }
  }
  if (cur.size() != 1)
    throw ValidationError("arch: output must be flat; insert flatten");
  return cur[0];
}

}  // namespace

Eigen::Index ArchSpec::validate() const {
  const Eigen::Index out = walk_layers(*this, [](const LayerSpec&, const Shape&) {});
  if (likelihood.kind == LikelihoodSpec::Kind::categorical) {
    if (likelihood.classes < 2)
      throw ValidationError("arch: categorical likelihood needs >= 2 classes");
    if (out != likelihood.classes)
      throw ValidationError("arch: output dim " + std::to_string(out) +
                            " != classes " + std::to_string(likelihood.classes));
  } else {
    if (!(likelihood.tau2 > 0))
      throw ValidationError("arch: gaussian tau2 must be positive");
  }
  return out;
}

std::vector<ParamBlock> param_layout(const ArchSpec& arch) {
  std::vector<ParamBlock> blocks;
  Eigen::Index offset = 0;
  auto push = [&](Shape s) {
    const Eigen::Index n = shape_numel(s);
    blocks.push_back({offset, std::move(s)});
    offset += n;
  };
  walk_layers(arch, [&](const LayerSpec& layer, const Shape& in) {
    if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
      push({in[0], dense->out});
      push({dense->out});
    } else if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      push({conv->channels, in[0], conv->kernel, conv->kernel});
      push({conv->channels});
    }
  });
  return blocks;
}

Eigen::Index ArchSpec::param_count() const {
  Eigen::Index n = 0;
  for (const ParamBlock& b : param_layout(*this)) n += shape_numel(b.shape);
  return n;
}

bool ArchSpec::operator==(const ArchSpec& o) const {
  return to_string() == o.to_string();
}

std::string ArchSpec::to_string() const {
  std::ostringstream out;
  out << "input=";
  for (size_t i = 0; i < input.size(); ++i) out << (i ? "x" : "") << input[i];
  for (const LayerSpec& layer : layers) {
    out << ';';
    if (const auto* dense = std::get_if<DenseSpec>(&layer))
      out << "dense:" << dense->out << ':' << activation_name(dense->act);
    else if (const auto* conv = std::get_if<ConvSpec>(&layer))
      out << "conv:" << conv->channels << ':' << conv->kernel << ':'
          << activation_name(conv->act);
    else
      out << "flatten";
  }
  out << ";likelihood=";
  if (likelihood.kind == LikelihoodSpec::Kind::categorical)
    out << "categorical:" << likelihood.classes;
  else {
    char buf[40];
    std::snprintf(buf, sizeof buf, "gaussian:%.17g", likelihood.tau2);
    out << buf;
  }
  return out.str();
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

Eigen::Index parse_index(const std::string& s) {
  try {
    size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<Eigen::Index>(v);
  } catch (const std::exception&) {
    throw ValidationError("arch: bad integer '" + s + "'");
  }
}

}  // namespace

ArchSpec arch_from_string(const std::string& s) {
  ArchSpec arch;
  const std::vector<std::string> parts = split(s, ';');
  if (parts.size() < 2 || parts.front().rfind("input=", 0) != 0 ||
      parts.back().rfind("likelihood=", 0) != 0)
    throw ValidationError("arch: expected 'input=...;<layers>;likelihood=...'");
  for (const std::string& d : split(parts.front().substr(6), 'x'))
    arch.input.push_back(parse_index(d));
  for (size_t i = 1; i + 1 < parts.size(); ++i) {
    const std::vector<std::string> f = split(parts[i], ':');
    if (f[0] == "dense" && (f.size() == 2 || f.size() == 3))
      arch.layers.push_back(DenseSpec{
          parse_index(f[1]),
          f.size() == 3 ? activation_from_name(f[2]) : Activation::none});
    else if (f[0] == "conv" && (f.size() == 3 || f.size() == 4))
      arch.layers.push_back(ConvSpec{
          parse_index(f[1]), parse_index(f[2]),
          f.size() == 4 ? activation_from_name(f[3]) : Activation::none});
    else if (f[0] == "flatten" && f.size() == 1)
      arch.layers.push_back(FlattenSpec{});
    else
      throw ValidationError("arch: bad layer '" + parts[i] + "'");
  }
  const std::vector<std::string> lik = split(parts.back().substr(11), ':');
  if (lik[0] == "categorical" && lik.size() == 2) {
    arch.likelihood.kind = LikelihoodSpec::Kind::categorical;
    arch.likelihood.classes = parse_index(lik[1]);
  } else if (lik[0] == "gaussian" && lik.size() == 2) {
    arch.likelihood.kind = LikelihoodSpec::Kind::gaussian;
    try {
      arch.likelihood.tau2 = std::stod(lik[1]);
    } catch (const std::exception&) {
      throw ValidationError("arch: bad tau2 '" + lik[1] + "'");
    }
  } else {
    throw ValidationError("arch: bad likelihood '" + parts.back() + "'");
  }
  arch.validate();
  return arch;
}

ArchSpec make_preset(const std::string& name, Shape input, Eigen::Index classes) {
  ArchSpec arch;
  arch.input = std::move(input);
  arch.likelihood.kind = LikelihoodSpec::Kind::categorical;
  arch.likelihood.classes = classes;
  if (name == "mlp-2x64") {
    arch.layers = {DenseSpec{64, Activation::relu},
                   DenseSpec{64, Activation::relu},
                   DenseSpec{classes, Activation::none}};
  } else if (name == "tinyconv") {
    arch.layers = {ConvSpec{8, 3, Activation::relu}, FlattenSpec{},
                   DenseSpec{classes, Activation::none}};
  } else {
    throw ValidationError("unknown arch preset '" + name + "'");
  }
  arch.validate();
  return arch;
}

Value network_outputs(Tape& tape, const ArchSpec& arch, Value theta,
                      Value inputs) {
  if (theta.value().numel() != arch.param_count())
    throw ValidationError("theta has " + std::to_string(theta.value().numel()) +
                          " parameters, arch needs " +
                          std::to_string(arch.param_count()));
  const Eigen::Index B = inputs.value().dim(0);
  if (inputs.value().rank() != 2 ||
      inputs.value().dim(1) != shape_numel(arch.input))
    throw ValidationError("inputs must be [B x " +
                          std::to_string(shape_numel(arch.input)) + "]");

  const std::vector<ParamBlock> layout = param_layout(arch);
  size_t next_block = 0;
  auto take_param = [&]() {
    const ParamBlock& b = layout[next_block++];
    return reshape(slice(theta, b.offset, shape_numel(b.shape)), b.shape);
  };

  Value cur = inputs;
  if (arch.input.size() == 3)
    cur = reshape(cur, {B, arch.input[0], arch.input[1], arch.input[2]});

  for (const LayerSpec& layer : arch.layers) {
    if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
      Value w = take_param();
      Value bias = take_param();
      cur = apply_activation(broadcast_add_rows(matmul(cur, w), bias), dense->act);
    } else if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      Value k = take_param();
      Value bias = take_param();
      cur = apply_activation(broadcast_add_channels(conv2d(cur, k), bias),
                             conv->act);
    } else {
      cur = reshape(cur, {B, cur.value().numel() / B});
    }
  }
  return cur;
}

Value log_likelihood(Tape& tape, const ArchSpec& arch, Value theta,
                     const Batch& batch) {
  if (batch.inputs.rank() != 2)
    throw ValidationError("batch inputs must be [B x k]");
  const Eigen::Index B = batch.size();
  Value inputs = tape.constant(batch.inputs, "x");
  Value out = network_outputs(tape, arch, theta, inputs);
  if (arch.likelihood.kind == LikelihoodSpec::Kind::categorical) {
    if (static_cast<Eigen::Index>(batch.labels.size()) != B)
      throw ValidationError("batch has " + std::to_string(batch.labels.size()) +
                            " labels for " + std::to_string(B) + " examples");
    return take_per_row(log_softmax_rows(out), batch.labels);
  }
  if (batch.targets.rank() != 2 || batch.targets.dim(0) != B ||
      batch.targets.dim(1) != out.value().dim(1))
    throw ValidationError("gaussian targets must be [B x output-dim]");
  const double tau2 = arch.likelihood.tau2;
  const Eigen::Index K = out.value().dim(1);
  Value y = tape.constant(batch.targets, "y");
  Value sq = sum_axis(square(sub(y, out)), 1);
  return add_scalar(scale(sq, -0.5 / tau2),
                    -0.5 * static_cast<double>(K) *
                        std::log(2.0 * 3.14159265358979323846 * tau2));
}

Array log_likelihood(const ArchSpec& arch, const Array& theta,
                     const Batch& batch) {
  Tape tape;
  Value th = tape.constant(Tensor::vector(theta), "theta");
  return log_likelihood(tape, arch, th, batch).value().data();
}

Tensor predictive_log_probs(const ArchSpec& arch, const MeanFieldGaussian& q,
                            const Batch& batch, int M, const CounterRng& rng) {
  if (arch.likelihood.kind != LikelihoodSpec::Kind::categorical)
    throw ValidationError("predictive_log_probs requires a categorical likelihood");
  if (M < 1) throw ValidationError("predictive_log_probs: M must be >= 1");
  const Eigen::Index B = batch.size();
  const Eigen::Index C = arch.likelihood.classes;

  Tape tape;
  Value mu = tape.constant(Tensor::vector(q.mu), "mu");
  Value rho = tape.constant(Tensor::vector(q.rho), "rho");
  std::vector<Value> thetas = sample_params(tape, mu, rho, rng, M);
  Value inputs = tape.constant(batch.inputs, "x");

  std::vector<Value> per_sample;
  per_sample.reserve(thetas.size());
  for (Value theta : thetas) {
    Value lp = log_softmax_rows(network_outputs(tape, arch, theta, inputs));
    per_sample.push_back(reshape(lp, {B * C}));
  }
  Value mixed = add_scalar(logsumexp(stack_rows(per_sample), 0),
                           -std::log(static_cast<double>(M)));
  return reshape(mixed, {B, C}).value();
}

}  // namespace vilab
