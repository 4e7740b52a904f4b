#include "vilab/objectives.hpp"

#include <cmath>
#include <limits>

#include "vilab/errors.hpp"

namespace vilab {

void ObjectiveSpec::validate() const {
  if (eta < 0) throw ValidationError("objective: eta must be >= 0");
  if (m_train < 1) throw ValidationError("objective: m_train must be >= 1");
  if (smoothing_a < 0 || smoothing_a >= 1)
    throw ValidationError("objective: smoothing_a must be in [0, 1)");
  if (dataset_size < 1) throw ValidationError("objective: dataset_size must be >= 1");
}

const char* objective_kind_name(ObjectiveSpec::Kind k) {
  return k == ObjectiveSpec::Kind::elbo ? "elbo" : "dlm";
}

ObjectiveSpec::Kind objective_kind_from_name(const std::string& s) {
  if (s == "elbo") return ObjectiveSpec::Kind::elbo;
  if (s == "dlm") return ObjectiveSpec::Kind::dlm;
  throw ValidationError("unknown objective kind '" + s + "'");
}

double smoothed_log(double logp, double a) {
  if (a < 0 || a >= 1) throw ValidationError("smoothing a must be in [0, 1)");
  if (a == 0) return logp;
  const double ln_a = std::log(a);
  const double shifted = logp + std::log1p(-a) - ln_a;
  return ln_a + softplus_scalar(shifted);
}

Value smoothed_log(Value logp, double a) {
  if (a < 0 || a >= 1) throw ValidationError("smoothing a must be in [0, 1)");
  if (a == 0) return logp;
  const double ln_a = std::log(a);
  return add_scalar(softplus(add_scalar(logp, std::log1p(-a) - ln_a)), ln_a);
}

namespace {

// Per-sample log-likelihood vectors [B], smoothed when a > 0. With shared
// sampling every example sees the same M thetas; per-example sampling keys
// example i's draws on rng.fork(1 + i).
std::vector<Value> sample_log_liks(Tape& tape, const ArchSpec& arch, Value mu,
                                   Value rho, const Batch& batch,
                                   const ObjectiveSpec& spec,
                                   const CounterRng& rng) {
  const Eigen::Index B = batch.size();
  std::vector<Value> liks;
  liks.reserve(static_cast<size_t>(spec.m_train));
  if (!spec.per_example_sampling) {
    std::vector<Value> thetas = sample_params(tape, mu, rho, rng, spec.m_train);
    for (Value theta : thetas)
      liks.push_back(smoothed_log(log_likelihood(tape, arch, theta, batch),
                                  spec.smoothing_a));
    return liks;
  }
  // one theta per (sample, example)
  std::vector<std::vector<Value>> per_example(static_cast<size_t>(B));
  for (Eigen::Index i = 0; i < B; ++i) {
    Batch row;
    const Eigen::Index k = batch.inputs.dim(1);
    row.inputs = Tensor({1, k}, batch.inputs.data().segment(i * k, k));
    if (!batch.labels.empty()) row.labels = {batch.labels[static_cast<size_t>(i)]};
    if (batch.targets.numel() > 0) {
      const Eigen::Index t = batch.targets.dim(1);
      row.targets = Tensor({1, t}, batch.targets.data().segment(i * t, t));
    }
    std::vector<Value> thetas = sample_params(
        tape, mu, rho, rng.fork(1 + static_cast<std::uint64_t>(i)), spec.m_train);
    for (int m = 0; m < spec.m_train; ++m)
      per_example[static_cast<size_t>(i)].push_back(
          log_likelihood(tape, arch, thetas[static_cast<size_t>(m)], row));
  }
  for (int m = 0; m < spec.m_train; ++m) {
    std::vector<Value> rows;
    rows.reserve(static_cast<size_t>(B));
    for (Eigen::Index i = 0; i < B; ++i)
      rows.push_back(per_example[static_cast<size_t>(i)][static_cast<size_t>(m)]);
    liks.push_back(smoothed_log(reshape(stack_rows(rows), {B}), spec.smoothing_a));
  }
  return liks;
}

BatchLoss assemble(Tape& tape, Value per_example_node, Value mu, Value rho,
                   const ObjectiveSpec& spec) {
  BatchLoss out;
  out.data_term = mean(per_example_node);
  out.reg_term = regularizer_value(tape, mu, rho, spec.regularizer);
  const double weight = spec.eta / static_cast<double>(spec.dataset_size);
  out.total = add(out.data_term, scale(out.reg_term, weight));
  out.per_example = per_example_node.value().data();
  out.numbers.total = out.total.value().as_scalar();
  out.numbers.data_term = out.data_term.value().as_scalar();
  out.numbers.reg_term = out.reg_term.value().as_scalar();
  out.numbers.eta_reg_per_example = weight * out.numbers.reg_term;
  return out;
}

}  // namespace

BatchLoss elbo_batch_loss(Tape& tape, const ArchSpec& arch, Value mu, Value rho,
                          const Batch& batch, const ObjectiveSpec& spec,
                          const CounterRng& rng) {
  if (spec.kind != ObjectiveSpec::Kind::elbo)
    throw ValidationError("elbo_batch_loss called with a non-elbo spec");
  spec.validate();
  std::vector<Value> liks = sample_log_liks(tape, arch, mu, rho, batch, spec, rng);
  Value avg = scale(sum_axis(stack_rows(liks), 0),
                    1.0 / static_cast<double>(spec.m_train));
  return assemble(tape, neg(avg), mu, rho, spec);
}

BatchLoss dlm_batch_loss(Tape& tape, const ArchSpec& arch, Value mu, Value rho,
                         const Batch& batch, const ObjectiveSpec& spec,
                         const CounterRng& rng) {
  if (spec.kind != ObjectiveSpec::Kind::dlm)
    throw ValidationError("dlm_batch_loss called with a non-dlm spec");
  spec.validate();
  std::vector<Value> liks = sample_log_liks(tape, arch, mu, rho, batch, spec, rng);
  Value mix = add_scalar(logsumexp(stack_rows(liks), 0),
                         -std::log(static_cast<double>(spec.m_train)));
  return assemble(tape, neg(mix), mu, rho, spec);
}

BatchLoss batch_loss(Tape& tape, const ArchSpec& arch, Value mu, Value rho,
                     const Batch& batch, const ObjectiveSpec& spec,
                     const CounterRng& rng) {
  return spec.kind == ObjectiveSpec::Kind::elbo
             ? elbo_batch_loss(tape, arch, mu, rho, batch, spec, rng)
             : dlm_batch_loss(tape, arch, mu, rho, batch, spec, rng);
}

LossBreakdown eval_batch_loss(const ArchSpec& arch, const MeanFieldGaussian& q,
                              const Batch& batch, const ObjectiveSpec& spec,
                              const CounterRng& rng) {
  Tape tape;
  Value mu = tape.constant(Tensor::vector(q.mu), "mu");
  Value rho = tape.constant(Tensor::vector(q.rho), "rho");
  return batch_loss(tape, arch, mu, rho, batch, spec, rng).numbers;
}

std::pair<Array, Array> data_terms_shared_samples(const ArchSpec& arch,
                                                  const MeanFieldGaussian& q,
                                                  const Batch& batch, int M,
                                                  double smoothing_a,
                                                  const CounterRng& rng) {
  Tape tape;
  Value mu = tape.constant(Tensor::vector(q.mu), "mu");
  Value rho = tape.constant(Tensor::vector(q.rho), "rho");
  std::vector<Value> thetas = sample_params(tape, mu, rho, rng, M);
  std::vector<Value> liks;
  liks.reserve(thetas.size());
  for (Value theta : thetas)
    liks.push_back(
        smoothed_log(log_likelihood(tape, arch, theta, batch), smoothing_a));
  Value stacked = stack_rows(liks);
  Array elbo_pe = -scale(sum_axis(stacked, 0), 1.0 / M).value().data();
  Array dlm_pe =
      -(logsumexp(stacked, 0).value().data() - std::log(static_cast<double>(M)));
  return {std::move(elbo_pe), std::move(dlm_pe)};
}

TestMetrics test_metrics(const ArchSpec& arch, const MeanFieldGaussian& q,
                         const Dataset& data, int m_eval, const CounterRng& rng) {
  if (data.size() == 0) throw ValidationError("test_metrics: empty dataset");
  if (m_eval < 1) throw ValidationError("test_metrics: m_eval must be >= 1");
  const Eigen::Index n = data.size();
  constexpr Eigen::Index kChunk = 512;

  double nll_sum = 0;
  Eigen::Index correct = 0;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n - start);
    std::vector<int> idx(static_cast<size_t>(len));
    for (Eigen::Index i = 0; i < len; ++i)
      idx[static_cast<size_t>(i)] = static_cast<int>(start + i);
    Batch chunk = make_batch(data, idx);

    if (data.classification) {
      Tensor lp = predictive_log_probs(arch, q, chunk, m_eval, rng);
      const Eigen::Index C = lp.dim(1);
      for (Eigen::Index i = 0; i < len; ++i) {
        const int y = chunk.labels[static_cast<size_t>(i)];
        nll_sum -= lp.at(i * C + y);
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < C; ++c)
          if (lp.at(i * C + c) > lp.at(i * C + best)) best = c;
        if (best == y) ++correct;
      }
    } else {
      std::vector<Array> thetas = sample_params(q, rng, m_eval);
      RowMat liks(m_eval, len);
      for (int m = 0; m < m_eval; ++m)
        liks.row(m) =
            log_likelihood(arch, thetas[static_cast<size_t>(m)], chunk)
                .matrix()
                .transpose();
      for (Eigen::Index i = 0; i < len; ++i) {
        const double mx = liks.col(i).maxCoeff();
        const double lse =
            mx + std::log((liks.col(i).array() - mx).exp().sum());
        nll_sum -= lse - std::log(static_cast<double>(m_eval));
      }
    }
  }
  TestMetrics out;
  out.nll = nll_sum / static_cast<double>(n);
  out.accuracy = data.classification
                     ? static_cast<double>(correct) / static_cast<double>(n)
                     : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace vilab
