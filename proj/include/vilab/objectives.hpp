#pragma once

#include "vilab/dataset.hpp"
#include "vilab/gaussian.hpp"
#include "vilab/model.hpp"

namespace vilab {

/// Everything that determines a training loss: which objective, the
/// regularizer weight eta, the Monte-Carlo sample count, loss smoothing, the
/// regularizer itself, and the dataset size the regularizer is amortized
/// over.
struct ObjectiveSpec {
  enum class Kind { elbo, dlm };
  Kind kind = Kind::elbo;
  double eta = 0.1;
  int m_train = 5;
  double smoothing_a = 0.0;  // 0 disables smoothing
  bool per_example_sampling = false;
  RegularizerSpec regularizer;
  long dataset_size = 0;  // N; filled in from the training data

  void validate() const;
};

const char* objective_kind_name(ObjectiveSpec::Kind k);
ObjectiveSpec::Kind objective_kind_from_name(const std::string& s);

struct LossBreakdown {
  double total = 0;        // data_term + eta * reg_term / N
  double data_term = 0;    // per-example average
  double reg_term = 0;     // raw regularizer value (unweighted)
  double eta_reg_per_example = 0;
};

/// Tape handles plus extracted numbers for one minibatch loss.
struct BatchLoss {
  Value total;
  Value data_term;
  Value reg_term;
  Array per_example;  // per-example data-term values
  LossBreakdown numbers;
};

/// Smoothed log from the bounded-loss construction:
///   log^(a)(p) = log((1-a) p + a),
/// computed as ln a + softplus(logp + ln(1-a) - ln a) so p may underflow
/// freely. a = 0 returns logp unchanged (bit-exact); output is >= ln a.
double smoothed_log(double logp, double a);
Value smoothed_log(Value logp, double a);

/// Multi-sample ELBO minibatch loss:
///   mean_i (1/M) sum_m [-log p(y_i | theta_m, x_i)] + eta * R(q) / N.
/// An unbiased estimator of the per-example ELBO loss (up to smoothing).
BatchLoss elbo_batch_loss(Tape& tape, const ArchSpec& arch, Value mu, Value rho,
                          const Batch& batch, const ObjectiveSpec& spec,
                          const CounterRng& rng);

/// Multi-sample DLM minibatch loss:
///   mean_i -[logsumexp_m log p(y_i | theta_m, x_i) - ln M] + eta * R(q) / N.
/// A biased (Jensen-upper) estimator of the predictive log loss; computed in
/// log space throughout.
BatchLoss dlm_batch_loss(Tape& tape, const ArchSpec& arch, Value mu, Value rho,
                         const Batch& batch, const ObjectiveSpec& spec,
                         const CounterRng& rng);

BatchLoss batch_loss(Tape& tape, const ArchSpec& arch, Value mu, Value rho,
                     const Batch& batch, const ObjectiveSpec& spec,
                     const CounterRng& rng);

/// No-grad evaluation over a private tape.
LossBreakdown eval_batch_loss(const ArchSpec& arch, const MeanFieldGaussian& q,
                              const Batch& batch, const ObjectiveSpec& spec,
                              const CounterRng& rng);

/// Per-example data terms of BOTH objectives from one shared sample set
/// (first = elbo, second = dlm). Used for trajectory logging and the
/// loss-surface scans, where the two curves must see identical noise.
std::pair<Array, Array> data_terms_shared_samples(const ArchSpec& arch,
                                                  const MeanFieldGaussian& q,
                                                  const Batch& batch, int M,
                                                  double smoothing_a,
                                                  const CounterRng& rng);

struct TestMetrics {
  double nll = 0;
  double accuracy = 0;  // NaN for gaussian likelihoods
};

/// Test NLL (eq-2 style: -log of the M-sample predictive probability of the
/// true target, averaged) and accuracy. No smoothing is applied at test time.
TestMetrics test_metrics(const ArchSpec& arch, const MeanFieldGaussian& q,
                         const Dataset& data, int m_eval, const CounterRng& rng);

}  // namespace vilab
