#include "vilab/trainer.hpp"

#include <chrono>
#include <cmath>

#include "vilab/adam.hpp"
#include "vilab/errors.hpp"

namespace vilab {

namespace {

// rng stream tags within a run
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kNoiseStream = 3;
constexpr std::uint64_t kEvalStream = 4;
constexpr std::uint64_t kEvalTestStream = 5;

constexpr Eigen::Index kEvalChunk = 512;

}  // namespace

void TrainConfig::validate() const {
  arch.validate();
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ValidationError("train: learning rate must be positive");
  if (eval_every < 1) throw ValidationError("train: eval_every must be >= 1");
  if (m_eval < 1) throw ValidationError("train: m_eval must be >= 1");
  if (!(sigma_init > 0)) throw ValidationError("train: sigma_init must be positive");
  if (bounds && (!(bounds->mu_norm > 0) || !(bounds->var_max > 0)))
    throw ValidationError("train: bounds must be positive");
}

MeanFieldGaussian init_posterior(const ArchSpec& arch, double sigma_init,
                                 const CounterRng& rng) {
  const std::vector<ParamBlock> layout = param_layout(arch);
  const Eigen::Index D = arch.param_count();
  MeanFieldGaussian q;
  q.mu = Array::Zero(D);
  q.rho = Array::Constant(D, softplus_inv(sigma_init));
  // blocks come in (weight, bias) pairs; both use the weight's fan-in
  for (size_t b = 0; b < layout.size(); ++b) {
    const Shape& s = layout[b].shape;
    const Shape& ws = layout[b - (b % 2)].shape;  // owning weight block
    const double fan_in = ws.size() == 2
                              ? static_cast<double>(ws[0])
                              : static_cast<double>(ws[1] * ws[2] * ws[3]);
    const double sd = 1.0 / std::sqrt(fan_in);
    const Eigen::Index n = shape_numel(s);
    for (Eigen::Index j = 0; j < n; ++j)
      q.mu[layout[b].offset + j] =
          sd * rng.normal(static_cast<std::uint64_t>(b),
                          static_cast<std::uint64_t>(j));
  }
  return q;
}

namespace {

struct Evaluator {
  const TrainConfig& cfg;
  const Dataset& train_data;
  const Dataset& test_data;
  CounterRng eval_rng;
  CounterRng eval_test_rng;

  TrajectoryRow row(int epoch, const MeanFieldGaussian& q,
                    double elapsed_seconds) const {
    TrajectoryRow r;
    r.epoch = epoch;
    const Eigen::Index n = train_data.size();
    double elbo_sum = 0, dlm_sum = 0;
    for (Eigen::Index start = 0; start < n; start += kEvalChunk) {
      const Eigen::Index len = std::min(kEvalChunk, n - start);
      std::vector<int> idx(static_cast<size_t>(len));
      for (Eigen::Index i = 0; i < len; ++i)
        idx[static_cast<size_t>(i)] = static_cast<int>(start + i);
      auto [elbo_pe, dlm_pe] = data_terms_shared_samples(
          cfg.arch, q, make_batch(train_data, idx), cfg.objective.m_train,
          cfg.objective.smoothing_a, eval_rng);
      elbo_sum += elbo_pe.sum();
      dlm_sum += dlm_pe.sum();
    }
    r.train_elbo_loss = elbo_sum / static_cast<double>(n);
    r.train_dlm_loss = dlm_sum / static_cast<double>(n);
    r.reg_value = regularizer_value(q, cfg.objective.regularizer);
    const TestMetrics tm =
        test_metrics(cfg.arch, q, test_data, cfg.m_eval, eval_test_rng);
    r.test_nll = tm.nll;
    r.test_accuracy = tm.accuracy;
    r.wall_time_seconds = elapsed_seconds;
    return r;
  }
};

TrainResult run_training(const TrainConfig& config, MeanFieldGaussian q,
                         const Dataset& train_data, const Dataset& test_data) {
  config.validate();
  if (train_data.size() == 0 || test_data.size() == 0)
    throw ValidationError("train: empty dataset");
  if (q.dim() != config.arch.param_count())
    throw ValidationError("train: posterior dim " + std::to_string(q.dim()) +
                          " != arch parameter count " +
                          std::to_string(config.arch.param_count()));

  TrainConfig cfg = config;
  cfg.objective.dataset_size = train_data.size();
  cfg.objective.validate();

  const CounterRng root(cfg.seed);
  Evaluator evaluator{cfg, train_data, test_data, root.fork(kEvalStream),
                      root.fork(kEvalTestStream)};
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  if (cfg.bounds) q = project(q, *cfg.bounds);

  TrainResult result;
  result.trajectory.push_back(evaluator.row(0, q, elapsed()));

  const Eigen::Index N = train_data.size();
  const Eigen::Index D = q.dim();
  Array params(2 * D);
  params.head(D) = q.mu;
  params.tail(D) = q.rho;
  AdamState adam = AdamState::zeros(2 * D);

  std::vector<int> order(static_cast<size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i) order[static_cast<size_t>(i)] = static_cast<int>(i);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const CounterRng shuffle_rng =
        root.fork(kShuffleStream).fork(static_cast<std::uint64_t>(epoch));
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(
          shuffle_rng.below(static_cast<std::uint64_t>(i), 0, i));
      std::swap(order[i - 1], order[j]);
    }

    const CounterRng epoch_rng =
        root.fork(kNoiseStream).fork(static_cast<std::uint64_t>(epoch));
    int batch_index = 0;
    for (Eigen::Index start = 0; start < N; start += cfg.batch_size, ++batch_index) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, N - start);
      std::vector<int> idx(order.begin() + start, order.begin() + start + len);
      Batch batch = make_batch(train_data, idx);
      try {
        Tape tape;
        Value mu = tape.leaf(Tensor::vector(params.head(D)), "mu");
        Value rho = tape.leaf(Tensor::vector(params.tail(D)), "rho");
        BatchLoss loss =
            batch_loss(tape, cfg.arch, mu, rho, batch, cfg.objective,
                       epoch_rng.fork(static_cast<std::uint64_t>(batch_index)));
        result.max_per_example_loss =
            std::max(result.max_per_example_loss, loss.per_example.maxCoeff());
        tape.backward(loss.total);
        Array grad(2 * D);
        grad.head(D) = tape.grad(mu).data();
        grad.tail(D) = tape.grad(rho).data();
        if (!grad.isFinite().all())
          throw NumericError("non-finite gradient");
        adam_step(params, grad, adam, cfg.learning_rate, cfg.adam_beta1,
                  cfg.adam_beta2, cfg.adam_eps);
      } catch (const NumericError& e) {
        throw NumericError("training aborted at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index) + ": " +
                           e.what());
      }
      if (cfg.bounds) {
        MeanFieldGaussian stepped{params.head(D), params.tail(D)};
        const MeanFieldGaussian projected = project(stepped, *cfg.bounds);
        params.head(D) = projected.mu;
        params.tail(D) = projected.rho;
      }
    }

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      q.mu = params.head(D);
      q.rho = params.tail(D);
      result.trajectory.push_back(evaluator.row(epoch, q, elapsed()));
    }
  }

  q.mu = params.head(D);
  q.rho = params.tail(D);
  result.checkpoint.format_version = 1;
  result.checkpoint.arch = cfg.arch;
  result.checkpoint.mu = q.mu;
  result.checkpoint.rho = q.rho;
  result.checkpoint.seed = cfg.seed;
  result.checkpoint.objective = cfg.objective;
  result.checkpoint.epochs_completed = cfg.epochs;
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& train_data,
                  const Dataset& test_data) {
  if (config.epochs < 1) throw ValidationError("train: epochs must be >= 1");
  const MeanFieldGaussian q0 = init_posterior(
      config.arch, config.sigma_init, CounterRng(config.seed).fork(kInitStream));
  return run_training(config, q0, train_data, test_data);
}

TrainResult continue_train(const Checkpoint& start, const TrainConfig& config,
                           const Dataset& train_data, const Dataset& test_data) {
  if (config.epochs < 0) throw ValidationError("continue: epochs must be >= 0");
  if (!(start.arch == config.arch))
    throw ValidationError("continue: checkpoint arch '" + start.arch.to_string() +
                          "' does not match config arch '" +
                          config.arch.to_string() + "'");
  return run_training(config, start.posterior(), train_data, test_data);
}

}  // namespace vilab
