#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vilab/dataset.hpp"
#include "vilab/gaussian.hpp"
#include "vilab/model.hpp"
#include "vilab/objectives.hpp"

namespace vilab {

struct TrainConfig {
  ObjectiveSpec objective;
  ArchSpec arch;
  int epochs = 200;
  int batch_size = 128;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  double sigma_init = 0.01;
  std::optional<BoundSpec> bounds;
  int eval_every = 10;
  int m_eval = 10;

  void validate() const;
};

/// One evaluation point. Both train losses are always recorded, whichever
/// objective is being optimized, from one shared frozen sample set (M_train
/// draws, fixed eval seed), so the two trajectories are comparable row by
/// row. Wall time is measured, not derived from the seed; it is reported in
/// a sidecar file rather than trajectory.csv so reruns stay byte-identical.
struct TrajectoryRow {
  int epoch = 0;
  double train_elbo_loss = 0;
  double train_dlm_loss = 0;
  double reg_value = 0;
  double test_nll = 0;
  double test_accuracy = 0;
  double wall_time_seconds = 0;
};

struct Checkpoint {
  int format_version = 1;
  ArchSpec arch;
  Array mu;
  Array rho;
  std::uint64_t seed = 0;
  ObjectiveSpec objective;
  long epochs_completed = 0;

  MeanFieldGaussian posterior() const { return {mu, rho}; }
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrajectoryRow> trajectory;
  double max_per_example_loss = 0;  // over all training batches
};

/// Layer-wise random init: mu_j ~ N(0, 1/fan-in), sigma_j = sigma_init.
MeanFieldGaussian init_posterior(const ArchSpec& arch, double sigma_init,
                                 const CounterRng& rng);

/// Adam training of config.objective from random init. Deterministic given
/// (config, data); a non-finite loss or gradient aborts with the offending
/// epoch/batch in the message. With bounds set, the posterior is projected
/// after every step.
TrainResult train(const TrainConfig& config, const Dataset& train_data,
                  const Dataset& test_data);

/// Same loop started from a checkpoint: fresh Adam moments, new objective.
/// epochs == 0 is allowed and produces only the epoch-0 evaluation row.
TrainResult continue_train(const Checkpoint& start, const TrainConfig& config,
                           const Dataset& train_data, const Dataset& test_data);

}  // namespace vilab
