#pragma once

#include <vector>

#include "vilab/rng.hpp"
#include "vilab/tape.hpp"
#include "vilab/tensor.hpp"

namespace vilab {

/// Mean-field Gaussian posterior: independent N(mu_j, sigma_j^2) per
/// parameter, with sigma_j = softplus(rho_j) so optimization over rho is
/// unconstrained.
struct MeanFieldGaussian {
  Array mu;
  Array rho;

  Eigen::Index dim() const { return mu.size(); }
  Array sigma() const;
  Array variance() const { return sigma().square(); }

  static MeanFieldGaussian from_mu_sigma(Array mu, const Array& sigma);
};

struct PriorSpec {
  double variance = 0.05;  // isotropic, zero mean
};

struct BoundSpec {
  double mu_norm = 0;  // bound on ||mu||_2
  double var_max = 0;  // bound on max_j sigma_j^2
};

struct RegularizerSpec {
  enum class Kind { fixed_kl, cvi_mean, cvi_mv, eb };
  Kind kind = Kind::fixed_kl;
  PriorSpec prior;                       // fixed_kl
  double gamma = 0.3, alpha_reg = 0.05;  // cvi_mean
  double alpha = 0.5, beta = 0.01, delta = 0.1;  // cvi_mv; eb uses alpha, beta
};

const char* regularizer_kind_name(RegularizerSpec::Kind k);
RegularizerSpec::Kind regularizer_kind_from_name(const std::string& s);

double softplus_scalar(double x);
double softplus_inv(double s);

// ---- sampling ---------------------------------------------------------------

/// Reparameterized samples theta_m = mu + softplus(rho) .* eps_m with
/// eps_m[j] = rng.normal(m, j): sample m depends only on (rng key, m), so
/// draws commute and repeat exactly.
std::vector<Value> sample_params(Tape& tape, Value mu, Value rho,
                                 const CounterRng& rng, int M);

/// Value-only variant of the above (same draws, no tape).
std::vector<Array> sample_params(const MeanFieldGaussian& q,
                                 const CounterRng& rng, int M);

// ---- KL and regularizers ----------------------------------------------------

/// KL(q || N(0, s^2 I)) in closed form:
///   1/2 sum_j [ (sigma_j^2 + mu_j^2)/s^2 - 1 - ln(sigma_j^2 / s^2) ]
Value kl_to_prior(Tape& tape, Value mu, Value rho, const PriorSpec& prior);
double kl_to_prior(const MeanFieldGaussian& q, const PriorSpec& prior);

/// Same KL on raw (mu, variance) vectors; used by grid searches that
/// parameterize variance directly.
double kl_diag_to_prior(const Array& mu, const Array& var, const PriorSpec& prior);

Value regularizer_value(Tape& tape, Value mu, Value rho,
                        const RegularizerSpec& spec);
double regularizer_value(const MeanFieldGaussian& q, const RegularizerSpec& spec);

// ---- bounded optimization ---------------------------------------------------

bool is_feasible(const MeanFieldGaussian& q, const BoundSpec& bounds);

/// Projects onto { ||mu||_2 <= b_m, max_j sigma_j^2 <= b_v }: exact Euclidean
/// scaling for mu, per-coordinate clamp on sigma realized through rho. A
/// feasible q is returned unchanged, so the projection is idempotent
/// bit-for-bit.
MeanFieldGaussian project(const MeanFieldGaussian& q, const BoundSpec& bounds);

}  // namespace vilab
