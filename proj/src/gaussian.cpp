#include "vilab/gaussian.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "vilab/errors.hpp"

namespace vilab {

double softplus_scalar(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double softplus_inv(double s) {
  if (s <= 0) throw ValidationError("softplus_inv requires a positive value");
  // softplus(x) ~ x for large x; expm1 would overflow there
  if (s > 30) return s;
  return std::log(std::expm1(s));
}

Array MeanFieldGaussian::sigma() const {
  return rho.max(0.0) + (-rho.abs()).exp().log1p();
}

MeanFieldGaussian MeanFieldGaussian::from_mu_sigma(Array mu, const Array& sigma) {
  MeanFieldGaussian q;
  q.mu = std::move(mu);
  q.rho = sigma.unaryExpr([](double s) { return softplus_inv(s); });
  if (q.mu.size() != q.rho.size())
    throw ValidationError("mu and sigma dimensions differ");
  return q;
}

const char* regularizer_kind_name(RegularizerSpec::Kind k) {
  switch (k) {
    case RegularizerSpec::Kind::fixed_kl: return "fixed_kl";
    case RegularizerSpec::Kind::cvi_mean: return "cvi_mean";
    case RegularizerSpec::Kind::cvi_mv: return "cvi_mv";
    case RegularizerSpec::Kind::eb: return "eb";
  }
  return "?";
}

RegularizerSpec::Kind regularizer_kind_from_name(const std::string& s) {
  if (s == "fixed_kl") return RegularizerSpec::Kind::fixed_kl;
  if (s == "cvi_mean") return RegularizerSpec::Kind::cvi_mean;
  if (s == "cvi_mv") return RegularizerSpec::Kind::cvi_mv;
  if (s == "eb") return RegularizerSpec::Kind::eb;
  throw ValidationError("unknown regularizer kind '" + s + "'");
}

// ---- sampling ---------------------------------------------------------------

std::vector<Value> sample_params(Tape& tape, Value mu, Value rho,
                                 const CounterRng& rng, int M) {
  if (M < 1) throw ValidationError("sample_params: M must be >= 1");
  const Eigen::Index d = mu.value().numel();
  if (rho.value().numel() != d)
    throw ValidationError("sample_params: mu and rho dimensions differ");
  Value sigma = softplus(rho);
  std::vector<Value> thetas;
  thetas.reserve(static_cast<size_t>(M));
  for (int m = 0; m < M; ++m) {
    Array eps(d);
    for (Eigen::Index j = 0; j < d; ++j)
      eps[j] = rng.normal(static_cast<std::uint64_t>(m),
                          static_cast<std::uint64_t>(j));
    Value e = tape.constant(Tensor(mu.value().shape(), std::move(eps)), "eps");
    thetas.push_back(add(mu, mul(sigma, e)));
  }
  return thetas;
}

std::vector<Array> sample_params(const MeanFieldGaussian& q,
                                 const CounterRng& rng, int M) {
  if (M < 1) throw ValidationError("sample_params: M must be >= 1");
  const Eigen::Index d = q.dim();
  const Array sigma = q.sigma();
  std::vector<Array> thetas;
  thetas.reserve(static_cast<size_t>(M));
  for (int m = 0; m < M; ++m) {
    Array theta(d);
    for (Eigen::Index j = 0; j < d; ++j)
      theta[j] = q.mu[j] + sigma[j] * rng.normal(static_cast<std::uint64_t>(m),
                                                 static_cast<std::uint64_t>(j));
    thetas.push_back(std::move(theta));
  }
  return thetas;
}

// ---- KL and regularizers ----------------------------------------------------

Value kl_to_prior(Tape& tape, Value mu, Value rho, const PriorSpec& prior) {
  if (prior.variance <= 0)
    throw ValidationError("prior variance must be positive");
  const double s2 = prior.variance;
  const double D = static_cast<double>(mu.value().numel());
  Value sigma = softplus(rho);
  Value quad = scale(add(sum(square(sigma)), sum(square(mu))), 0.5 / s2);
  Value logdet = sum(log(sigma));  // 1/2 sum ln sigma^2
  return add_scalar(sub(quad, logdet), 0.5 * D * (std::log(s2) - 1.0));
}

double kl_to_prior(const MeanFieldGaussian& q, const PriorSpec& prior) {
  return kl_diag_to_prior(q.mu, q.variance(), prior);
}

double kl_diag_to_prior(const Array& mu, const Array& var,
                        const PriorSpec& prior) {
  if (prior.variance <= 0)
    throw ValidationError("prior variance must be positive");
  const double s2 = prior.variance;
  const double D = static_cast<double>(mu.size());
  return 0.5 * ((var.sum() + mu.square().sum()) / s2 - D - var.log().sum() +
                D * std::log(s2));
}

namespace {

void check_positive(double v, const char* name) {
  if (!(v > 0)) throw ValidationError(std::string(name) + " must be positive");
}

}  // namespace

Value regularizer_value(Tape& tape, Value mu, Value rho,
                        const RegularizerSpec& spec) {
  const double D = static_cast<double>(mu.value().numel());
  switch (spec.kind) {
    case RegularizerSpec::Kind::fixed_kl:
      return kl_to_prior(tape, mu, rho, spec.prior);
    case RegularizerSpec::Kind::cvi_mean: {
      check_positive(spec.gamma, "gamma");
      check_positive(spec.alpha_reg, "alpha_reg");
      Value sigma = softplus(rho);
      Value t1 = scale(add(sum(square(sigma)), scale(sum(square(mu)), spec.alpha_reg)),
                       0.5 / spec.gamma);
      Value t2 = sum(log(sigma));  // 1/2 sum ln sigma^2
      return add_scalar(sub(t1, t2), -0.5 * D * std::log(spec.alpha_reg));
    }
    case RegularizerSpec::Kind::cvi_mv: {
      check_positive(spec.alpha, "alpha");
      check_positive(spec.beta, "beta");
      check_positive(spec.delta, "delta");
      Value sigma = softplus(rho);
      Value s2 = square(sigma);
      Value inner = add_scalar(
          add(scale(square(mu), 0.5 * spec.delta), scale(s2, 0.5)), spec.beta);
      Value t1 = scale(sum(log(inner)), spec.alpha + 0.5);
      return sub(t1, sum(log(sigma)));
    }
    case RegularizerSpec::Kind::eb: {
      check_positive(spec.alpha, "alpha");
      check_positive(spec.beta, "beta");
      Value sigma = softplus(rho);
      Value s1 = add(sum(square(mu)), sum(square(sigma)));  // mu'mu + 1's^2
      Value total = add_scalar(s1, 2.0 * spec.beta);
      const double dof = D + 2.0 * spec.alpha + 2.0;
      Value t1 = scale(
          add_scalar(sub(scale(log(scale(total, 1.0 / dof)), D),
                         scale(sum(log(sigma)), 2.0)),
                     -D),
          0.5);
      Value t2 = scale(mul(div(tape.constant(Tensor::scalar(dof)), total), s1), 0.5);
      return add(t1, t2);
    }
  }
  throw ValidationError("unreachable regularizer kind");
}

double regularizer_value(const MeanFieldGaussian& q, const RegularizerSpec& spec) {
  const double D = static_cast<double>(q.dim());
  const Array sigma = q.sigma();
  const Array var = sigma.square();
  switch (spec.kind) {
    case RegularizerSpec::Kind::fixed_kl:
      return kl_diag_to_prior(q.mu, var, spec.prior);
    case RegularizerSpec::Kind::cvi_mean: {
      check_positive(spec.gamma, "gamma");
      check_positive(spec.alpha_reg, "alpha_reg");
      return (var.sum() + spec.alpha_reg * q.mu.square().sum()) / (2 * spec.gamma) -
             0.5 * var.log().sum() - 0.5 * D * std::log(spec.alpha_reg);
    }
    case RegularizerSpec::Kind::cvi_mv: {
      check_positive(spec.alpha, "alpha");
      check_positive(spec.beta, "beta");
      check_positive(spec.delta, "delta");
      return (spec.alpha + 0.5) *
                 (spec.beta + 0.5 * spec.delta * q.mu.square() + 0.5 * var)
                     .log()
                     .sum() -
             0.5 * var.log().sum();
    }
    case RegularizerSpec::Kind::eb: {
      check_positive(spec.alpha, "alpha");
      check_positive(spec.beta, "beta");
      const double s1 = q.mu.square().sum() + var.sum();
      const double total = s1 + 2.0 * spec.beta;
      const double dof = D + 2.0 * spec.alpha + 2.0;
      return 0.5 * (D * std::log(total / dof) - var.log().sum() - D) +
             0.5 * dof / total * s1;
    }
  }
  throw ValidationError("unreachable regularizer kind");
}

// ---- bounded optimization ---------------------------------------------------

bool is_feasible(const MeanFieldGaussian& q, const BoundSpec& bounds) {
  const double norm = std::sqrt(q.mu.square().sum());
  return norm <= bounds.mu_norm &&
         (q.sigma() <= std::sqrt(bounds.var_max)).all();
}

MeanFieldGaussian project(const MeanFieldGaussian& q, const BoundSpec& bounds) {
  if (!(bounds.mu_norm > 0) || !(bounds.var_max > 0))
    throw ValidationError("bounds must be positive");
  if (is_feasible(q, bounds)) return q;

  MeanFieldGaussian r = q;
  const double norm = std::sqrt(r.mu.square().sum());
  if (norm > bounds.mu_norm) {
    r.mu *= bounds.mu_norm / norm;
    // scaling can land a rounding step above the bound; nudge down until exact
    while (std::sqrt(r.mu.square().sum()) > bounds.mu_norm)
      r.mu *= 1.0 - std::numeric_limits<double>::epsilon();
  }
  const double sigma_cap = std::sqrt(bounds.var_max);
  for (Eigen::Index j = 0; j < r.rho.size(); ++j) {
    if (softplus_scalar(r.rho[j]) > sigma_cap) {
      r.rho[j] = softplus_inv(sigma_cap);
      while (softplus_scalar(r.rho[j]) > sigma_cap)
        r.rho[j] = std::nextafter(r.rho[j], -std::numeric_limits<double>::infinity());
    }
  }
  return r;
}

}  // namespace vilab
