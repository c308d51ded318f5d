#include "bsid/posterior.hpp"

#include <cmath>
#include <stdexcept>

namespace bsid {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

void check_params(const ModelSpec& spec, const ModelParams& params, const Dataset& dataset) {
  if (dataset.pairs.empty()) throw std::invalid_argument("posterior: dataset is empty");
  if (dataset.dimension != spec.dimension)
    throw std::invalid_argument("posterior: dataset dimension does not match spec");
  if (!std::isfinite(params.log_lambda) || !std::isfinite(params.log_gamma))
    throw std::invalid_argument("posterior: log precisions must be finite");
  if (params.theta.size() != spec.parameter_count())
    throw std::invalid_argument("posterior: theta length does not match spec");
}

}  // namespace

double log_prior_log_precision(double u, double alpha, double beta) {
  if (u > 0.0) {
    return alpha * std::log(beta) - std::lgamma(alpha) + (alpha - 1.0) * std::log(u) - beta * u;
  }
  return -0.5 * u * u;  // smooth barrier keeps the unconstrained chain out of u <= 0
}

double log_prior_log_precision_grad(double u, double alpha, double beta) {
  if (u > 0.0) return (alpha - 1.0) / u - beta;
  return -u;
}

double log_posterior(const ModelSpec& spec, const ModelParams& params, const Dataset& dataset,
                     const HyperPriors& hyper) {
  check_params(spec, params, dataset);
  const int D = spec.dimension;
  const double gamma = std::exp(params.log_gamma);
  const double lambda = std::exp(params.log_lambda);

  EvalWorkspace ws = make_workspace(spec);
  bind_parameters(spec, params.theta, ws);

  double sq_residual = 0.0;
  for (const auto& pair : dataset.pairs) {
    const SegmentResult res = integrate_segment_bound(spec, pair.x_start, pair.plan, nullptr, ws);
    if (!res.finite) return kNegInf;
    sq_residual += (pair.x_end - res.x_end).squaredNorm();
  }

  const auto n = static_cast<double>(dataset.pairs.size());
  double logp = n * 0.5 * D * (params.log_gamma - kLogTwoPi) - 0.5 * gamma * sq_residual;
  logp += params.theta.size() * (params.log_lambda - std::log(2.0)) -
          lambda * params.theta.lpNorm<1>();
  logp += log_prior_log_precision(params.log_lambda, hyper.alpha1, hyper.beta1);
  logp += log_prior_log_precision(params.log_gamma, hyper.alpha2, hyper.beta2);
  return logp;
}

PosteriorGradient grad_log_posterior(const ModelSpec& spec, const ModelParams& params,
                                     const Dataset& dataset, const HyperPriors& hyper) {
  check_params(spec, params, dataset);
  const int D = spec.dimension;
  const int P = spec.parameter_count();
  const double gamma = std::exp(params.log_gamma);
  const double lambda = std::exp(params.log_lambda);

  PosteriorGradient out;
  out.grad = Eigen::VectorXd::Zero(P + 2);

  EvalWorkspace ws = make_workspace(spec);
  bind_parameters(spec, params.theta, ws);

  SegmentTape tape;
  Eigen::VectorXd x0_bar(D);
  Eigen::VectorXd residual(D);
  auto theta_grad = out.grad.head(P);

  double sq_residual = 0.0;
  for (const auto& pair : dataset.pairs) {
    const SegmentResult res = integrate_segment_bound(spec, pair.x_start, pair.plan, &tape, ws);
    if (!res.finite) {
      out.value = kNegInf;
      out.finite = false;
      return out;
    }
    residual = pair.x_end - res.x_end;
    sq_residual += residual.squaredNorm();
    // d/dtheta of -(gamma/2) ||x_end - h(theta)||^2 = gamma residual^T dh/dtheta
    residual *= gamma;
    segment_vjp_bound(spec, tape, residual, x0_bar, theta_grad, ws);
  }

  const auto n = static_cast<double>(dataset.pairs.size());
  out.value = n * 0.5 * D * (params.log_gamma - kLogTwoPi) - 0.5 * gamma * sq_residual +
              P * (params.log_lambda - std::log(2.0)) - lambda * params.theta.lpNorm<1>() +
              log_prior_log_precision(params.log_lambda, hyper.alpha1, hyper.beta1) +
              log_prior_log_precision(params.log_gamma, hyper.alpha2, hyper.beta2);
  out.finite = std::isfinite(out.value);

  // Laplace subgradient; sign(0) taken as 0
  for (int p = 0; p < P; ++p) {
    const double t = params.theta[p];
    if (t > 0.0) theta_grad[p] -= lambda;
    else if (t < 0.0) theta_grad[p] += lambda;
  }

  // log lambda: d/du [P (u - log 2) - e^u sum |theta|] + prior'
  out.grad[P] = P - lambda * params.theta.lpNorm<1>() +
                log_prior_log_precision_grad(params.log_lambda, hyper.alpha1, hyper.beta1);
  // log gamma: d/dv [n D/2 (v - log 2 pi) - e^v/2 sum r^2] + prior'
  out.grad[P + 1] = n * 0.5 * D - 0.5 * gamma * sq_residual +
                    log_prior_log_precision_grad(params.log_gamma, hyper.alpha2, hyper.beta2);
  return out;
}

Eigen::VectorXd pack(const ModelParams& params) {
  Eigen::VectorXd flat(params.theta.size() + 2);
  flat.head(params.theta.size()) = params.theta;
  flat[params.theta.size()] = params.log_lambda;
  flat[params.theta.size() + 1] = params.log_gamma;
  return flat;
}

ModelParams unpack(const Eigen::VectorXd& flat) {
  ModelParams p;
  p.theta = flat.head(flat.size() - 2);
  p.log_lambda = flat[flat.size() - 2];
  p.log_gamma = flat[flat.size() - 1];
  return p;
}

}  // namespace bsid
