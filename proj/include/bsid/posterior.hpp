#pragma once

#include <Eigen/Dense>
#include <limits>

#include "bsid/data.hpp"
#include "bsid/model.hpp"

namespace bsid {

/// Gamma hyper-priors on log(lambda) and log(gamma).
struct HyperPriors {
  double alpha1 = 1.0;
  double beta1 = 1.0;
  double alpha2 = 1.0;
  double beta2 = 1.0;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Unnormalized log-posterior over Theta = (theta, log lambda, log gamma):
///   sum_i [ D/2 (log gamma - log 2 pi) - gamma/2 ||x_end_i - h(x_start_i)||^2 ]
/// + sum_p [ log(lambda / 2) - lambda |theta_p| ]
/// + prior(log lambda; alpha1, beta1) + prior(log gamma; alpha2, beta2),
/// where prior(u) is the Gamma log-density in u on u > 0 and a smooth
/// quadratic barrier -u^2/2 on u <= 0, keeping the chain unconstrained.
/// Returns -inf when any segment integration diverges.
double log_posterior(const ModelSpec& spec, const ModelParams& params, const Dataset& dataset,
                     const HyperPriors& hyper);

struct PosteriorGradient {
  double value = kNegInf;
  bool finite = false;
  Eigen::VectorXd grad;  // length P + 2, ordered (theta..., log lambda, log gamma)
};

/// Value and exact gradient in one pass (one forward + one reverse sweep per
/// observation pair). Laplace subgradient at theta_p = 0 is taken as 0.
PosteriorGradient grad_log_posterior(const ModelSpec& spec, const ModelParams& params,
                                     const Dataset& dataset, const HyperPriors& hyper);

/// Gamma-on-log prior density used above, exposed for direct testing.
double log_prior_log_precision(double u, double alpha, double beta);
double log_prior_log_precision_grad(double u, double alpha, double beta);

/// Flat packing of Theta used by the sampler: [theta..., log lambda, log gamma].
Eigen::VectorXd pack(const ModelParams& params);
ModelParams unpack(const Eigen::VectorXd& flat);

}  // namespace bsid
