#include "bsid/precondition.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "bsid/integrate.hpp"
#include "bsid/rng.hpp"

namespace bsid {

AdamOptimizer::AdamOptimizer(int dim, double learning_rate, double beta1, double beta2,
                             double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon),
      m_(Eigen::VectorXd::Zero(dim)), v_(Eigen::VectorXd::Zero(dim)) {}

Eigen::VectorXd AdamOptimizer::step(const Eigen::VectorXd& gradient) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * gradient;
  v_ = beta2_ * v_ + (1.0 - beta2_) * gradient.cwiseAbs2();
  const double m_corr = 1.0 - std::pow(beta1_, t_);
  const double v_corr = 1.0 - std::pow(beta2_, t_);
  return ((lr_ / m_corr) * m_.array() / ((v_ / v_corr).array().sqrt() + eps_)).matrix();
}

namespace {

struct Objective {
  double value = std::numeric_limits<double>::infinity();
  double reconstruction = 0.0;  // (1/n) sum ||r_i||^2
  double l1 = 0.0;
  bool finite = false;
};

int l1_block_size(const ModelSpec& spec, const PreconditionConfig& config) {
  return config.l1_on_closure ? spec.parameter_count() : spec.dictionary_parameter_count();
}

Objective evaluate(const ModelSpec& spec, const Eigen::VectorXd& theta, const Dataset& dataset,
                   const PreconditionConfig& config, Eigen::VectorXd* grad, EvalWorkspace& ws,
                   SegmentTape& tape) {
  Objective obj;
  bind_parameters(spec, theta, ws);
  if (grad) grad->setZero();

  const auto n = static_cast<double>(dataset.pairs.size());
  Eigen::VectorXd residual(spec.dimension);
  Eigen::VectorXd x0_bar(spec.dimension);
  double sq = 0.0;
  for (const auto& pair : dataset.pairs) {
    const SegmentResult res =
        integrate_segment_bound(spec, pair.x_start, pair.plan, grad ? &tape : nullptr, ws);
    if (!res.finite) return obj;
    residual = pair.x_end - res.x_end;
    sq += residual.squaredNorm();
    if (grad) {
      residual *= -2.0 / n;
      segment_vjp_bound(spec, tape, residual, x0_bar, *grad, ws);
    }
  }

  const int nl1 = l1_block_size(spec, config);
  obj.reconstruction = sq / n;
  obj.l1 = theta.head(nl1).lpNorm<1>();
  // the L1 term is weighted per scalar observation (n D), matching the
  // per-component scale of the mean reconstruction term
  const double w = config.l1_weight / (n * spec.dimension);
  obj.value = obj.reconstruction + w * obj.l1;
  obj.finite = std::isfinite(obj.value);
  if (grad && obj.finite) {
    for (int p = 0; p < nl1; ++p) {
      if (theta[p] > 0.0) (*grad)[p] += w;
      else if (theta[p] < 0.0) (*grad)[p] -= w;
    }
  }
  return obj;
}

}  // namespace

double precondition_objective(const ModelSpec& spec, const Eigen::VectorXd& theta,
                              const Dataset& dataset, const PreconditionConfig& config) {
  EvalWorkspace ws = make_workspace(spec);
  SegmentTape tape;
  return evaluate(spec, theta, dataset, config, nullptr, ws, tape).value;
}

double init_gamma(double residual_mse) {
  if (residual_mse < 0.0) throw std::invalid_argument("init_gamma: mse must be >= 0");
  if (residual_mse == 0.0) return 6.0;
  return std::min(-std::log(residual_mse), 6.0);
}

PreconditionResult precondition(const ModelSpec& spec, const Dataset& dataset,
                                const PreconditionConfig& config) {
  if (config.iterations < 1) throw std::invalid_argument("precondition: iterations must be >= 1");
  if (!(config.learning_rate > 0.0))
    throw std::invalid_argument("precondition: learning rate must be positive");
  if (dataset.pairs.empty()) throw std::invalid_argument("precondition: dataset is empty");

  const int P = spec.parameter_count();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(P);
  if (spec.closure) {
    theta.tail(spec.closure->parameter_count()) =
        spec.closure->init_weights(derive_seed(config.seed, "mlp-init"));
  }

  EvalWorkspace ws = make_workspace(spec);
  SegmentTape tape;
  Eigen::VectorXd grad(P);
  AdamOptimizer adam(P, config.learning_rate, config.beta1, config.beta2, config.epsilon);

  Objective obj = evaluate(spec, theta, dataset, config, &grad, ws, tape);
  if (!obj.finite) {
    throw std::runtime_error(
        "precondition: objective diverges at the starting point; check data scaling");
  }

  PreconditionResult result;
  result.trace.reserve(static_cast<size_t>(config.iterations) + 1);
  result.trace.push_back({0, obj.value, obj.reconstruction, obj.l1});

  Eigen::VectorXd candidate(P);
  Eigen::VectorXd grad_trial(P);
  for (int it = 1; it <= config.iterations; ++it) {
    Eigen::VectorXd update = adam.step(grad);
    Objective trial;
    // halve a diverging update up to 10 times, then skip it
    for (int attempt = 0; attempt <= 10; ++attempt) {
      candidate = theta - update;
      trial = evaluate(spec, candidate, dataset, config, &grad_trial, ws, tape);
      if (trial.finite) break;
      update *= 0.5;
    }
    if (trial.finite) {
      theta = candidate;
      obj = trial;
      grad.swap(grad_trial);
    }
    result.trace.push_back({it, obj.value, obj.reconstruction, obj.l1});
  }

  result.final_mse = obj.reconstruction / spec.dimension;  // per-scalar residual variance
  result.params.theta = theta;
  result.params.log_lambda = 0.0;
  result.params.log_gamma = init_gamma(result.final_mse);
  return result;
}

void save_trace_csv(std::ostream& out, const std::vector<PreconditionTraceRow>& trace) {
  out << "iteration,objective,reconstruction,l1\n";
  for (const auto& row : trace) {
    out << row.iteration << "," << format_double(row.objective) << ","
        << format_double(row.reconstruction) << "," << format_double(row.l1) << "\n";
  }
}

void save_trace_csv_file(const std::string& path, const std::vector<PreconditionTraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  save_trace_csv(out, trace);
}

}  // namespace bsid
