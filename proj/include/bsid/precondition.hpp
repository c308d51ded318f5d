#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bsid/data.hpp"
#include "bsid/model.hpp"

namespace bsid {

/// Adam settings for the sampler-initialization run.
struct PreconditionConfig {
  int iterations = 3000;
  double learning_rate = 1e-2;
  double l1_weight = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool l1_on_closure = false;  // closure weights are excluded from the L1 term
};

/// Plain Adam with bias correction; exposed so the moment updates can be
/// checked against hand-computed iterations.
class AdamOptimizer {
 public:
  AdamOptimizer(int dim, double learning_rate, double beta1, double beta2, double epsilon);

  /// Returns the update to subtract from the parameters.
  Eigen::VectorXd step(const Eigen::VectorXd& gradient);

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct PreconditionTraceRow {
  int iteration;
  double objective;
  double reconstruction;  // mean squared reconstruction residual per pair
  double l1;
};

struct PreconditionResult {
  ModelParams params;
  double final_mse = 0.0;  // per-scalar mean squared residual at the returned theta
  std::vector<PreconditionTraceRow> trace;
};

/// L1-regularized reconstruction objective minimized by precondition():
///   L(theta) = (1/n) sum_i ||x_end_i - h_theta(x_start_i)||^2
///            + beta/(n D) ||theta||_1,
/// i.e. the misfit averaged per pair and the L1 term averaged per scalar
/// observation, with the L1 block restricted per l1_on_closure. Returns +inf
/// when any segment diverges.
double precondition_objective(const ModelSpec& spec, const Eigen::VectorXd& theta,
                              const Dataset& dataset, const PreconditionConfig& config);

/// Adam minimization of the objective above, starting from zero dictionary
/// coefficients (and freshly initialized closure weights). Returns theta at
/// the final iterate, log lambda = 0 and log gamma = init_gamma(mse). If an
/// iterate diverges the update is halved up to 10 times, then skipped.
PreconditionResult precondition(const ModelSpec& spec, const Dataset& dataset,
                                const PreconditionConfig& config);

/// Empirical initialization of log gamma from the preconditioning residuals:
/// -log(mse), capped at 6 so gamma_init never exceeds e^6.
double init_gamma(double residual_mse);

void save_trace_csv(std::ostream& out, const std::vector<PreconditionTraceRow>& trace);
void save_trace_csv_file(const std::string& path, const std::vector<PreconditionTraceRow>& trace);

}  // namespace bsid
