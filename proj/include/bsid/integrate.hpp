#pragma once

#include <Eigen/Dense>

#include "bsid/model.hpp"

namespace bsid {

/// One observation interval integrated with `steps` equal RK4 sub-steps.
/// dt is always derived as delta_t / steps.
struct SegmentPlan {
  double t0 = 0.0;
  double delta_t = 0.0;
  int steps = 1;

  double dt() const { return delta_t / steps; }
  bool valid() const { return steps >= 1 && delta_t > 0.0; }
};

/// Forward record of one segment: the state entering every sub-step and the
/// four RK stage slopes, enough to replay the forward pass bit-exactly and to
/// drive the exact reverse pass.
struct SegmentTape {
  int dimension = 0;
  int steps = 0;
  double t0 = 0.0;
  double dt = 0.0;
  Eigen::MatrixXd states;  // D x (steps + 1)
  Eigen::MatrixXd k1, k2, k3, k4;  // D x steps

  void resize(int dim, int n_steps) {
    dimension = dim;
    steps = n_steps;
    if (states.rows() != dim || states.cols() < n_steps + 1) states.resize(dim, n_steps + 1);
    if (k1.rows() != dim || k1.cols() < n_steps) {
      k1.resize(dim, n_steps);
      k2.resize(dim, n_steps);
      k3.resize(dim, n_steps);
      k4.resize(dim, n_steps);
    }
  }
};

struct SegmentResult {
  Eigen::VectorXd x_end;
  bool finite = true;
  int failed_step = -1;  // first sub-step whose state or stages went non-finite
};

/// Classical RK4 update x(t) -> x(t + dt).
Eigen::VectorXd rk4_step(const ModelSpec& spec, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& x, double t, double dt);

/// Integrates one segment, recording the tape when `tape` is non-null.
/// Requires bind_parameters(spec, theta, ws) to have run.
SegmentResult integrate_segment_bound(const ModelSpec& spec, const Eigen::VectorXd& x0,
                                      const SegmentPlan& plan, SegmentTape* tape,
                                      EvalWorkspace& ws);

SegmentResult integrate_segment(const ModelSpec& spec, const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& x0, const SegmentPlan& plan,
                                SegmentTape* tape = nullptr);

/// Exact reverse-mode differentiation of the composed RK4 map recorded in
/// `tape`: writes cotangent^T dx_end/dx0 into x0_bar and accumulates
/// cotangent^T dx_end/dtheta into theta_bar. The gradient is of the discrete
/// endpoint the forward pass actually produced, not the continuous-time limit.
void segment_vjp_bound(const ModelSpec& spec, const SegmentTape& tape,
                       const Eigen::VectorXd& endpoint_cotangent,
                       Eigen::Ref<Eigen::VectorXd> x0_bar, Eigen::Ref<Eigen::VectorXd> theta_bar,
                       EvalWorkspace& ws);

std::pair<Eigen::VectorXd, Eigen::VectorXd> segment_vjp(const ModelSpec& spec,
                                                        const Eigen::VectorXd& theta,
                                                        const SegmentTape& tape,
                                                        const Eigen::VectorXd& endpoint_cotangent);

}  // namespace bsid
