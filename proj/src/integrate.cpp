#include "bsid/integrate.hpp"

#include <cmath>
#include <stdexcept>

namespace bsid {

namespace {

bool all_finite(const Eigen::Ref<const Eigen::VectorXd>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return false;
  }
  return true;
}

}  // namespace

Eigen::VectorXd rk4_step(const ModelSpec& spec, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& x, double t, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  EvalWorkspace ws = make_workspace(spec);
  bind_parameters(spec, theta, ws);
  SegmentPlan plan{t, dt, 1};
  SegmentTape tape;
  return integrate_segment_bound(spec, x, plan, &tape, ws).x_end;
}

SegmentResult integrate_segment_bound(const ModelSpec& spec, const Eigen::VectorXd& x0,
                                      const SegmentPlan& plan, SegmentTape* tape,
                                      EvalWorkspace& ws) {
  if (!plan.valid()) throw std::invalid_argument("integrate_segment: invalid segment plan");
  const int D = spec.dimension;
  const int N = plan.steps;
  const double dt = plan.dt();

  SegmentTape local;
  SegmentTape& tp = tape ? *tape : local;
  tp.resize(D, N);
  tp.t0 = plan.t0;
  tp.dt = dt;

  SegmentResult result;
  result.x_end.resize(D);

  tp.states.col(0) = x0;
  Eigen::VectorXd stage_x(D);
  for (int n = 0; n < N; ++n) {
    const double t = plan.t0 + n * dt;
    auto x = tp.states.col(n);
    bool ok = eval_rhs_bound(spec, x, t, tp.k1.col(n), ws);
    stage_x = x + (0.5 * dt) * tp.k1.col(n);
    ok = ok && eval_rhs_bound(spec, stage_x, t + 0.5 * dt, tp.k2.col(n), ws);
    stage_x = x + (0.5 * dt) * tp.k2.col(n);
    ok = ok && eval_rhs_bound(spec, stage_x, t + 0.5 * dt, tp.k3.col(n), ws);
    stage_x = x + dt * tp.k3.col(n);
    ok = ok && eval_rhs_bound(spec, stage_x, t + dt, tp.k4.col(n), ws);
    tp.states.col(n + 1) =
        x + (dt / 6.0) * (tp.k1.col(n) + 2.0 * tp.k2.col(n) + 2.0 * tp.k3.col(n) + tp.k4.col(n));
    if (!ok || !all_finite(tp.states.col(n + 1))) {
      result.finite = false;
      result.failed_step = n;
      result.x_end = tp.states.col(n + 1);
      return result;
    }
  }
  result.x_end = tp.states.col(N);
  return result;
}

SegmentResult integrate_segment(const ModelSpec& spec, const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& x0, const SegmentPlan& plan,
                                SegmentTape* tape) {
  EvalWorkspace ws = make_workspace(spec);
  bind_parameters(spec, theta, ws);
  return integrate_segment_bound(spec, x0, plan, tape, ws);
}

void segment_vjp_bound(const ModelSpec& spec, const SegmentTape& tape,
                       const Eigen::VectorXd& endpoint_cotangent,
                       Eigen::Ref<Eigen::VectorXd> x0_bar, Eigen::Ref<Eigen::VectorXd> theta_bar,
                       EvalWorkspace& ws) {
  const int D = spec.dimension;
  if (tape.dimension != D || tape.steps < 1)
    throw std::invalid_argument("segment_vjp: tape does not match spec");
  if (endpoint_cotangent.size() != D)
    throw std::invalid_argument("segment_vjp: cotangent dimension mismatch");

  const double dt = tape.dt;
  Eigen::VectorXd x_bar = endpoint_cotangent;
  Eigen::VectorXd kb1(D), kb2(D), kb3(D), kb4(D);
  Eigen::VectorXd stage_x(D), stage_bar(D);

  for (int n = tape.steps - 1; n >= 0; --n) {
    const double t = tape.t0 + n * dt;
    const auto x = tape.states.col(n);

    // x_{n+1} = x_n + dt/6 (k1 + 2 k2 + 2 k3 + k4)
    kb1 = (dt / 6.0) * x_bar;
    kb2 = (dt / 3.0) * x_bar;
    kb3 = (dt / 3.0) * x_bar;
    kb4 = (dt / 6.0) * x_bar;

    // k4 = f(x + dt k3)
    stage_x = x + dt * tape.k3.col(n);
    vjp_rhs_bound(spec, stage_x, t + dt, kb4, stage_bar, theta_bar, ws);
    x_bar += stage_bar;
    kb3 += dt * stage_bar;

    // k3 = f(x + dt/2 k2)
    stage_x = x + (0.5 * dt) * tape.k2.col(n);
    vjp_rhs_bound(spec, stage_x, t + 0.5 * dt, kb3, stage_bar, theta_bar, ws);
    x_bar += stage_bar;
    kb2 += (0.5 * dt) * stage_bar;

    // k2 = f(x + dt/2 k1)
    stage_x = x + (0.5 * dt) * tape.k1.col(n);
    vjp_rhs_bound(spec, stage_x, t + 0.5 * dt, kb2, stage_bar, theta_bar, ws);
    x_bar += stage_bar;
    kb1 += (0.5 * dt) * stage_bar;

    // k1 = f(x)
    vjp_rhs_bound(spec, x, t, kb1, stage_bar, theta_bar, ws);
    x_bar += stage_bar;
  }
  x0_bar = x_bar;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> segment_vjp(const ModelSpec& spec,
                                                        const Eigen::VectorXd& theta,
                                                        const SegmentTape& tape,
                                                        const Eigen::VectorXd& endpoint_cotangent) {
  EvalWorkspace ws = make_workspace(spec);
  bind_parameters(spec, theta, ws);
  Eigen::VectorXd x0_bar(spec.dimension);
  Eigen::VectorXd theta_bar = Eigen::VectorXd::Zero(spec.parameter_count());
  segment_vjp_bound(spec, tape, endpoint_cotangent, x0_bar, theta_bar, ws);
  return {std::move(x0_bar), std::move(theta_bar)};
}

}  // namespace bsid
