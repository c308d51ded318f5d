#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "bsid/data.hpp"
#include "bsid/model.hpp"

namespace bsid {

enum class BenchmarkSystem {
  cubic_oscillator,
  lotka_volterra,
  damped_pendulum,   // misspecified linear dictionary fit
  pendulum_hybrid,   // reduced dictionary + tanh-MLP closure
  glycolysis,
};

/// Everything needed to regenerate a training set: ground-truth dynamics,
/// initial condition, time span, sampling mode, noise model and the
/// integration defaults used when fitting.
struct BenchmarkRecipe {
  BenchmarkSystem system;
  std::string id;
  std::string description;
  Eigen::VectorXd x0;
  double t_begin = 0.0;
  double t_end = 0.0;
  bool regular_sampling = true;
  int pair_count = 0;          // n observation pairs (n + 1 samples)
  double noise_level = 0.0;
  bool noise_absolute = false; // absolute sd instead of sd-relative fraction
  double dt_target = 0.01;     // sub-step target for fitting and forecasting
  double hmc_step_size = 1e-3; // per-benchmark sampler step (see bench list)
  std::vector<std::string> state_names;
};

std::vector<std::string> benchmark_ids();
BenchmarkRecipe benchmark_recipe(const std::string& id);

/// Ground-truth derivative field of the named system.
Eigen::VectorXd exact_rhs(BenchmarkSystem system, const Eigen::VectorXd& x, double t);

/// Ground-truth parameter values, keyed for reporting.
struct TrueParameter {
  std::string name;
  double value;
};
std::vector<TrueParameter> true_parameters(BenchmarkSystem system);

struct GeneratedData {
  Trajectory clean;
  Trajectory noisy;
};

/// Integrates the exact dynamics at a fine reference step, samples per the
/// recipe (regular grid or sorted uniform draws), then applies the recipe's
/// noise. Bit-reproducible for a fixed seed.
GeneratedData generate(const BenchmarkRecipe& recipe, std::uint64_t seed);

/// The model specification this recipe is fitted with. Glycolysis wraps the
/// dataset scales into the spec, so sigma must be supplied.
ModelSpec fitting_spec(const BenchmarkRecipe& recipe, const Eigen::VectorXd& sigma);

}  // namespace bsid
