#include "bsid/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bsid/integrate.hpp"
#include "bsid/rng.hpp"

namespace bsid {

namespace {

// Cubic oscillator: dx1 = a x1^3 + b x2^3, dx2 = c x1^3 + d x2^3.
constexpr double kOscA = -0.1, kOscB = 2.0, kOscC = -2.0, kOscD = -0.1;

// Lotka-Volterra in signed-coefficient form: dx1 = a x1 + b x1 x2,
// dx2 = c x2 + d x1 x2. These are also the dictionary coefficients a fit
// should recover.
constexpr double kLvA = 1.0, kLvB = -0.1, kLvC = -1.5, kLvD = 0.75;

// Damped pendulum: dx1 = g x2, dx2 = -a x2 - b sin(x1).
constexpr double kPenG = 1.0, kPenA = 0.2, kPenB = 8.91;

// Glycolysis ground truth (mM, min), canonical scalar order.
constexpr std::array<double, kGlycolysisScalarCount> kGlycTruth = {
    2.5, 100.0, 6.0, 16.0, 100.0, 1.28, 12.0, 1.8, 13.0, 4.0, 0.52, 0.1, 1.0, 4.0};

Eigen::VectorXd glycolysis_truth_rhs(const Eigen::VectorXd& x) {
  // evaluated through the calibration spec with unit scales
  static const ModelSpec spec = ModelSpec::glycolysis_calibration(Eigen::VectorXd::Ones(7));
  Eigen::VectorXd theta(kGlycolysisScalarCount);
  for (int i = 0; i < kGlycolysisScalarCount; ++i) theta[i] = std::log(kGlycTruth[static_cast<size_t>(i)]);
  return eval_rhs(spec, theta, x, 0.0);
}

}  // namespace

Eigen::VectorXd exact_rhs(BenchmarkSystem system, const Eigen::VectorXd& x, double t) {
  (void)t;
  switch (system) {
    case BenchmarkSystem::cubic_oscillator: {
      Eigen::VectorXd f(2);
      const double c1 = x[0] * x[0] * x[0];
      const double c2 = x[1] * x[1] * x[1];
      f[0] = kOscA * c1 + kOscB * c2;
      f[1] = kOscC * c1 + kOscD * c2;
      return f;
    }
    case BenchmarkSystem::lotka_volterra: {
      Eigen::VectorXd f(2);
      f[0] = kLvA * x[0] + kLvB * x[0] * x[1];
      f[1] = kLvC * x[1] + kLvD * x[0] * x[1];
      return f;
    }
    case BenchmarkSystem::damped_pendulum:
    case BenchmarkSystem::pendulum_hybrid: {
      Eigen::VectorXd f(2);
      f[0] = kPenG * x[1];
      f[1] = -kPenA * x[1] - kPenB * std::sin(x[0]);
      return f;
    }
    case BenchmarkSystem::glycolysis:
      return glycolysis_truth_rhs(x);
  }
  throw std::logic_error("exact_rhs: unknown system");
}

std::vector<TrueParameter> true_parameters(BenchmarkSystem system) {
  switch (system) {
    case BenchmarkSystem::cubic_oscillator:
      return {{"a17", kOscA}, {"a110", kOscB}, {"a27", kOscC}, {"a210", kOscD}};
    case BenchmarkSystem::lotka_volterra:
      return {{"alpha", kLvA}, {"beta", kLvB}, {"gamma", kLvC}, {"delta", kLvD}};
    case BenchmarkSystem::damped_pendulum:
    case BenchmarkSystem::pendulum_hybrid:
      return {{"gamma", kPenG}, {"alpha", kPenA}, {"beta", kPenB}};
    case BenchmarkSystem::glycolysis: {
      std::vector<TrueParameter> out;
      for (int i = 0; i < kGlycolysisScalarCount; ++i) {
        out.push_back({glycolysis_scalar_names()[static_cast<size_t>(i)], kGlycTruth[static_cast<size_t>(i)]});
      }
      return out;
    }
  }
  throw std::logic_error("true_parameters: unknown system");
}

std::vector<std::string> benchmark_ids() {
  return {"cubic_oscillator", "cubic_oscillator_noisy", "lotka_volterra", "damped_pendulum",
          "pendulum_hybrid", "glycolysis"};
}

BenchmarkRecipe benchmark_recipe(const std::string& id) {
  BenchmarkRecipe r;
  r.id = id;
  if (id == "cubic_oscillator") {
    // 300 pairs over [0, 20]; the pair count is authoritative and the spacing
    // (~0.0667) follows from it
    r.system = BenchmarkSystem::cubic_oscillator;
    r.description = "cubic oscillator, low-resolution noise-free dictionary learning";
    r.x0 = Eigen::Vector2d(2.0, 0.0);
    r.t_begin = 0.0;
    r.t_end = 20.0;
    r.regular_sampling = true;
    r.pair_count = 300;
    r.noise_level = 0.0;
    r.dt_target = 0.01;
    r.state_names = {"x1", "x2"};
  } else if (id == "cubic_oscillator_noisy") {
    r.system = BenchmarkSystem::cubic_oscillator;
    r.description = "cubic oscillator, 1000 pairs at dt=0.02 with absolute noise sd 0.02";
    r.x0 = Eigen::Vector2d(2.0, 0.0);
    r.t_begin = 0.0;
    r.t_end = 20.0;
    r.regular_sampling = true;
    r.pair_count = 1000;
    r.noise_level = 0.02;
    r.noise_absolute = true;
    r.dt_target = 0.01;
    r.state_names = {"x1", "x2"};
  } else if (id == "lotka_volterra") {
    r.system = BenchmarkSystem::lotka_volterra;
    r.description = "predator-prey calibration, irregular sampling, 3% noise";
    r.x0 = Eigen::Vector2d(5.0, 5.0);
    r.t_begin = 0.0;
    r.t_end = 25.0;
    r.regular_sampling = false;
    r.pair_count = 1000;
    r.noise_level = 0.03;
    r.dt_target = 0.01;
    r.state_names = {"x1", "x2"};
  } else if (id == "damped_pendulum" || id == "pendulum_hybrid") {
    r.system = id == "damped_pendulum" ? BenchmarkSystem::damped_pendulum
                                       : BenchmarkSystem::pendulum_hybrid;
    r.description = id == "damped_pendulum"
                        ? "damped pendulum with a deliberately incomplete linear dictionary"
                        : "damped pendulum, reduced dictionary plus tanh-MLP closure";
    r.x0 = Eigen::Vector2d(-1.193, -3.876);
    r.t_begin = 0.0;
    r.t_end = 20.0;
    r.regular_sampling = false;
    r.pair_count = 500;
    r.noise_level = 0.0;
    r.dt_target = 0.01;
    r.state_names = {"x1", "x2"};
  } else if (id == "glycolysis") {
    r.system = BenchmarkSystem::glycolysis;
    r.description = "yeast glycolysis known-form calibration, irregular sampling, 2% noise";
    r.x0 = Eigen::VectorXd(7);
    r.x0 << 0.5, 1.9, 0.18, 0.15, 0.16, 0.1, 0.064;
    r.t_begin = 0.0;
    r.t_end = 5.0;
    r.regular_sampling = false;
    r.pair_count = 1000;
    r.noise_level = 0.02;
    r.dt_target = 0.002;
    r.state_names = {"S1", "S2", "S3", "S4", "N2", "A3", "S4ex"};
  } else {
    std::string known;
    for (const auto& k : benchmark_ids()) known += " " + k;
    throw std::invalid_argument("unknown benchmark '" + id + "'; known:" + known);
  }
  return r;
}

namespace {

// Reference integration of the exact dynamics to a requested time point,
// fine-stepped RK4 (dt <= 1e-4).
Eigen::VectorXd advance_exact(BenchmarkSystem system, Eigen::VectorXd x, double t0, double t1) {
  const double span = t1 - t0;
  if (span <= 0.0) return x;
  const int steps = std::max(1, static_cast<int>(std::ceil(span / 1e-4)));
  const double dt = span / steps;
  Eigen::VectorXd k1, k2, k3, k4;
  double t = t0;
  for (int n = 0; n < steps; ++n) {
    k1 = exact_rhs(system, x, t);
    k2 = exact_rhs(system, x + 0.5 * dt * k1, t + 0.5 * dt);
    k3 = exact_rhs(system, x + 0.5 * dt * k2, t + 0.5 * dt);
    k4 = exact_rhs(system, x + dt * k3, t + dt);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = t0 + (n + 1) * dt;
  }
  return x;
}

}  // namespace

GeneratedData generate(const BenchmarkRecipe& recipe, std::uint64_t seed) {
  if (recipe.pair_count < 1) throw std::invalid_argument("generate: pair_count must be >= 1");
  const int m = recipe.pair_count + 1;

  Eigen::VectorXd times(m);
  if (recipe.regular_sampling) {
    const double dt = (recipe.t_end - recipe.t_begin) / recipe.pair_count;
    for (int i = 0; i < m; ++i) times[i] = recipe.t_begin + i * dt;
  } else {
    // initial time plus sorted uniform draws over the span
    Rng rng(derive_seed(seed, "sample-times"));
    std::vector<double> draws(static_cast<size_t>(recipe.pair_count));
    for (auto& d : draws) {
      d = recipe.t_begin + (recipe.t_end - recipe.t_begin) * rng.uniform();
    }
    std::sort(draws.begin(), draws.end());
    times[0] = recipe.t_begin;
    for (int i = 0; i < recipe.pair_count; ++i) times[i + 1] = draws[static_cast<size_t>(i)];
    for (int i = 0; i + 1 < m; ++i) {
      if (!(times[i + 1] > times[i]))
        throw std::runtime_error("generate: drew duplicate sample times; change the seed");
    }
  }

  GeneratedData data;
  data.clean.times = times;
  data.clean.states.resize(m, recipe.x0.size());
  data.clean.names = recipe.state_names;
  Eigen::VectorXd x = recipe.x0;
  data.clean.states.row(0) = x.transpose();
  for (int i = 1; i < m; ++i) {
    x = advance_exact(recipe.system, x, times[i - 1], times[i]);
    if (!x.allFinite()) throw std::runtime_error("generate: reference integration diverged");
    data.clean.states.row(i) = x.transpose();
  }

  const std::uint64_t noise_seed = derive_seed(seed, "noise");
  data.noisy = recipe.noise_absolute
                   ? add_noise_absolute(data.clean, recipe.noise_level, noise_seed)
                   : add_noise(data.clean, recipe.noise_level, noise_seed);
  return data;
}

ModelSpec fitting_spec(const BenchmarkRecipe& recipe, const Eigen::VectorXd& sigma) {
  switch (recipe.system) {
    case BenchmarkSystem::cubic_oscillator: {
      // full 3rd-order dictionary, all 20 coefficients free
      return ModelSpec::dictionary(2, FeatureLibrary::polynomial(2, 3));
    }
    case BenchmarkSystem::lotka_volterra: {
      // dictionary restricted to exactly the active terms:
      // eq1: x1, x1*x2; eq2: x2, x1*x2
      ModelSpec spec = ModelSpec::dictionary(2, FeatureLibrary::polynomial(2, 2));
      std::fill(spec.mask.begin(), spec.mask.end(), 0);
      const auto k_of = [&](int e1, int e2) {
        for (int k = 0; k < spec.library.size(); ++k) {
          const auto& e = spec.library.feature(k).exponents;
          if (e[0] == e1 && e[1] == e2) return k;
        }
        throw std::logic_error("lv spec: feature lookup failed");
      };
      spec.set_mask(0, k_of(1, 0), true);
      spec.set_mask(0, k_of(1, 1), true);
      spec.set_mask(1, k_of(0, 1), true);
      spec.set_mask(1, k_of(1, 1), true);
      return spec;
    }
    case BenchmarkSystem::damped_pendulum: {
      // deliberately incomplete: polynomials up to 1st order only
      return ModelSpec::dictionary(2, FeatureLibrary::polynomial(2, 1));
    }
    case BenchmarkSystem::pendulum_hybrid: {
      // eq1 keeps the full 2nd-order row; eq2 keeps x2, x1*x2, x2^2 and gains
      // a 2x20 tanh closure reading x1
      ModelSpec spec = ModelSpec::dictionary(2, FeatureLibrary::polynomial(2, 2));
      for (int k = 0; k < spec.library.size(); ++k) {
        const auto& e = spec.library.feature(k).exponents;
        const bool keep = (e[0] == 0 && e[1] == 1) || (e[0] == 1 && e[1] == 1) ||
                          (e[0] == 0 && e[1] == 2);
        spec.set_mask(1, k, keep);
      }
      spec.closure = MlpClosure({0}, {1}, {20, 20});
      return spec;
    }
    case BenchmarkSystem::glycolysis:
      return ModelSpec::glycolysis_calibration(sigma);
  }
  throw std::logic_error("fitting_spec: unknown system");
}

}  // namespace bsid
