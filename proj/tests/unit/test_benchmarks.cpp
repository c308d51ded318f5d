#include <doctest.h>

#include <cmath>

#include "bsid/benchmarks.hpp"
#include "helpers.hpp"

using namespace bsid;

namespace {

// Second, independent transcription of the glycolysis equations, written
// directly from the published model form with N1 and A2 spelled out.
Eigen::VectorXd glycolysis_reference(const Eigen::VectorXd& s) {
  const double J0 = 2.5, k1 = 100.0, k2 = 6.0, k3 = 16.0, k4 = 100.0, k5 = 1.28, k6 = 12.0;
  const double k = 1.8, kappa = 13.0, q = 4.0, KI = 0.52, phi = 0.1, N = 1.0, A = 4.0;
  const double S1 = s[0], S2 = s[1], S3 = s[2], S4 = s[3], N2 = s[4], A3 = s[5], S4ex = s[6];
  const double N1 = N - N2;
  const double A2 = A - A3;
  const double hill = 1.0 / (1.0 + std::pow(A3 / KI, q));
  Eigen::VectorXd f(7);
  f[0] = J0 - k1 * S1 * A3 * hill;
  f[1] = 2.0 * k1 * S1 * A3 * hill - k2 * S2 * N1 - k6 * S2 * N2;
  f[2] = k2 * S2 * N1 - k3 * S3 * A2;
  f[3] = k3 * S3 * A2 - k4 * S4 * N2 - kappa * (S4 - S4ex);
  f[4] = k2 * S2 * N1 - k4 * S4 * N2 - k6 * S2 * N2;
  f[5] = -2.0 * k1 * S1 * A3 * hill + 2.0 * k3 * S3 * A2 - k5 * A3;
  f[6] = phi * kappa * (S4 - S4ex) - k * S4ex;
  return f;
}

}  // namespace

TEST_CASE("cubic oscillator truth at (2, 0)") {
  const Eigen::VectorXd f =
      exact_rhs(BenchmarkSystem::cubic_oscillator, Eigen::Vector2d(2.0, 0.0), 0.0);
  CHECK(f[0] == doctest::Approx(-0.8).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(-16.0).epsilon(1e-14));
}

TEST_CASE("pendulum equilibrium at the origin") {
  const Eigen::VectorXd f =
      exact_rhs(BenchmarkSystem::damped_pendulum, Eigen::Vector2d(0.0, 0.0), 0.0);
  CHECK(f.norm() == 0.0);
}

TEST_CASE("lotka-volterra truth produces the classic cycle signs") {
  const Eigen::VectorXd f =
      exact_rhs(BenchmarkSystem::lotka_volterra, Eigen::Vector2d(5.0, 5.0), 0.0);
  // prey grows (predation still weak), predators grow (plenty of prey)
  CHECK(f[0] == doctest::Approx(5.0 - 0.1 * 25.0).epsilon(1e-14));
  CHECK(f[1] == doctest::Approx(0.75 * 25.0 - 1.5 * 5.0).epsilon(1e-14));
}

TEST_CASE("glycolysis truth matches an independent transcription") {
  Rng rng(66);
  Eigen::VectorXd x0(7);
  x0 << 0.5, 1.9, 0.18, 0.15, 0.16, 0.1, 0.064;
  CHECK((exact_rhs(BenchmarkSystem::glycolysis, x0, 0.0) - glycolysis_reference(x0))
            .lpNorm<Eigen::Infinity>() < 1e-12);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(7);
    for (int j = 0; j < 7; ++j) x[j] = 0.05 + 2.0 * rng.uniform();
    CHECK((exact_rhs(BenchmarkSystem::glycolysis, x, 0.0) - glycolysis_reference(x))
              .lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("zero noise level means clean equals noisy") {
  BenchmarkRecipe recipe = benchmark_recipe("cubic_oscillator");
  recipe.pair_count = 40;
  const GeneratedData data = generate(recipe, 3);
  CHECK(data.clean.states == data.noisy.states);
  CHECK(data.clean.times == data.noisy.times);
}

TEST_CASE("generation is bit-reproducible for a fixed seed") {
  BenchmarkRecipe recipe = benchmark_recipe("lotka_volterra");
  recipe.pair_count = 60;
  const GeneratedData a = generate(recipe, 5);
  const GeneratedData b = generate(recipe, 5);
  CHECK(a.clean.states == b.clean.states);
  CHECK(a.noisy.states == b.noisy.states);
  const GeneratedData c = generate(recipe, 6);
  CHECK(a.noisy.states != c.noisy.states);
}

TEST_CASE("regular sampling produces the documented grid") {
  BenchmarkRecipe recipe = benchmark_recipe("cubic_oscillator");
  const GeneratedData data = generate(recipe, 1);
  REQUIRE(data.clean.length() == 301);  // n = 300 pairs
  CHECK(data.clean.times[0] == 0.0);
  CHECK(data.clean.times[300] == doctest::Approx(20.0).epsilon(1e-12));
  const double dt = data.clean.times[1] - data.clean.times[0];
  CHECK(dt == doctest::Approx(20.0 / 300.0).epsilon(1e-12));
  CHECK(data.clean.states(0, 0) == 2.0);
  CHECK(data.clean.states(0, 1) == 0.0);
}

TEST_CASE("irregular sampling stays inside the span with varying gaps") {
  BenchmarkRecipe recipe = benchmark_recipe("lotka_volterra");
  recipe.pair_count = 200;
  const GeneratedData data = generate(recipe, 9);
  REQUIRE(data.clean.length() == 201);
  double min_gap = 1e9, max_gap = 0.0;
  for (int i = 0; i + 1 < 201; ++i) {
    const double gap = data.clean.times[i + 1] - data.clean.times[i];
    CHECK(gap > 0.0);
    min_gap = std::min(min_gap, gap);
    max_gap = std::max(max_gap, gap);
  }
  CHECK(max_gap > 2.0 * min_gap);
  CHECK(data.clean.times[200] <= 25.0);
}

TEST_CASE("lotka-volterra trajectory stays componentwise positive") {
  BenchmarkRecipe recipe = benchmark_recipe("lotka_volterra");
  recipe.pair_count = 400;
  const GeneratedData data = generate(recipe, 4);
  CHECK(data.clean.states.minCoeff() > 0.0);
}

TEST_CASE("pendulum oscillation amplitude decays") {
  BenchmarkRecipe recipe = benchmark_recipe("damped_pendulum");
  recipe.regular_sampling = true;
  recipe.pair_count = 2000;
  const GeneratedData data = generate(recipe, 2);
  // successive |x1| peaks are non-increasing
  std::vector<double> peaks;
  for (int i = 1; i + 1 < data.clean.length(); ++i) {
    const double prev = std::abs(data.clean.states(i - 1, 0));
    const double here = std::abs(data.clean.states(i, 0));
    const double next = std::abs(data.clean.states(i + 1, 0));
    if (here >= prev && here >= next && here > 0.5) peaks.push_back(here);
  }
  REQUIRE(peaks.size() >= 4);
  for (size_t i = 1; i < peaks.size(); ++i) CHECK(peaks[i] <= peaks[i - 1] + 1e-9);
}

TEST_CASE("glycolysis trajectory stays positive over the training window") {
  BenchmarkRecipe recipe = benchmark_recipe("glycolysis");
  recipe.pair_count = 500;
  const GeneratedData data = generate(recipe, 7);
  CHECK(data.clean.states.minCoeff() > 0.0);
  CHECK(data.clean.names[0] == "S1");
  CHECK(data.clean.names[6] == "S4ex");
}

TEST_CASE("unknown recipe id lists the known ones") {
  CHECK_THROWS_WITH_AS(benchmark_recipe("nope"), doctest::Contains("cubic_oscillator"),
                       std::invalid_argument);
}

TEST_CASE("fitting specs expose the documented parameter counts") {
  const Eigen::VectorXd sigma7 = Eigen::VectorXd::Ones(7);
  CHECK(fitting_spec(benchmark_recipe("cubic_oscillator"), sigma7).parameter_count() == 20);
  CHECK(fitting_spec(benchmark_recipe("lotka_volterra"), sigma7).parameter_count() == 4);
  CHECK(fitting_spec(benchmark_recipe("damped_pendulum"), sigma7).parameter_count() == 6);
  // 9 dictionary coefficients + 481 network weights
  CHECK(fitting_spec(benchmark_recipe("pendulum_hybrid"), sigma7).parameter_count() == 490);
  CHECK(fitting_spec(benchmark_recipe("glycolysis"), sigma7).parameter_count() == 14);
}

TEST_CASE("hybrid pendulum mask matches the reduced second equation") {
  const ModelSpec spec = fitting_spec(benchmark_recipe("pendulum_hybrid"), Eigen::VectorXd::Ones(2));
  // eq1 keeps all six 2nd-order features
  for (int k = 0; k < 6; ++k) CHECK(spec.masked(0, k));
  // eq2 keeps x2, x1*x2, x2^2 only
  int kept = 0;
  for (int k = 0; k < 6; ++k) kept += spec.masked(1, k);
  CHECK(kept == 3);
  CHECK(spec.closure.has_value());
  CHECK(spec.closure->input_indices() == std::vector<int>{0});
  CHECK(spec.closure->output_indices() == std::vector<int>{1});
}
