#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bsid/benchmarks.hpp"
#include "bsid/posterior.hpp"
#include "bsid/precondition.hpp"
#include "helpers.hpp"

using namespace bsid;

namespace {

Dataset dataset_from_trajectory(const Trajectory& traj, double dt_target) {
  return normalize(build_pairs(traj, dt_target));
}

}  // namespace

TEST_CASE("adam reproduces two hand-computed iterations on a 1d quadratic") {
  // f(x) = x^2/2 from x0 = 1 with lr 0.1 and default moments
  AdamOptimizer adam(1, 0.1, 0.9, 0.999, 1e-8);

  const double g1 = 1.0;
  const double m1 = 0.1 * g1, v1 = 0.001 * g1 * g1;
  const double mhat1 = m1 / (1.0 - 0.9), vhat1 = v1 / (1.0 - 0.999);
  const double step1 = 0.1 * mhat1 / (std::sqrt(vhat1) + 1e-8);
  const Eigen::VectorXd u1 = adam.step(Eigen::VectorXd::Constant(1, g1));
  CHECK(u1[0] == doctest::Approx(step1).epsilon(1e-15));
  const double x1 = 1.0 - u1[0];

  const double g2 = x1;
  const double m2 = 0.9 * m1 + 0.1 * g2, v2 = 0.999 * v1 + 0.001 * g2 * g2;
  const double mhat2 = m2 / (1.0 - 0.81), vhat2 = v2 / (1.0 - 0.999 * 0.999);
  const double step2 = 0.1 * mhat2 / (std::sqrt(vhat2) + 1e-8);
  const Eigen::VectorXd u2 = adam.step(Eigen::VectorXd::Constant(1, g2));
  CHECK(u2[0] == doctest::Approx(step2).epsilon(1e-14));
}

TEST_CASE("init_gamma follows the capped empirical rule") {
  CHECK(init_gamma(std::exp(-4.0)) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(init_gamma(std::exp(-10.0)) == 6.0);  // cap branch
  CHECK(init_gamma(1.0) == 0.0);
  CHECK(init_gamma(0.0) == 6.0);
  CHECK_THROWS_AS(init_gamma(-1.0), std::invalid_argument);
}

TEST_CASE("objective value matches an independently coded formula") {
  Rng rng(808);
  const ModelSpec spec = ModelSpec::dictionary(2, FeatureLibrary::polynomial(2, 2));
  Dataset ds;
  ds.dimension = 2;
  ds.sigma = Eigen::VectorXd::Ones(2);
  for (int i = 0; i < 5; ++i) {
    Dataset::Pair pair;
    pair.x_start = testutil::random_vector(rng, 2);
    pair.x_end = testutil::random_vector(rng, 2);
    pair.plan = SegmentPlan{0.0, 0.07, 2};
    ds.pairs.push_back(std::move(pair));
  }
  PreconditionConfig config;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd theta = testutil::random_vector(rng, spec.parameter_count(), 0.4);
    // independent transcription: mean squared endpoint misfit plus the
    // n-scaled L1 penalty
    double sum = 0.0;
    for (const auto& pair : ds.pairs) {
      const Eigen::VectorXd pred =
          integrate_segment(spec, theta, pair.x_start, pair.plan).x_end;
      sum += (pair.x_end - pred).squaredNorm();
    }
    double l1 = 0.0;
    for (int p = 0; p < theta.size(); ++p) l1 += std::abs(theta[p]);
    const double oracle =
        sum / ds.size() + config.l1_weight * l1 / (ds.size() * ds.dimension);
    const double value = precondition_objective(spec, theta, ds, config);
    CHECK(value == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("zero dynamics keeps theta pinned at the l1-favored origin") {
  // constant trajectory has zero spread, so build the pairs directly
  const ModelSpec spec = ModelSpec::dictionary(2, FeatureLibrary::polynomial(2, 2));
  Dataset ds;
  ds.dimension = 2;
  ds.sigma = Eigen::VectorXd::Ones(2);
  for (int i = 0; i < 20; ++i) {
    Dataset::Pair pair;
    pair.x_start = Eigen::Vector2d(0.6, -1.1);
    pair.x_end = pair.x_start;
    pair.plan = SegmentPlan{0.1 * i, 0.1, 2};
    ds.pairs.push_back(std::move(pair));
  }
  PreconditionConfig config;
  config.iterations = 500;
  const PreconditionResult res = precondition(spec, ds, config);
  CHECK(res.params.theta.lpNorm<Eigen::Infinity>() <= 1e-3);
  CHECK(res.final_mse <= 1e-12);
  CHECK(res.params.log_gamma == 6.0);
  CHECK(res.params.log_lambda == 0.0);
}

TEST_CASE("noise-free cubic oscillator preconditions to a small reconstruction error") {
  const BenchmarkRecipe recipe = benchmark_recipe("cubic_oscillator");
  const GeneratedData data = generate(recipe, 11);
  const Dataset ds = dataset_from_trajectory(data.noisy, recipe.dt_target);
  const ModelSpec spec = fitting_spec(recipe, ds.sigma);

  PreconditionConfig config;
  config.seed = 11;
  const PreconditionResult res = precondition(spec, ds, config);
  // threshold frozen from the first run of this configuration
  CHECK(res.final_mse < 1e-4);
  // the preconditioned point must give a finite log posterior
  const double logp = log_posterior(spec, res.params, ds, HyperPriors{});
  CHECK(std::isfinite(logp));
  // objective trend: the trailing mean cannot exceed the leading mean
  const auto& trace = res.trace;
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 500; ++i) head += trace[static_cast<size_t>(i)].objective;
  for (size_t i = trace.size() - 500; i < trace.size(); ++i) tail += trace[i].objective;
  CHECK(tail <= head);
}

TEST_CASE("trace csv has the documented columns") {
  std::vector<PreconditionTraceRow> trace = {{0, 1.5, 1.25, 0.25}, {1, 1.2, 1.0, 0.2}};
  std::stringstream ss;
  save_trace_csv(ss, trace);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "iteration,objective,reconstruction,l1");
  std::getline(ss, line);
  CHECK(line.substr(0, 2) == "0,");
}

TEST_CASE("divergence at the starting point is an error") {
  // a quadratic model over explosive data cannot even start
  ModelSpec spec = ModelSpec::dictionary(1, FeatureLibrary::polynomial(1, 2));
  Dataset ds;
  ds.dimension = 1;
  ds.sigma = Eigen::VectorXd::Ones(1);
  Dataset::Pair pair;
  pair.x_start = Eigen::VectorXd::Constant(1, 1e200);  // overflows the cubic features
  pair.x_end = Eigen::VectorXd::Constant(1, 1e200);
  pair.plan = SegmentPlan{0.0, 1.0, 1};
  ds.pairs.push_back(pair);
  PreconditionConfig config;
  config.iterations = 2;
  CHECK_THROWS_AS(precondition(spec, ds, config), std::runtime_error);
}
