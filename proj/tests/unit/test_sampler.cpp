#include <doctest.h>

#include <cmath>
#include <numeric>

#include "bsid/sampler.hpp"
#include "helpers.hpp"

using namespace bsid;

namespace {

// U(q) = ||q||^2 / 2, the standard Gaussian potential
bool gaussian_potential(const Eigen::VectorXd& q, double& energy, Eigen::VectorXd& grad) {
  energy = 0.5 * q.squaredNorm();
  grad = q;
  return true;
}

bool free_potential(const Eigen::VectorXd& q, double& energy, Eigen::VectorXd& grad) {
  (void)q;
  energy = 0.0;
  grad.setZero();
  return true;
}

// batch-means standard error of the mean, robust to autocorrelation
double batch_se(const Eigen::VectorXd& series, int batches) {
  const int size = static_cast<int>(series.size()) / batches;
  Eigen::VectorXd means(batches);
  for (int b = 0; b < batches; ++b) means[b] = series.segment(b * size, size).mean();
  const double grand = means.mean();
  const double var = (means.array() - grand).square().sum() / (batches - 1);
  return std::sqrt(var / batches);
}

}  // namespace

TEST_CASE("free particle moves linearly with unchanged speed") {
  const Eigen::Vector2d q(1.0, -2.0), v(0.5, 0.25);
  const LeapfrogResult r = leapfrog(q, v, 0.1, 7, free_potential);
  CHECK_FALSE(r.divergent);
  CHECK((r.position - (q + 0.7 * v)).lpNorm<Eigen::Infinity>() < 1e-15);
  CHECK((r.velocity - (-v)).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("one leapfrog step on the 1d gaussian matches the hand-derived values") {
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::VectorXd v = Eigen::VectorXd::Zero(1);
  const LeapfrogResult r = leapfrog(q, v, 0.1, 1, gaussian_potential);
  // half kick: v = -0.05; drift: q = 1 - 0.005 = 0.995;
  // half kick: v = -0.05 - 0.05*0.995 = -0.09975; negated on return
  CHECK(r.position[0] == doctest::Approx(0.995).epsilon(1e-15));
  CHECK(r.velocity[0] == doctest::Approx(0.09975).epsilon(1e-12));
}

TEST_CASE("leapfrog with the final negation is an involution") {
  Rng rng(11);
  const Eigen::VectorXd q = testutil::random_vector(rng, 5);
  const Eigen::VectorXd v = testutil::random_vector(rng, 5);
  const LeapfrogResult fwd = leapfrog(q, v, 0.05, 12, gaussian_potential);
  const LeapfrogResult back = leapfrog(fwd.position, fwd.velocity, 0.05, 12, gaussian_potential);
  CHECK((back.position - q).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((back.velocity - v).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("divergent gradient flags the proposal") {
  auto exploding = [](const Eigen::VectorXd& q, double& energy, Eigen::VectorXd& grad) {
    if (std::abs(q[0]) > 1.5) return false;
    energy = 0.0;
    grad = Eigen::VectorXd::Constant(q.size(), -10.0);
    return true;
  };
  const LeapfrogResult r =
      leapfrog(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 0.2, 10, exploding);
  CHECK(r.divergent);
}

TEST_CASE("2d gaussian target: retained moments match the analytic law") {
  HmcConfig config;
  config.step_size = 0.1;
  config.leapfrog_steps = 10;
  config.total_steps = 5000;
  config.keep_last = 2000;
  config.seed = 314;
  const FlatChain chain = hmc_run_flat(Eigen::Vector2d(1.0, -1.0), config, gaussian_potential);

  CHECK(chain.acceptance_rate() > 0.95);
  CHECK(chain.divergences == 0);
  const auto retained = chain.positions.bottomRows(config.keep_last);
  for (int j = 0; j < 2; ++j) {
    const Eigen::VectorXd col = retained.col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / (col.size() - 1);
    CHECK(std::abs(mean) < 3.0 * batch_se(col, 20));
    CHECK(var > 0.8);
    CHECK(var < 1.2);
  }
}

TEST_CASE("chi-squared goodness of fit at the 1% level on the gaussian target") {
  // fixed seed; radius^2 of a 2d standard gaussian is Exp(mean 2); the chain
  // is thinned by 10 to damp autocorrelation before binning
  HmcConfig config;
  config.step_size = 0.2;
  config.leapfrog_steps = 10;
  config.total_steps = 5000;
  config.keep_last = 2000;
  config.seed = 2718;
  const FlatChain chain = hmc_run_flat(Eigen::Vector2d(0.5, 0.5), config, gaussian_potential);

  const int bins = 10;
  std::vector<int> counts(bins, 0);
  int total = 0;
  for (int i = chain.burn_in(); i < config.total_steps; i += 10) {
    const double r2 = chain.positions.row(i).squaredNorm();
    const double cdf = 1.0 - std::exp(-0.5 * r2);
    int b = std::min(bins - 1, static_cast<int>(cdf * bins));
    ++counts[static_cast<size_t>(b)];
    ++total;
  }
  const double expected = static_cast<double>(total) / bins;
  double stat = 0.0;
  for (int c : counts) stat += (c - expected) * (c - expected) / expected;
  // chi^2(9) critical value at the 1% level
  CHECK(stat < 21.666);
}

TEST_CASE("hamiltonian error per proposal scales as step size squared") {
  // mean |dH| measured through the rejection mechanism is awkward; instead
  // run single leapfrog trajectories from stationary draws at eps and eps/2
  Rng rng(99);
  double sum_coarse = 0.0, sum_fine = 0.0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd q = testutil::random_vector(rng, 2);
    const Eigen::VectorXd v = testutil::random_vector(rng, 2);
    const double h0 = 0.5 * q.squaredNorm() + 0.5 * v.squaredNorm();
    for (const double eps : {0.2, 0.1}) {
      const LeapfrogResult r = leapfrog(q, v, eps, 10, gaussian_potential);
      const double h1 = r.energy + 0.5 * r.velocity.squaredNorm();
      (eps == 0.2 ? sum_coarse : sum_fine) += std::abs(h1 - h0);
    }
  }
  const double factor = sum_coarse / sum_fine;
  CHECK(factor > 3.0);
  CHECK(factor < 5.0);
}

TEST_CASE("vanishing step size preserves energy and accepts everything") {
  HmcConfig config;
  config.step_size = 1e-8;
  config.leapfrog_steps = 10;
  config.total_steps = 100;
  config.keep_last = 100;
  config.seed = 5;
  const FlatChain chain = hmc_run_flat(Eigen::Vector2d(0.3, -0.4), config, gaussian_potential);
  CHECK(chain.acceptance_rate() == 1.0);

  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd q = testutil::random_vector(rng, 2);
    const Eigen::VectorXd v = testutil::random_vector(rng, 2);
    const LeapfrogResult r = leapfrog(q, v, 1e-8, 10, gaussian_potential);
    const double h0 = 0.5 * q.squaredNorm() + 0.5 * v.squaredNorm();
    const double h1 = r.energy + 0.5 * r.velocity.squaredNorm();
    CHECK(std::abs(h1 - h0) < 1e-12);
  }
}

TEST_CASE("same seed gives bit-identical chains") {
  HmcConfig config;
  config.step_size = 0.15;
  config.total_steps = 200;
  config.keep_last = 100;
  config.seed = 12345;
  const FlatChain a = hmc_run_flat(Eigen::Vector2d(1.0, 1.0), config, gaussian_potential);
  const FlatChain b = hmc_run_flat(Eigen::Vector2d(1.0, 1.0), config, gaussian_potential);
  CHECK(a.positions == b.positions);
  CHECK(a.log_target == b.log_target);
  config.seed = 12346;
  const FlatChain c = hmc_run_flat(Eigen::Vector2d(1.0, 1.0), config, gaussian_potential);
  CHECK(a.positions != c.positions);
}

TEST_CASE("rejected proposals repeat the previous state") {
  // a huge step size on a narrow gaussian forces rejections
  auto narrow = [](const Eigen::VectorXd& q, double& energy, Eigen::VectorXd& grad) {
    energy = 5000.0 * 0.5 * q.squaredNorm();
    grad = 5000.0 * q;
    return true;
  };
  HmcConfig config;
  config.step_size = 0.5;
  config.total_steps = 50;
  config.keep_last = 10;
  config.seed = 1;
  const FlatChain chain = hmc_run_flat(Eigen::VectorXd::Constant(1, 0.01), config, narrow);
  CHECK(chain.acceptance_rate() < 1.0);
  for (int i = 1; i < 50; ++i) {
    if (!chain.accepted[static_cast<size_t>(i)]) {
      CHECK(chain.positions(i, 0) == chain.positions(i - 1, 0));
    }
  }
}

TEST_CASE("initialization at an infinite potential is rejected up front") {
  auto bad = [](const Eigen::VectorXd&, double&, Eigen::VectorXd&) { return false; };
  HmcConfig config;
  CHECK_THROWS_AS(hmc_run_flat(Eigen::Vector2d(0, 0), config, bad), std::invalid_argument);
}

namespace {

// tiny real posterior: 1-parameter constant-rate model, three pairs
struct TinyProblem {
  ModelSpec spec = ModelSpec::dictionary(1, FeatureLibrary::polynomial(1, 0));
  Dataset dataset;
  HyperPriors hyper;
  TinyProblem() {
    dataset.dimension = 1;
    dataset.sigma = Eigen::VectorXd::Ones(1);
    for (int i = 0; i < 3; ++i) {
      Dataset::Pair pair;
      pair.x_start = Eigen::VectorXd::Constant(1, 0.5 + 0.2 * i);
      pair.x_end = Eigen::VectorXd::Constant(1, 0.5 + 0.2 * i + 0.053);
      pair.plan = SegmentPlan{0.0, 0.1, 2};
      dataset.pairs.push_back(std::move(pair));
    }
  }
  ModelParams init() const {
    ModelParams p;
    p.theta = Eigen::VectorXd::Constant(1, 0.5);
    p.log_lambda = 0.2;
    p.log_gamma = 1.0;
    return p;
  }
};

}  // namespace

TEST_CASE("gibbs sweep freezes the complementary block bit-exactly") {
  TinyProblem prob;
  HmcConfig config;
  config.step_size = 0.05;
  config.leapfrog_steps = 5;
  Rng rng(909);

  ModelParams state = prob.init();
  // run several sweeps checking the frozen block after each block update via
  // the public one-sweep API with forced single-block configs
  for (int sweep = 0; sweep < 5; ++sweep) {
    bool acc_theta = false, acc_prec = false;
    const ModelParams next =
        gibbs_step(prob.spec, state, prob.dataset, prob.hyper, config, rng, &acc_theta, &acc_prec);
    // theta block update cannot touch the precisions and vice versa: if the
    // precision block was rejected, precisions are bit-identical to the input
    if (!acc_prec) {
      CHECK(next.log_lambda == state.log_lambda);
      CHECK(next.log_gamma == state.log_gamma);
    }
    if (!acc_theta) {
      CHECK(next.theta == state.theta);
    }
    state = next;
  }
}

TEST_CASE("total_steps = 1 produces a single-entry chain") {
  TinyProblem prob;
  HmcConfig config;
  config.total_steps = 1;
  config.keep_last = 1;
  config.step_size = 0.01;
  const PosteriorSamples samples =
      hmc_run(prob.spec, prob.init(), prob.dataset, prob.hyper, config);
  CHECK(samples.size() == 1);
}

TEST_CASE("joint and gibbs modes agree on retained means") {
  TinyProblem prob;
  HmcConfig config;
  config.step_size = 0.05;
  config.leapfrog_steps = 10;
  config.total_steps = 4000;
  config.keep_last = 1500;
  config.seed = 21;
  const PosteriorSamples joint = hmc_run(prob.spec, prob.init(), prob.dataset, prob.hyper, config);
  config.mode = UpdateMode::gibbs_split;
  config.seed = 22;
  const PosteriorSamples gibbs = hmc_run(prob.spec, prob.init(), prob.dataset, prob.hyper, config);

  for (int coord = 0; coord < 3; ++coord) {
    const Eigen::VectorXd a = joint.chain.positions.bottomRows(1500).col(coord);
    const Eigen::VectorXd b = gibbs.chain.positions.bottomRows(1500).col(coord);
    const double se = std::sqrt(std::pow(batch_se(a, 15), 2) + std::pow(batch_se(b, 15), 2));
    CHECK(std::abs(a.mean() - b.mean()) < 3.0 * se);
  }
}

TEST_CASE("multiple chains are independent and deterministically seeded") {
  TinyProblem prob;
  HmcConfig config;
  config.step_size = 0.05;
  config.total_steps = 50;
  config.keep_last = 20;
  config.seed = 77;
  config.chains = 2;
  const auto chains = hmc_run_chains(prob.spec, prob.init(), prob.dataset, prob.hyper, config);
  REQUIRE(chains.size() == 2);
  CHECK(chains[0].chain.positions != chains[1].chain.positions);
  const auto again = hmc_run_chains(prob.spec, prob.init(), prob.dataset, prob.hyper, config);
  CHECK(chains[0].chain.positions == again[0].chain.positions);
  CHECK(chains[1].chain.positions == again[1].chain.positions);
}

TEST_CASE("chain csv round-trips through save and load") {
  TinyProblem prob;
  HmcConfig config;
  config.step_size = 0.05;
  config.total_steps = 30;
  config.keep_last = 10;
  const PosteriorSamples samples =
      hmc_run(prob.spec, prob.init(), prob.dataset, prob.hyper, config);
  const std::string path = "chain_roundtrip_test.csv";
  save_chain_csv_file(path, samples, parameter_labels(prob.spec));
  const PosteriorSamples loaded = load_chain_csv_file(path);
  CHECK(loaded.parameter_count == samples.parameter_count);
  CHECK(loaded.chain.positions == samples.chain.positions);
  CHECK(loaded.chain.log_target == samples.chain.log_target);
  std::remove(path.c_str());
}

TEST_CASE("summary json reports the box-plot statistics") {
  TinyProblem prob;
  HmcConfig config;
  config.step_size = 0.05;
  config.total_steps = 200;
  config.keep_last = 100;
  const PosteriorSamples samples =
      hmc_run(prob.spec, prob.init(), prob.dataset, prob.hyper, config);
  const std::string json = summarize_chain_json(samples, parameter_labels(prob.spec));
  CHECK(json.find("acceptance_rate") != std::string::npos);
  CHECK(json.find("\"q1\"") != std::string::npos);
  CHECK(json.find("\"median\"") != std::string::npos);
  CHECK(json.find("log_gamma") != std::string::npos);
}
