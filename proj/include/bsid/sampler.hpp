#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "bsid/posterior.hpp"
#include "bsid/rng.hpp"

namespace bsid {

enum class UpdateMode { joint, gibbs_split };

struct HmcConfig {
  double step_size = 1e-4;
  int leapfrog_steps = 10;
  int total_steps = 5000;
  int keep_last = 2000;
  std::uint64_t seed = 0;
  UpdateMode mode = UpdateMode::joint;
  int chains = 1;

  void validate() const;
};

/// Potential interface for the generic sampler: fills U(q) and dU/dq,
/// returning false when the evaluation diverged (non-finite energy).
using PotentialFn = std::function<bool(const Eigen::VectorXd& q, double& energy,
                                       Eigen::VectorXd& grad)>;

struct LeapfrogResult {
  Eigen::VectorXd position;
  Eigen::VectorXd velocity;
  bool divergent = false;
  double energy = 0.0;       // potential at the final position
  bool has_energy = false;   // false when the trajectory diverged
};

/// Standard leapfrog with a final velocity negation, so the map is its own
/// inverse (running it again from the returned state recovers the input).
LeapfrogResult leapfrog(const Eigen::VectorXd& position, const Eigen::VectorXd& velocity,
                        double step_size, int steps, const PotentialFn& potential);

/// Plain HMC chain over the given potential. Entry i of the result is the
/// state after iteration i; rejected proposals repeat the previous state.
struct FlatChain {
  Eigen::MatrixXd positions;  // total_steps x dim
  Eigen::VectorXd log_target; // log target density (-U) per step
  std::vector<std::uint8_t> accepted;
  int divergences = 0;
  HmcConfig config;

  double acceptance_rate() const;
  int burn_in() const { return config.total_steps - config.keep_last; }
  Eigen::Map<const Eigen::MatrixXd> all() const;
};

FlatChain hmc_run_flat(const Eigen::VectorXd& init, const HmcConfig& config,
                       const PotentialFn& potential);

/// HMC over the model posterior (potential U = -log_posterior).
struct PosteriorSamples {
  FlatChain chain;
  int parameter_count = 0;

  int size() const { return static_cast<int>(chain.positions.rows()); }
  ModelParams params_at(int step) const;
  double log_posterior_at(int step) const { return chain.log_target[step]; }
  bool accepted_at(int step) const { return chain.accepted[static_cast<size_t>(step)] != 0; }
  int retained_begin() const { return chain.burn_in(); }
  int retained_count() const { return chain.config.keep_last; }
};

PosteriorSamples hmc_run(const ModelSpec& spec, const ModelParams& init, const Dataset& dataset,
                         const HyperPriors& hyper, const HmcConfig& config);

/// Independent chains with per-chain derived seeds, merged by chain index.
std::vector<PosteriorSamples> hmc_run_chains(const ModelSpec& spec, const ModelParams& init,
                                             const Dataset& dataset, const HyperPriors& hyper,
                                             const HmcConfig& config);

/// One Metropolis-within-Gibbs sweep: a theta-block HMC update with the
/// precisions frozen, then a precision-block update with theta frozen.
ModelParams gibbs_step(const ModelSpec& spec, const ModelParams& state, const Dataset& dataset,
                       const HyperPriors& hyper, const HmcConfig& config, Rng& rng,
                       bool* theta_accepted = nullptr, bool* precision_accepted = nullptr);

/// Columnar chain file: one column per Theta coordinate plus log-posterior
/// and accept flag, full decimal precision.
void save_chain_csv(std::ostream& out, const PosteriorSamples& samples,
                    const std::vector<std::string>& labels);
void save_chain_csv_file(const std::string& path, const PosteriorSamples& samples,
                         const std::vector<std::string>& labels);
PosteriorSamples load_chain_csv_file(const std::string& path);

/// Retained-sample summary: acceptance rate, divergences, and per-coordinate
/// mean / sd / min / max / quartiles (the box-plot statistics).
std::string summarize_chain_json(const PosteriorSamples& samples,
                                 const std::vector<std::string>& labels);

}  // namespace bsid
