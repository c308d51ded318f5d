#include "bsid/sampler.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "bsid/rng.hpp"

namespace bsid {

void HmcConfig::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("hmc: step_size must be positive");
  if (leapfrog_steps < 1) throw std::invalid_argument("hmc: leapfrog_steps must be >= 1");
  if (total_steps < 1) throw std::invalid_argument("hmc: total_steps must be >= 1");
  if (keep_last < 1 || keep_last > total_steps)
    throw std::invalid_argument("hmc: keep_last must be in [1, total_steps]");
  if (chains < 1) throw std::invalid_argument("hmc: chains must be >= 1");
}

LeapfrogResult leapfrog(const Eigen::VectorXd& position, const Eigen::VectorXd& velocity,
                        double step_size, int steps, const PotentialFn& potential) {
  LeapfrogResult out;
  out.position = position;
  out.velocity = velocity;

  double energy = 0.0;
  Eigen::VectorXd grad(position.size());
  if (!potential(out.position, energy, grad)) {
    out.divergent = true;
    return out;
  }

  out.velocity -= (0.5 * step_size) * grad;
  for (int l = 0; l < steps; ++l) {
    out.position += step_size * out.velocity;
    if (!potential(out.position, energy, grad)) {
      out.divergent = true;
      return out;
    }
    out.velocity -= ((l + 1 < steps) ? step_size : 0.5 * step_size) * grad;
  }
  // negation makes the proposal map self-inverse
  out.velocity = -out.velocity;
  out.energy = energy;
  out.has_energy = true;
  return out;
}

namespace {

struct BlockState {
  Eigen::VectorXd q;
  double energy = 0.0;
  Eigen::VectorXd grad;
};

// One HMC update restricted to q[offset .. offset+length): the complementary
// coordinates are bit-untouched. Returns true on acceptance; maintains
// (energy, grad) of the current state.
bool block_update(BlockState& state, const PotentialFn& potential, Rng& rng, double eps, int steps,
                  int offset, int length, bool& divergent, Eigen::VectorXd& v,
                  Eigen::VectorXd& q_backup, Eigen::VectorXd& grad_trial) {
  divergent = false;
  v.resize(length);
  for (int i = 0; i < length; ++i) v[i] = rng.normal();
  q_backup = state.q.segment(offset, length);

  const double h0 = state.energy + 0.5 * v.squaredNorm();

  double energy_trial = state.energy;
  grad_trial = state.grad;
  v -= (0.5 * eps) * grad_trial.segment(offset, length);
  for (int l = 0; l < steps; ++l) {
    state.q.segment(offset, length) += eps * v;
    if (!potential(state.q, energy_trial, grad_trial)) {
      state.q.segment(offset, length) = q_backup;
      divergent = true;
      return false;
    }
    v -= ((l + 1 < steps) ? eps : 0.5 * eps) * grad_trial.segment(offset, length);
  }

  const double h1 = energy_trial + 0.5 * v.squaredNorm();
  const double log_u = std::log(rng.uniform());
  if (std::isfinite(h1) && log_u < h0 - h1) {
    state.energy = energy_trial;
    state.grad = grad_trial;
    return true;
  }
  state.q.segment(offset, length) = q_backup;
  return false;
}

FlatChain run_chain(const Eigen::VectorXd& init, const HmcConfig& config,
                    const PotentialFn& potential, const std::vector<std::pair<int, int>>& blocks) {
  config.validate();
  const auto dim = static_cast<int>(init.size());

  BlockState state;
  state.q = init;
  state.grad.resize(dim);
  if (!potential(state.q, state.energy, state.grad) || !std::isfinite(state.energy)) {
    throw std::invalid_argument("hmc: initial state has non-finite target density");
  }

  FlatChain chain;
  chain.config = config;
  chain.positions.resize(config.total_steps, dim);
  chain.log_target.resize(config.total_steps);
  chain.accepted.assign(static_cast<size_t>(config.total_steps), 0);

  Rng rng(derive_seed(config.seed, "hmc-chain"));
  Eigen::VectorXd v, q_backup, grad_trial(dim);

  for (int step = 0; step < config.total_steps; ++step) {
    bool any_accepted = false;
    for (const auto& [offset, length] : blocks) {
      bool divergent = false;
      const bool accepted = block_update(state, potential, rng, config.step_size,
                                         config.leapfrog_steps, offset, length, divergent, v,
                                         q_backup, grad_trial);
      any_accepted = any_accepted || accepted;
      if (divergent) ++chain.divergences;
    }
    chain.positions.row(step) = state.q.transpose();
    chain.log_target[step] = -state.energy;
    chain.accepted[static_cast<size_t>(step)] = any_accepted ? 1 : 0;
  }
  return chain;
}

PotentialFn posterior_potential(const ModelSpec& spec, const Dataset& dataset,
                                const HyperPriors& hyper) {
  return [&spec, &dataset, &hyper](const Eigen::VectorXd& q, double& energy,
                                   Eigen::VectorXd& grad) -> bool {
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      if (!std::isfinite(q[i])) return false;
    }
    const PosteriorGradient g = grad_log_posterior(spec, unpack(q), dataset, hyper);
    if (!g.finite) return false;
    energy = -g.value;
    grad = -g.grad;
    return true;
  };
}

}  // namespace

double FlatChain::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  double n = 0.0;
  for (std::uint8_t a : accepted) n += a;
  return n / static_cast<double>(accepted.size());
}

FlatChain hmc_run_flat(const Eigen::VectorXd& init, const HmcConfig& config,
                       const PotentialFn& potential) {
  return run_chain(init, config, potential, {{0, static_cast<int>(init.size())}});
}

ModelParams PosteriorSamples::params_at(int step) const {
  return unpack(chain.positions.row(step).transpose());
}

PosteriorSamples hmc_run(const ModelSpec& spec, const ModelParams& init, const Dataset& dataset,
                         const HyperPriors& hyper, const HmcConfig& config) {
  const int P = spec.parameter_count();
  if (init.theta.size() != P) throw std::invalid_argument("hmc: init theta length mismatch");
  const PotentialFn potential = posterior_potential(spec, dataset, hyper);

  std::vector<std::pair<int, int>> blocks;
  if (config.mode == UpdateMode::joint) {
    blocks = {{0, P + 2}};
  } else {
    blocks = {{0, P}, {P, 2}};
  }

  PosteriorSamples samples;
  samples.parameter_count = P;
  samples.chain = run_chain(pack(init), config, potential, blocks);
  return samples;
}

std::vector<PosteriorSamples> hmc_run_chains(const ModelSpec& spec, const ModelParams& init,
                                             const Dataset& dataset, const HyperPriors& hyper,
                                             const HmcConfig& config) {
  std::vector<PosteriorSamples> out(static_cast<size_t>(config.chains));
  auto run_one = [&](int index) {
    HmcConfig c = config;
    c.chains = 1;
    c.seed = derive_seed(config.seed, "chain", static_cast<std::uint64_t>(index));
    out[static_cast<size_t>(index)] = hmc_run(spec, init, dataset, hyper, c);
  };
  if (config.chains == 1) {
    run_one(0);
    return out;
  }
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(config.chains));
  for (int c = 0; c < config.chains; ++c) workers.emplace_back(run_one, c);
  for (auto& w : workers) w.join();
  return out;
}

ModelParams gibbs_step(const ModelSpec& spec, const ModelParams& state, const Dataset& dataset,
                       const HyperPriors& hyper, const HmcConfig& config, Rng& rng,
                       bool* theta_accepted, bool* precision_accepted) {
  const int P = spec.parameter_count();
  const PotentialFn potential = posterior_potential(spec, dataset, hyper);

  BlockState s;
  s.q = pack(state);
  s.grad.resize(P + 2);
  if (!potential(s.q, s.energy, s.grad)) {
    throw std::invalid_argument("gibbs_step: state has non-finite target density");
  }
  Eigen::VectorXd v, q_backup, grad_trial(P + 2);
  bool divergent = false;
  const bool acc_theta = block_update(s, potential, rng, config.step_size, config.leapfrog_steps,
                                      0, P, divergent, v, q_backup, grad_trial);
  const bool acc_prec = block_update(s, potential, rng, config.step_size, config.leapfrog_steps,
                                     P, 2, divergent, v, q_backup, grad_trial);
  if (theta_accepted) *theta_accepted = acc_theta;
  if (precision_accepted) *precision_accepted = acc_prec;
  return unpack(s.q);
}

void save_chain_csv(std::ostream& out, const PosteriorSamples& samples,
                    const std::vector<std::string>& labels) {
  const int P = samples.parameter_count;
  for (int p = 0; p < P; ++p) {
    const std::string label =
        p < static_cast<int>(labels.size()) ? labels[static_cast<size_t>(p)] : "theta_" + std::to_string(p);
    out << label << ",";
  }
  out << "log_lambda,log_gamma,log_posterior,accepted\n";
  for (int step = 0; step < samples.size(); ++step) {
    for (int j = 0; j < P + 2; ++j) out << format_double(samples.chain.positions(step, j)) << ",";
    out << format_double(samples.chain.log_target[step]) << ","
        << (samples.accepted_at(step) ? 1 : 0) << "\n";
  }
}

void save_chain_csv_file(const std::string& path, const PosteriorSamples& samples,
                         const std::vector<std::string>& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  save_chain_csv(out, samples, labels);
}

PosteriorSamples load_chain_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("chain file: missing header");
  int columns = 1;
  for (char c : line) columns += c == ',';
  const int P = columns - 4;
  if (P < 0) throw std::runtime_error("chain file: too few columns");

  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++col;
    }
    if (col != columns) throw std::runtime_error("chain file: ragged row");
    ++rows;
  }

  PosteriorSamples samples;
  samples.parameter_count = P;
  samples.chain.positions.resize(rows, P + 2);
  samples.chain.log_target.resize(rows);
  samples.chain.accepted.assign(static_cast<size_t>(rows), 0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < P + 2; ++j) {
      samples.chain.positions(i, j) = values[static_cast<size_t>(i) * columns + static_cast<size_t>(j)];
    }
    samples.chain.log_target[i] = values[static_cast<size_t>(i) * columns + static_cast<size_t>(P + 2)];
    samples.chain.accepted[static_cast<size_t>(i)] =
        values[static_cast<size_t>(i) * columns + static_cast<size_t>(P + 3)] != 0.0;
  }
  // a loaded chain stands alone: treat every row as retained
  samples.chain.config.total_steps = rows;
  samples.chain.config.keep_last = rows;
  return samples;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double idx = p * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<size_t>(idx);
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::string summarize_chain_json(const PosteriorSamples& samples,
                                 const std::vector<std::string>& labels) {
  const int P = samples.parameter_count;
  const int begin = samples.retained_begin();
  const int count = samples.retained_count();

  nlohmann::ordered_json j;
  j["total_steps"] = samples.chain.config.total_steps;
  j["keep_last"] = samples.chain.config.keep_last;
  j["step_size"] = samples.chain.config.step_size;
  j["leapfrog_steps"] = samples.chain.config.leapfrog_steps;
  j["seed"] = samples.chain.config.seed;
  j["update_mode"] = samples.chain.config.mode == UpdateMode::joint ? "joint" : "gibbs-split";
  j["acceptance_rate"] = samples.chain.acceptance_rate();
  j["divergences"] = samples.chain.divergences;

  nlohmann::ordered_json coords = nlohmann::ordered_json::array();
  std::vector<double> column(static_cast<size_t>(count));
  for (int p = 0; p < P + 2; ++p) {
    double mean = 0.0;
    for (int i = 0; i < count; ++i) {
      column[static_cast<size_t>(i)] = samples.chain.positions(begin + i, p);
      mean += column[static_cast<size_t>(i)];
    }
    mean /= count;
    double var = 0.0;
    for (double v : column) var += (v - mean) * (v - mean);
    var = count > 1 ? var / (count - 1) : 0.0;
    std::sort(column.begin(), column.end());

    std::string label;
    if (p < P) {
      label = p < static_cast<int>(labels.size()) ? labels[static_cast<size_t>(p)]
                                                  : "theta_" + std::to_string(p);
    } else {
      label = p == P ? "log_lambda" : "log_gamma";
    }
    coords.push_back({{"name", label},
                      {"mean", mean},
                      {"sd", std::sqrt(var)},
                      {"min", column.front()},
                      {"q1", quantile_sorted(column, 0.25)},
                      {"median", quantile_sorted(column, 0.5)},
                      {"q3", quantile_sorted(column, 0.75)},
                      {"max", column.back()}});
  }
  j["coordinates"] = coords;
  return j.dump(2);
}

}  // namespace bsid
