// bsid command-line front end: simulate benchmark data, fit the posterior,
// forecast from a fitted chain, and render summaries. Stages communicate
// through files so expensive runs are resumable and scriptable.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bsid/benchmarks.hpp"
#include "bsid/forecast.hpp"
#include "bsid/precondition.hpp"
#include "bsid/rng.hpp"
#include "bsid/sampler.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

struct FitOptions {
  std::string manifest_path;
  std::string spec_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int iterations = 3000;
  double learning_rate = 1e-2;
  double l1_weight = 1.0;
  bool l1_on_closure = false;
  double step_size = 1e-4;
  int leapfrog_steps = 10;
  int total_steps = 5000;
  int keep_last = 2000;
  bool gibbs = false;
  int chains = 1;
};

ordered_json fit_config_json(const FitOptions& opt) {
  ordered_json j;
  j["manifest"] = opt.manifest_path;
  j["spec"] = opt.spec_path;
  j["out_dir"] = opt.out_dir;
  j["seed"] = opt.seed;
  j["precondition"] = {{"iterations", opt.iterations},
                       {"learning_rate", opt.learning_rate},
                       {"l1_weight", opt.l1_weight},
                       {"l1_on_closure", opt.l1_on_closure},
                       {"adam_beta1", 0.9},
                       {"adam_beta2", 0.999},
                       {"adam_epsilon", 1e-8}};
  j["hmc"] = {{"step_size", opt.step_size},
              {"leapfrog_steps", opt.leapfrog_steps},
              {"total_steps", opt.total_steps},
              {"keep_last", opt.keep_last},
              {"update_mode", opt.gibbs ? "gibbs-split" : "joint"},
              {"chains", opt.chains}};
  j["hyper_priors"] = {{"alpha1", 1.0}, {"beta1", 1.0}, {"alpha2", 1.0}, {"beta2", 1.0}};
  return j;
}

int cmd_simulate(const std::string& recipe_id, std::uint64_t seed, double noise_override,
                 int pairs_override, const std::string& out_dir) {
  bsid::BenchmarkRecipe recipe = bsid::benchmark_recipe(recipe_id);
  if (noise_override >= 0.0) recipe.noise_level = noise_override;
  if (pairs_override > 0) recipe.pair_count = pairs_override;

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  // resolved recipe echo goes first, before any compute
  ordered_json echo;
  echo["recipe"] = recipe.id;
  echo["description"] = recipe.description;
  echo["seed"] = seed;
  echo["pair_count"] = recipe.pair_count;
  echo["noise_level"] = recipe.noise_level;
  echo["noise_absolute"] = recipe.noise_absolute;
  echo["regular_sampling"] = recipe.regular_sampling;
  echo["t_span"] = {recipe.t_begin, recipe.t_end};
  echo["dt_target"] = recipe.dt_target;
  echo["hmc_step_size"] = recipe.hmc_step_size;
  write_text(dir / "recipe.json", echo.dump(2));

  const bsid::GeneratedData data = bsid::generate(recipe, seed);
  bsid::save_trajectory_csv_file((dir / "clean.csv").string(), data.clean);
  bsid::save_trajectory_csv_file((dir / "noisy.csv").string(), data.noisy);

  bsid::Dataset ds = bsid::normalize(bsid::build_pairs(data.noisy, recipe.dt_target));
  bsid::DatasetManifest manifest;
  manifest.csv_path = "noisy.csv";
  manifest.dt_target = recipe.dt_target;
  manifest.seed = seed;
  manifest.pair_count = ds.size();
  manifest.sigma.assign(ds.sigma.data(), ds.sigma.data() + ds.sigma.size());
  bsid::save_manifest((dir / "manifest.json").string(), manifest);

  bsid::ModelSpec spec = bsid::fitting_spec(recipe, ds.sigma);
  write_text(dir / "spec.json", spec.to_json_string());
  return 0;
}

int cmd_fit(const FitOptions& opt) {
  fs::create_directories(opt.out_dir);
  const fs::path dir(opt.out_dir);
  write_text(dir / "config.json", fit_config_json(opt).dump(2));

  const bsid::DatasetManifest manifest = bsid::load_manifest(opt.manifest_path);
  const fs::path csv = fs::path(opt.manifest_path).parent_path() / manifest.csv_path;
  const bsid::Trajectory traj = bsid::load_trajectory_csv_file(csv.string());
  bsid::Dataset dataset = bsid::normalize(bsid::build_pairs(traj, manifest.dt_target));

  bsid::ModelSpec spec = bsid::ModelSpec::from_json_string(read_text(opt.spec_path));
  // the glycolysis evaluator and all forecasts need the training scales
  spec.sigma = dataset.sigma;
  write_text(dir / "spec_resolved.json", spec.to_json_string());

  bsid::PreconditionConfig pconf;
  pconf.iterations = opt.iterations;
  pconf.learning_rate = opt.learning_rate;
  pconf.l1_weight = opt.l1_weight;
  pconf.l1_on_closure = opt.l1_on_closure;
  pconf.seed = bsid::derive_seed(opt.seed, "precondition");
  const bsid::PreconditionResult pre = bsid::precondition(spec, dataset, pconf);
  bsid::save_trace_csv_file((dir / "precondition_trace.csv").string(), pre.trace);

  bsid::HyperPriors hyper;
  bsid::HmcConfig hconf;
  hconf.step_size = opt.step_size;
  hconf.leapfrog_steps = opt.leapfrog_steps;
  hconf.total_steps = opt.total_steps;
  hconf.keep_last = opt.keep_last;
  hconf.mode = opt.gibbs ? bsid::UpdateMode::gibbs_split : bsid::UpdateMode::joint;
  hconf.chains = opt.chains;
  hconf.seed = bsid::derive_seed(opt.seed, "hmc");

  const std::vector<bsid::PosteriorSamples> chains =
      bsid::hmc_run_chains(spec, pre.params, dataset, hyper, hconf);
  const std::vector<std::string> labels = bsid::parameter_labels(spec);
  for (size_t c = 0; c < chains.size(); ++c) {
    const std::string name = c == 0 ? "chain.csv" : "chain_" + std::to_string(c) + ".csv";
    bsid::save_chain_csv_file((dir / name).string(), chains[c], labels);
  }
  const bsid::PosteriorSamples& samples = chains.front();
  write_text(dir / "posterior_summary.json", bsid::summarize_chain_json(samples, labels));

  const bsid::ModelParams map = bsid::map_estimate(samples);
  ordered_json mj;
  mj["labels"] = labels;
  mj["theta_sampled"] = std::vector<double>(map.theta.data(), map.theta.data() + map.theta.size());
  if (spec.kind == bsid::ModelSpec::Kind::glycolysis || spec.library.monomials_only()) {
    const Eigen::VectorXd map_physical =
        bsid::denormalize_coefficients(spec, map.theta, dataset.sigma);
    mj["theta_physical"] =
        std::vector<double>(map_physical.data(), map_physical.data() + map_physical.size());
  } else {
    // sin/cos coefficients have no closed-form rescaling
    mj["theta_physical"] = nullptr;
    mj["note"] = "library contains transform features; coefficients reported in normalized space";
  }
  mj["log_lambda"] = map.log_lambda;
  mj["log_gamma"] = map.log_gamma;
  mj["sigma"] = std::vector<double>(dataset.sigma.data(), dataset.sigma.data() + dataset.sigma.size());
  mj["acceptance_rate"] = samples.chain.acceptance_rate();
  mj["divergences"] = samples.chain.divergences;
  mj["precondition_mse"] = pre.final_mse;
  write_text(dir / "map.json", mj.dump(2));
  return 0;
}

int cmd_forecast(const std::string& chain_path, const std::string& spec_path,
                 const std::string& x0_text, double t_begin, double horizon, int points,
                 int use_last, bool include_noise, bool emit_members, std::uint64_t seed,
                 const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  const bsid::ModelSpec spec = bsid::ModelSpec::from_json_string(read_text(spec_path));
  const bsid::PosteriorSamples samples = bsid::load_chain_csv_file(chain_path);
  if (samples.parameter_count != spec.parameter_count()) {
    throw std::runtime_error("forecast: chain file and spec disagree on parameter count");
  }
  const Eigen::VectorXd x0 = parse_vector(x0_text);
  if (x0.size() != spec.dimension) {
    throw std::runtime_error("forecast: x0 has " + std::to_string(x0.size()) +
                             " entries, spec dimension is " + std::to_string(spec.dimension));
  }

  Eigen::VectorXd times;
  if (horizon <= 0.0 || points <= 1) {
    times = Eigen::VectorXd::Constant(1, t_begin);
  } else {
    times.resize(points);
    for (int i = 0; i < points; ++i) times[i] = t_begin + horizon * i / (points - 1);
  }

  const int n_use = std::min(use_last, samples.retained_count());
  const bsid::ForecastEnsemble ens =
      bsid::posterior_forecast(spec, samples, x0, times, spec.sigma, n_use, include_noise, seed,
                               0.01, emit_members);
  bsid::save_forecast_csv_file((dir / "forecast.csv").string(), ens, {}, emit_members);
  write_text(dir / "forecast_summary.json", bsid::forecast_summary_json(ens));
  return 0;
}

int cmd_report(const std::string& fit_dir) {
  const fs::path dir(fit_dir);
  const auto summary = nlohmann::json::parse(read_text(dir / "posterior_summary.json"));
  const auto map = nlohmann::json::parse(read_text(dir / "map.json"));

  std::cout << "# Fit report\n\n";
  std::cout << "- acceptance rate: " << summary.at("acceptance_rate").get<double>() << "\n";
  std::cout << "- divergences: " << summary.at("divergences").get<int>() << "\n";
  std::cout << "- chain: " << summary.at("total_steps").get<int>() << " steps, last "
            << summary.at("keep_last").get<int>() << " retained\n\n";

  std::cout << "| parameter | MAP (physical) | mean | sd | min | median | max |\n";
  std::cout << "|---|---|---|---|---|---|---|\n";
  const auto& labels = map.at("labels");
  const auto& physical =
      map.at("theta_physical").is_null() ? map.at("theta_sampled") : map.at("theta_physical");
  const auto& coords = summary.at("coordinates");
  for (size_t p = 0; p < labels.size(); ++p) {
    const auto& c = coords.at(p);
    std::cout << "| " << labels.at(p).get<std::string>() << " | "
              << physical.at(p).get<double>() << " | " << c.at("mean").get<double>() << " | "
              << c.at("sd").get<double>() << " | " << c.at("min").get<double>() << " | "
              << c.at("median").get<double>() << " | " << c.at("max").get<double>() << " |\n";
  }
  for (size_t p = labels.size(); p < coords.size(); ++p) {
    const auto& c = coords.at(p);
    std::cout << "| " << c.at("name").get<std::string>() << " |  | " << c.at("mean").get<double>()
              << " | " << c.at("sd").get<double>() << " | " << c.at("min").get<double>() << " | "
              << c.at("median").get<double>() << " | " << c.at("max").get<double>() << " |\n";
  }
  return 0;
}

int cmd_bench_list() {
  for (const auto& id : bsid::benchmark_ids()) {
    const bsid::BenchmarkRecipe r = bsid::benchmark_recipe(id);
    std::cout << id << ": " << r.description << " (n=" << r.pair_count << ", t=["
              << r.t_begin << "," << r.t_end << "], noise=" << r.noise_level
              << (r.noise_absolute ? " absolute" : " relative") << ", dt_target=" << r.dt_target
              << ", hmc_step=" << r.hmc_step_size << ")\n";
    std::cout << "    truth:";
    for (const auto& tp : bsid::true_parameters(r.system)) {
      std::cout << " " << tp.name << "=" << tp.value;
    }
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian identification of nonlinear dynamics from time-series data"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate benchmark training data");
  std::string recipe_id, out_dir = "out";
  std::uint64_t seed = 0;
  double noise_override = -1.0;
  int pairs_override = 0;
  simulate->add_option("recipe", recipe_id, "benchmark recipe id")->required();
  simulate->add_option("--seed", seed, "top-level seed");
  simulate->add_option("--noise", noise_override, "override the recipe noise level");
  simulate->add_option("--pairs", pairs_override, "override the recipe pair count");
  simulate->add_option("--out", out_dir, "output directory");

  // fit
  auto* fit = app.add_subcommand("fit", "precondition and sample the posterior");
  FitOptions fopt;
  fit->add_option("--manifest", fopt.manifest_path, "dataset manifest")->required();
  fit->add_option("--spec", fopt.spec_path, "model spec json")->required();
  fit->add_option("--out", fopt.out_dir, "output directory")->required();
  fit->add_option("--seed", fopt.seed, "top-level seed");
  fit->add_option("--iterations", fopt.iterations, "Adam iterations");
  fit->add_option("--lr", fopt.learning_rate, "Adam learning rate");
  fit->add_option("--l1-weight", fopt.l1_weight, "L1 regularization weight");
  fit->add_flag("--l1-on-closure", fopt.l1_on_closure, "apply the L1 term to closure weights too");
  fit->add_option("--step-size", fopt.step_size, "HMC leapfrog step size");
  fit->add_option("--leapfrog", fopt.leapfrog_steps, "HMC leapfrog steps per proposal");
  fit->add_option("--total-steps", fopt.total_steps, "HMC chain length");
  fit->add_option("--keep-last", fopt.keep_last, "retained samples");
  fit->add_flag("--gibbs", fopt.gibbs, "Metropolis-within-Gibbs split update");
  fit->add_option("--chains", fopt.chains, "independent chains");

  // forecast
  auto* fc = app.add_subcommand("forecast", "posterior-predictive trajectories from a chain");
  std::string chain_path, spec_path, x0_text, fc_out = "forecast";
  double t_begin = 0.0, horizon = 0.0;
  int points = 200, use_last = 2000;
  bool include_noise = false, emit_members = false;
  std::uint64_t fc_seed = 0;
  fc->add_option("--chain", chain_path, "chain csv")->required();
  fc->add_option("--spec", spec_path, "resolved model spec json")->required();
  fc->add_option("--x0", x0_text, "initial condition, comma separated")->required();
  fc->add_option("--t0", t_begin, "start time");
  fc->add_option("--horizon", horizon, "forecast horizon");
  fc->add_option("--points", points, "query grid size");
  fc->add_option("--use-last", use_last, "posterior draws to push through the model");
  fc->add_flag("--include-noise", include_noise, "add observation noise per draw");
  fc->add_flag("--emit-members", emit_members, "write per-member columns");
  fc->add_option("--seed", fc_seed, "noise seed");
  fc->add_option("--out", fc_out, "output directory");

  // report
  auto* report = app.add_subcommand("report", "render a fit directory as markdown");
  std::string fit_dir;
  report->add_option("fit_dir", fit_dir, "fit output directory")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "benchmark recipes");
  auto* bench_list = bench->add_subcommand("list", "list recipe ids and parameters");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(recipe_id, seed, noise_override, pairs_override, out_dir);
    if (fit->parsed()) return cmd_fit(fopt);
    if (fc->parsed())
      return cmd_forecast(chain_path, spec_path, x0_text, t_begin, horizon, points, use_last,
                          include_noise, emit_members, fc_seed, fc_out);
    if (report->parsed()) return cmd_report(fit_dir);
    if (bench->parsed() && bench_list->parsed()) return cmd_bench_list();
    std::cerr << "bench: expected a subcommand (list)\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
