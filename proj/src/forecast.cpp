#include "bsid/forecast.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "bsid/integrate.hpp"
#include "bsid/rng.hpp"

namespace bsid {

ModelParams map_estimate(const PosteriorSamples& samples) {
  if (samples.size() < 1 || samples.retained_count() < 1)
    throw std::invalid_argument("map_estimate: empty chain");
  const int begin = samples.retained_begin();
  int best = begin;
  for (int i = begin + 1; i < samples.size(); ++i) {
    if (samples.log_posterior_at(i) > samples.log_posterior_at(best)) best = i;
  }
  return samples.params_at(best);
}

PredictResult predict_trajectory(const ModelSpec& spec, const ModelParams& params,
                                 const Eigen::VectorXd& x0, const Eigen::VectorXd& times,
                                 const Eigen::VectorXd& sigma, double dt_target) {
  if (times.size() < 1) throw std::invalid_argument("predict: need at least one query time");
  for (Eigen::Index i = 0; i + 1 < times.size(); ++i) {
    if (!(times[i + 1] > times[i]))
      throw std::invalid_argument("predict: query times must be strictly increasing");
  }
  if (x0.size() != spec.dimension) throw std::invalid_argument("predict: x0 dimension mismatch");

  PredictResult result;
  result.trajectory.times = times;
  result.trajectory.states.resize(times.size(), spec.dimension);

  EvalWorkspace ws = make_workspace(spec);
  bind_parameters(spec, params.theta, ws);

  Eigen::VectorXd x = x0.cwiseQuotient(sigma);
  result.trajectory.states.row(0) = x0.transpose();
  Eigen::Index filled = 1;
  for (Eigen::Index i = 1; i < times.size(); ++i) {
    const double delta = times[i] - times[i - 1];
    const int steps = std::max(1, static_cast<int>(std::ceil(delta / dt_target - 1e-9)));
    const SegmentResult res =
        integrate_segment_bound(spec, x, SegmentPlan{times[i - 1], delta, steps}, nullptr, ws);
    if (!res.finite) {
      result.truncated = true;
      break;
    }
    x = res.x_end;
    result.trajectory.states.row(i) = (sigma.cwiseProduct(x)).transpose();
    ++filled;
  }
  if (result.truncated) {
    result.trajectory.times = times.head(filled);
    result.trajectory.states.conservativeResize(filled, spec.dimension);
  }
  return result;
}

ForecastEnsemble posterior_forecast(const ModelSpec& spec, const PosteriorSamples& samples,
                                    const Eigen::VectorXd& x0, const Eigen::VectorXd& times,
                                    const Eigen::VectorXd& sigma, int sample_count,
                                    bool include_noise, std::uint64_t seed, double dt_target,
                                    bool keep_members) {
  if (sample_count < 1 || sample_count > samples.retained_count())
    throw std::invalid_argument("forecast: sample_count must be in [1, retained chain length]");

  ForecastEnsemble ens;
  ens.times = times;
  ens.noise_included = include_noise;
  const auto T = times.size();
  const int D = spec.dimension;
  ens.mean = Eigen::MatrixXd::Zero(T, D);
  ens.variance = Eigen::MatrixXd::Zero(T, D);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(T, D);  // Welford accumulator
  Eigen::MatrixXd delta(T, D);

  Rng rng(derive_seed(seed, "forecast-noise"));
  const int first = samples.size() - sample_count;  // last sample_count retained draws
  int used = 0;
  for (int s = 0; s < sample_count; ++s) {
    const ModelParams draw = samples.params_at(first + s);
    PredictResult pred = predict_trajectory(spec, draw, x0, times, sigma, dt_target);
    // consume the noise stream deterministically whether or not it is added
    Eigen::MatrixXd member = Eigen::MatrixXd::Zero(T, D);
    const double noise_sd = std::exp(-0.5 * draw.log_gamma);
    for (Eigen::Index i = 0; i < T; ++i) {
      for (int j = 0; j < D; ++j) {
        const double eps = rng.normal();
        if (include_noise) member(i, j) = sigma[j] * (noise_sd * eps);
      }
    }
    if (pred.truncated) {
      ++ens.excluded_members;
      continue;
    }
    member += pred.trajectory.states;
    ++used;
    delta = member - ens.mean;
    ens.mean += delta / used;
    m2 += delta.cwiseProduct(member - ens.mean);
    if (keep_members) ens.members.push_back(member);
  }

  if (used == 0) throw std::runtime_error("forecast: every ensemble member diverged");
  ens.members_used = used;
  ens.variance = m2 / used;
  ens.unreliable = ens.excluded_members * 10 > sample_count;

  const ModelParams map = map_estimate(samples);
  ens.map_trajectory = predict_trajectory(spec, map, x0, times, sigma, dt_target).trajectory;
  return ens;
}

void save_forecast_csv(std::ostream& out, const ForecastEnsemble& ensemble,
                       const std::vector<std::string>& state_names, bool emit_members) {
  const auto D = ensemble.mean.cols();
  const auto name = [&](Eigen::Index j) {
    return j < static_cast<Eigen::Index>(state_names.size())
               ? state_names[static_cast<size_t>(j)]
               : "x" + std::to_string(j + 1);
  };
  out << "t";
  for (Eigen::Index j = 0; j < D; ++j) {
    out << ",mean_" << name(j) << ",sd_" << name(j) << ",map_" << name(j);
  }
  if (emit_members) {
    for (size_t m = 0; m < ensemble.members.size(); ++m) {
      for (Eigen::Index j = 0; j < D; ++j) out << ",m" << m << "_" << name(j);
    }
  }
  out << "\n";
  const auto map_len = ensemble.map_trajectory.times.size();
  for (Eigen::Index i = 0; i < ensemble.times.size(); ++i) {
    out << format_double(ensemble.times[i]);
    for (Eigen::Index j = 0; j < D; ++j) {
      out << "," << format_double(ensemble.mean(i, j)) << ","
          << format_double(std::sqrt(ensemble.variance(i, j))) << ",";
      out << (i < map_len ? format_double(ensemble.map_trajectory.states(i, j)) : "nan");
    }
    if (emit_members) {
      for (const auto& member : ensemble.members) {
        for (Eigen::Index j = 0; j < D; ++j) out << "," << format_double(member(i, j));
      }
    }
    out << "\n";
  }
}

void save_forecast_csv_file(const std::string& path, const ForecastEnsemble& ensemble,
                            const std::vector<std::string>& state_names, bool emit_members) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  save_forecast_csv(out, ensemble, state_names, emit_members);
}

std::string forecast_summary_json(const ForecastEnsemble& ensemble) {
  nlohmann::ordered_json j;
  j["points"] = ensemble.times.size();
  j["dimension"] = ensemble.mean.cols();
  j["members_used"] = ensemble.members_used;
  j["excluded_members"] = ensemble.excluded_members;
  j["noise_included"] = ensemble.noise_included;
  j["unreliable"] = ensemble.unreliable;
  j["map_truncated"] = ensemble.map_trajectory.times.size() != ensemble.times.size();
  return j.dump(2);
}

}  // namespace bsid
