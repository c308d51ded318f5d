#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bsid/data.hpp"
#include "bsid/sampler.hpp"

namespace bsid {

/// Retained sample with the largest recorded log-posterior; earliest index
/// wins ties.
ModelParams map_estimate(const PosteriorSamples& samples);

struct PredictResult {
  Trajectory trajectory;  // physical units
  bool truncated = false; // integration diverged before the last query time
};

/// Deterministic trajectory for one parameter draw: x0 is normalized by
/// sigma, the model is integrated segment-by-segment through the query grid
/// (N = ceil(dt/dt_target) sub-steps each), and the result is mapped back to
/// physical units. On divergence the trajectory is cut at the last finite
/// point and flagged.
PredictResult predict_trajectory(const ModelSpec& spec, const ModelParams& params,
                                 const Eigen::VectorXd& x0, const Eigen::VectorXd& times,
                                 const Eigen::VectorXd& sigma, double dt_target = 0.01);

struct ForecastEnsemble {
  Eigen::VectorXd times;
  std::vector<Eigen::MatrixXd> members;  // per member: (grid length) x D, physical units
  Eigen::MatrixXd mean;                  // (grid length) x D
  Eigen::MatrixXd variance;              // population variance across members
  Trajectory map_trajectory;
  bool noise_included = false;
  int members_used = 0;
  int excluded_members = 0;
  bool unreliable = false;  // more than 10% of members diverged
};

/// Pushes the last `sample_count` retained draws through the model from x0,
/// optionally adding per-draw observation noise eps ~ N(0, gamma^-1) in the
/// normalized coordinates, and accumulates first and second moments.
ForecastEnsemble posterior_forecast(const ModelSpec& spec, const PosteriorSamples& samples,
                                    const Eigen::VectorXd& x0, const Eigen::VectorXd& times,
                                    const Eigen::VectorXd& sigma, int sample_count,
                                    bool include_noise, std::uint64_t seed,
                                    double dt_target = 0.01, bool keep_members = false);

/// Forecast CSV: time, per-dimension mean, sd and MAP columns, then optional
/// per-member columns.
void save_forecast_csv(std::ostream& out, const ForecastEnsemble& ensemble,
                       const std::vector<std::string>& state_names, bool emit_members);
void save_forecast_csv_file(const std::string& path, const ForecastEnsemble& ensemble,
                            const std::vector<std::string>& state_names, bool emit_members);
std::string forecast_summary_json(const ForecastEnsemble& ensemble);

}  // namespace bsid
