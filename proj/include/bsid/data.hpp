#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bsid/integrate.hpp"

namespace bsid {

/// Time-stamped observations of a D-dimensional state. Times are strictly
/// increasing; the state matrix has one row per sample.
struct Trajectory {
  Eigen::VectorXd times;
  Eigen::MatrixXd states;  // m x D
  std::vector<std::string> names;  // column names, excluding time

  int length() const { return static_cast<int>(times.size()); }
  int dimension() const { return static_cast<int>(states.cols()); }
};

/// Training set of observation pairs {(x(t_i), x(t_i + dt_i))} with one
/// integration plan per pair. Irregular sampling is supported by
/// construction: each pair carries its own delta_t and sub-step count.
struct Dataset {
  struct Pair {
    Eigen::VectorXd x_start;
    Eigen::VectorXd x_end;
    SegmentPlan plan;
  };

  std::vector<Pair> pairs;
  Eigen::VectorXd sigma;  // per-dimension scales (ones while unnormalized)
  bool normalized = false;
  int dimension = 0;

  int size() const { return static_cast<int>(pairs.size()); }
};

/// CSV with a mandatory header row; first column is time, remaining columns
/// the state. Values are written with enough digits to round-trip exactly.
Trajectory load_trajectory_csv(std::istream& in);
Trajectory load_trajectory_csv_file(const std::string& path);
void save_trajectory_csv(std::ostream& out, const Trajectory& traj);
void save_trajectory_csv_file(const std::string& path, const Trajectory& traj);

/// Consecutive pairs, each planned with N_i = max(1, ceil(delta_t_i / dt_target)).
Dataset build_pairs(const Trajectory& traj, double dt_target);

/// Divides states by the per-dimension population standard deviation of the
/// start states. The mean is deliberately not subtracted. Idempotent up to
/// rounding: a second application composes scales that are all ~1.
Dataset normalize(const Dataset& dataset);

/// Undoes normalize (states multiplied back by sigma).
Dataset denormalize(const Dataset& dataset);

/// Gaussian noise with per-dimension sd = relative_level * sd(column).
Trajectory add_noise(const Trajectory& traj, double relative_level, std::uint64_t seed);

/// Gaussian noise with one absolute sd applied to every column.
Trajectory add_noise_absolute(const Trajectory& traj, double sd, std::uint64_t seed);

/// JSON manifest tying a CSV to the exact training set built from it
/// (dt_target, resulting sigma, pair count, generating seed).
struct DatasetManifest {
  std::string csv_path;
  double dt_target = 0.0;
  std::uint64_t seed = 0;
  int pair_count = 0;
  std::vector<double> sigma;
};

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);
void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

/// Full-precision formatting used by every CSV writer (round-trips doubles).
std::string format_double(double v);

}  // namespace bsid
