#include "bsid/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "bsid/rng.hpp"

namespace bsid {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, int row) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("csv row " + std::to_string(row) + ": non-numeric cell '" + cell +
                             "'");
  }
  return value;
}

}  // namespace

Trajectory load_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty stream, header required");
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2) throw std::runtime_error("csv: need a time column and at least one state column");
  for (auto& h : header) {
    while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
  }

  const int D = static_cast<int>(header.size()) - 1;
  std::vector<double> times;
  std::vector<double> values;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != D + 1) {
      throw std::runtime_error("csv row " + std::to_string(row) + ": expected " +
                               std::to_string(D + 1) + " cells, got " +
                               std::to_string(cells.size()));
    }
    times.push_back(parse_cell(cells[0], row));
    for (int j = 1; j <= D; ++j) values.push_back(parse_cell(cells[static_cast<size_t>(j)], row));
    const size_t m = times.size();
    if (m >= 2 && !(times[m - 1] > times[m - 2])) {
      throw std::runtime_error("csv row " + std::to_string(row) +
                               ": times must be strictly increasing");
    }
    for (int j = 0; j < D; ++j) {
      const double v = values[(m - 1) * static_cast<size_t>(D) + static_cast<size_t>(j)];
      if (!std::isfinite(v))
        throw std::runtime_error("csv row " + std::to_string(row) + ": non-finite state value");
    }
  }

  Trajectory traj;
  const int m = static_cast<int>(times.size());
  traj.times = Eigen::Map<Eigen::VectorXd>(times.data(), m);
  traj.states.resize(m, D);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < D; ++j) {
      traj.states(i, j) = values[static_cast<size_t>(i) * D + static_cast<size_t>(j)];
    }
  }
  traj.names.assign(header.begin() + 1, header.end());
  return traj;
}

Trajectory load_trajectory_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return load_trajectory_csv(in);
}

void save_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t";
  for (int j = 0; j < traj.dimension(); ++j) {
    out << ",";
    if (j < static_cast<int>(traj.names.size()) && !traj.names[static_cast<size_t>(j)].empty()) {
      out << traj.names[static_cast<size_t>(j)];
    } else {
      out << "x" << (j + 1);
    }
  }
  out << "\n";
  for (int i = 0; i < traj.length(); ++i) {
    out << format_double(traj.times[i]);
    for (int j = 0; j < traj.dimension(); ++j) out << "," << format_double(traj.states(i, j));
    out << "\n";
  }
}

void save_trajectory_csv_file(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  save_trajectory_csv(out, traj);
}

Dataset build_pairs(const Trajectory& traj, double dt_target) {
  if (!(dt_target > 0.0)) throw std::invalid_argument("build_pairs: dt_target must be positive");
  if (traj.length() < 2) throw std::invalid_argument("build_pairs: need at least two samples");
  Dataset ds;
  ds.dimension = traj.dimension();
  ds.sigma = Eigen::VectorXd::Ones(ds.dimension);
  ds.pairs.reserve(static_cast<size_t>(traj.length()) - 1);
  for (int i = 0; i + 1 < traj.length(); ++i) {
    Dataset::Pair pair;
    pair.x_start = traj.states.row(i).transpose();
    pair.x_end = traj.states.row(i + 1).transpose();
    const double delta = traj.times[i + 1] - traj.times[i];
    // tolerance keeps exact multiples (e.g. 0.02/0.01) from rounding up
    const int steps = std::max(1, static_cast<int>(std::ceil(delta / dt_target - 1e-9)));
    pair.plan = SegmentPlan{traj.times[i], delta, steps};
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

Dataset normalize(const Dataset& dataset) {
  const int D = dataset.dimension;
  const auto n = static_cast<double>(dataset.pairs.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
  for (const auto& p : dataset.pairs) mean += p.x_start;
  mean /= n;
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(D);
  for (const auto& p : dataset.pairs) scale += (p.x_start - mean).cwiseAbs2();
  scale = (scale / n).cwiseSqrt();  // population estimator over start states
  for (int j = 0; j < D; ++j) {
    if (!(scale[j] > 0.0)) {
      throw std::invalid_argument("normalize: dimension " + std::to_string(j + 1) +
                                  " has zero spread");
    }
  }

  // idempotent: re-normalizing composes scales, and a normalized input has
  // unit spread so its states barely move
  Dataset out = dataset;
  out.sigma = dataset.normalized ? dataset.sigma.cwiseProduct(scale).eval() : scale;
  for (auto& p : out.pairs) {
    p.x_start.array() /= scale.array();
    p.x_end.array() /= scale.array();
  }
  out.normalized = true;
  return out;
}

Dataset denormalize(const Dataset& dataset) {
  if (!dataset.normalized) throw std::invalid_argument("denormalize: dataset is not normalized");
  Dataset out = dataset;
  for (auto& p : out.pairs) {
    p.x_start.array() *= dataset.sigma.array();
    p.x_end.array() *= dataset.sigma.array();
  }
  out.sigma = Eigen::VectorXd::Ones(dataset.dimension);
  out.normalized = false;
  return out;
}

namespace {

Trajectory add_noise_impl(const Trajectory& traj, const Eigen::VectorXd& sd, std::uint64_t seed) {
  Trajectory out = traj;
  Rng rng(seed);
  for (int i = 0; i < traj.length(); ++i) {
    for (int j = 0; j < traj.dimension(); ++j) {
      out.states(i, j) += sd[j] * rng.normal();
    }
  }
  return out;
}

}  // namespace

Trajectory add_noise(const Trajectory& traj, double relative_level, std::uint64_t seed) {
  if (relative_level < 0.0) throw std::invalid_argument("add_noise: level must be >= 0");
  if (relative_level == 0.0) return traj;
  const int m = traj.length();
  Eigen::VectorXd sd(traj.dimension());
  for (int j = 0; j < traj.dimension(); ++j) {
    const double mean = traj.states.col(j).mean();
    sd[j] = relative_level *
            std::sqrt((traj.states.col(j).array() - mean).square().sum() / m);
  }
  return add_noise_impl(traj, sd, seed);
}

Trajectory add_noise_absolute(const Trajectory& traj, double sd, std::uint64_t seed) {
  if (sd < 0.0) throw std::invalid_argument("add_noise_absolute: sd must be >= 0");
  if (sd == 0.0) return traj;
  return add_noise_impl(traj, Eigen::VectorXd::Constant(traj.dimension(), sd), seed);
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::ordered_json j;
  j["csv"] = manifest.csv_path;
  j["dt_target"] = manifest.dt_target;
  j["seed"] = manifest.seed;
  j["pair_count"] = manifest.pair_count;
  j["sigma"] = manifest.sigma;
  return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  DatasetManifest m;
  m.csv_path = j.at("csv").get<std::string>();
  m.dt_target = j.at("dt_target").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.pair_count = j.at("pair_count").get<int>();
  m.sigma = j.at("sigma").get<std::vector<double>>();
  return m;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << manifest_to_json(manifest) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

}  // namespace bsid
