#include "bsid/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "bsid/rng.hpp"

namespace bsid {

MlpClosure::MlpClosure(std::vector<int> input_indices, std::vector<int> output_indices,
                       std::vector<int> hidden_widths)
    : input_indices_(std::move(input_indices)),
      output_indices_(std::move(output_indices)),
      hidden_widths_(std::move(hidden_widths)) {
  if (input_indices_.empty()) throw std::invalid_argument("mlp closure: no input coordinates");
  if (output_indices_.empty()) throw std::invalid_argument("mlp closure: no output equations");
  for (int w : hidden_widths_) {
    if (w < 1) throw std::invalid_argument("mlp closure: hidden width must be positive");
  }
  layer_sizes_.push_back(static_cast<int>(input_indices_.size()));
  for (int w : hidden_widths_) layer_sizes_.push_back(w);
  layer_sizes_.push_back(static_cast<int>(output_indices_.size()));
  parameter_count_ = 0;
  for (size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    parameter_count_ += (layer_sizes_[l] + 1) * layer_sizes_[l + 1];
  }
}

Eigen::VectorXd MlpClosure::init_weights(std::uint64_t seed) const {
  Eigen::VectorXd w(parameter_count_);
  Rng rng(seed);
  Eigen::Index pos = 0;
  for (size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const int fan_in = layer_sizes_[l];
    const int fan_out = layer_sizes_[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < fan_in * fan_out; ++i) {
      w[pos++] = bound * (2.0 * rng.uniform() - 1.0);
    }
    for (int i = 0; i < fan_out; ++i) w[pos++] = 0.0;  // biases
  }
  return w;
}

MlpClosure::Workspace MlpClosure::make_workspace() const {
  Workspace ws;
  ws.act.resize(layer_sizes_.size());
  ws.delta.resize(layer_sizes_.size());
  for (size_t l = 0; l < layer_sizes_.size(); ++l) {
    ws.act[l].resize(layer_sizes_[l]);
    ws.delta[l].resize(layer_sizes_[l]);
  }
  return ws;
}

void MlpClosure::forward(const double* weights, const Eigen::VectorXd& x, Workspace& ws) const {
  for (size_t i = 0; i < input_indices_.size(); ++i) {
    ws.act[0][static_cast<Eigen::Index>(i)] = x[input_indices_[i]];
  }
  const double* w = weights;
  const size_t last = layer_sizes_.size() - 1;
  for (size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const int in = layer_sizes_[l];
    const int out = layer_sizes_[l + 1];
    const double* bias = w + in * out;
    const double* src = ws.act[l].data();
    double* dst = ws.act[l + 1].data();
    for (int o = 0; o < out; ++o) {
      double acc = bias[o];
      const double* row = w + o * in;
      for (int i = 0; i < in; ++i) acc += row[i] * src[i];
      dst[o] = (l + 1 == last) ? acc : std::tanh(acc);  // linear output layer
    }
    w = bias + out;
  }
}

void MlpClosure::add_contribution(const double* weights, const Eigen::VectorXd& x,
                                  Eigen::Ref<Eigen::VectorXd> out, Workspace& ws) const {
  forward(weights, x, ws);
  const Eigen::VectorXd& y = ws.act.back();
  for (size_t i = 0; i < output_indices_.size(); ++i) {
    out[output_indices_[i]] += y[static_cast<Eigen::Index>(i)];
  }
}

void MlpClosure::vjp(const double* weights, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& cotangent, Eigen::Ref<Eigen::VectorXd> x_bar,
                     double* w_bar, Workspace& ws) const {
  forward(weights, x, ws);

  const size_t last = layer_sizes_.size() - 1;
  for (size_t i = 0; i < output_indices_.size(); ++i) {
    ws.delta[last][static_cast<Eigen::Index>(i)] = cotangent[output_indices_[i]];
  }

  // layer weight offsets
  std::vector<int> offsets(last, 0);
  {
    int pos = 0;
    for (size_t l = 0; l < last; ++l) {
      offsets[l] = pos;
      pos += (layer_sizes_[l] + 1) * layer_sizes_[l + 1];
    }
  }

  for (size_t l = last; l-- > 0;) {
    const int in = layer_sizes_[l];
    const int out = layer_sizes_[l + 1];
    const double* w = weights + offsets[l];
    double* wb = w_bar + offsets[l];
    double* bb = wb + in * out;
    const double* src = ws.act[l].data();
    const double* d_out = ws.delta[l + 1].data();
    double* d_in = ws.delta[l].data();
    for (int i = 0; i < in; ++i) d_in[i] = 0.0;
    for (int o = 0; o < out; ++o) {
      const double g = d_out[o];
      bb[o] += g;
      const double* row = w + o * in;
      double* wrow = wb + o * in;
      for (int i = 0; i < in; ++i) {
        wrow[i] += g * src[i];
        d_in[i] += g * row[i];
      }
    }
    if (l > 0) {
      // tanh' through the post-activation values stored in act[l]
      for (int i = 0; i < in; ++i) d_in[i] *= 1.0 - src[i] * src[i];
    }
  }

  for (size_t i = 0; i < input_indices_.size(); ++i) {
    x_bar[input_indices_[i]] += ws.delta[0][static_cast<Eigen::Index>(i)];
  }
}

}  // namespace bsid
