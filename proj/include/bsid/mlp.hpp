#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace bsid {

/// Fully-connected tanh network used as a closure term on top of a
/// dictionary model. It reads a subset of the state coordinates and adds its
/// outputs to a subset of the state equations; non-targeted equations receive
/// zero. Weights live in the model's flat parameter vector, layer by layer,
/// each layer stored as the row-major weight matrix followed by the bias.
class MlpClosure {
 public:
  MlpClosure() = default;
  MlpClosure(std::vector<int> input_indices, std::vector<int> output_indices,
             std::vector<int> hidden_widths);

  int parameter_count() const { return parameter_count_; }
  const std::vector<int>& input_indices() const { return input_indices_; }
  const std::vector<int>& output_indices() const { return output_indices_; }
  const std::vector<int>& hidden_widths() const { return hidden_widths_; }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }

  /// Glorot-uniform weights, zero biases.
  Eigen::VectorXd init_weights(std::uint64_t seed) const;

  struct Workspace {
    // post-activation value per layer (index 0 = input), plus a delta buffer
    std::vector<Eigen::VectorXd> act;
    std::vector<Eigen::VectorXd> delta;
  };
  Workspace make_workspace() const;

  /// Adds the closure contribution f_w(x) onto `out` (a full D-vector).
  void add_contribution(const double* weights, const Eigen::VectorXd& x,
                        Eigen::Ref<Eigen::VectorXd> out, Workspace& ws) const;

  /// Reverse pass for cotangent^T d f_w / d(x, w). Adds the state part into
  /// `x_bar` and the weight part into `w_bar` (length parameter_count()).
  void vjp(const double* weights, const Eigen::VectorXd& x, const Eigen::VectorXd& cotangent,
           Eigen::Ref<Eigen::VectorXd> x_bar, double* w_bar, Workspace& ws) const;

  bool operator==(const MlpClosure& other) const {
    return input_indices_ == other.input_indices_ && output_indices_ == other.output_indices_ &&
           hidden_widths_ == other.hidden_widths_;
  }

 private:
  void forward(const double* weights, const Eigen::VectorXd& x, Workspace& ws) const;

  std::vector<int> input_indices_;
  std::vector<int> output_indices_;
  std::vector<int> hidden_widths_;
  std::vector<int> layer_sizes_;  // [in, hidden..., out]
  int parameter_count_ = 0;
};

}  // namespace bsid
