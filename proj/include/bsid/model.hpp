#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bsid/features.hpp"
#include "bsid/mlp.hpp"

namespace bsid {

/// Names and canonical order of the yeast-glycolysis rate constants. The
/// built-in right-hand side exposes each of them as either a fixed structural
/// constant or a free parameter, sampled as its logarithm so that all free
/// coordinates live on a comparable O(1) scale and stay positive.
inline constexpr int kGlycolysisScalarCount = 14;
const std::array<std::string, kGlycolysisScalarCount>& glycolysis_scalar_names();

/// Parametrized right-hand side f(x, t; theta).
///
/// Two kinds are supported:
///  - dictionary: f = A phi(x) + f_w(x), where the mask selects which entries
///    of A are free parameters (unmasked entries are fixed constants of the
///    spec), and f_w is an optional tanh-MLP closure.
///  - glycolysis: the dedicated 7-state yeast glycolysis system, with its 14
///    rate constants individually masked free/fixed. Free entries of theta are
///    log rate constants.
///
/// theta flattening order: masked dictionary coefficients row-major (equation
/// major, feature minor), then closure weights layer by layer; for the
/// glycolysis kind, log of each masked scalar in canonical name order.
///
/// `sigma` holds per-dimension state scales. Dictionary models are expressed
/// directly in the (normalized) training coordinates so their sigma is all
/// ones; the glycolysis model keeps physical rate constants and wraps the
/// physical dynamics as f~(x~) = S^-1 f(S x~) with S = diag(sigma).
struct ModelSpec {
  enum class Kind { dictionary, glycolysis };

  Kind kind = Kind::dictionary;
  int dimension = 0;

  // dictionary kind
  FeatureLibrary library;
  std::vector<std::uint8_t> mask;     // D x K row-major, 1 = free parameter
  Eigen::MatrixXd fixed_coefficients; // D x K, used where mask is 0
  std::optional<MlpClosure> closure;

  // glycolysis kind
  std::array<std::uint8_t, kGlycolysisScalarCount> scalar_mask{};
  std::array<double, kGlycolysisScalarCount> fixed_scalars{};

  Eigen::VectorXd sigma;  // state scales; ones unless set

  static ModelSpec dictionary(int dimension, const FeatureLibrary& library);
  static ModelSpec glycolysis_calibration(const Eigen::VectorXd& sigma);

  int dictionary_parameter_count() const;
  int closure_parameter_count() const { return closure ? closure->parameter_count() : 0; }
  int parameter_count() const;

  bool masked(int equation, int feature) const {
    return mask[static_cast<size_t>(equation) * library.size() + feature] != 0;
  }
  void set_mask(int equation, int feature, bool free_param) {
    mask[static_cast<size_t>(equation) * library.size() + feature] = free_param ? 1 : 0;
  }

  /// Index into theta of the masked dictionary coefficient (equation, feature);
  /// -1 if that entry is fixed.
  int coefficient_index(int equation, int feature) const;

  std::string to_json_string() const;
  static ModelSpec from_json_string(const std::string& text);
};

/// Full sampling state Theta = [theta, log lambda, log gamma].
struct ModelParams {
  Eigen::VectorXd theta;
  double log_lambda = 0.0;
  double log_gamma = 0.0;
};

/// Scratch buffers for right-hand-side evaluation; one per thread/segment.
struct EvalWorkspace {
  Eigen::VectorXd phi;
  Eigen::MatrixXd phi_jac;
  Eigen::MatrixXd coeff;            // assembled D x K coefficient matrix
  Eigen::VectorXd closure_w;        // closure weight block of theta
  std::vector<int> coeff_theta;     // D*K -> theta index, -1 where fixed
  Eigen::VectorXd x_phys;           // glycolysis: unscaled state
  Eigen::VectorXd cot_scaled;       // glycolysis: rescaled cotangent
  std::array<double, kGlycolysisScalarCount> scalars{};
  std::vector<int> scalar_theta;    // 14 -> theta index, -1 where fixed
  MlpClosure::Workspace mlp;
  bool bound = false;
};

EvalWorkspace make_workspace(const ModelSpec& spec);

/// Binds theta into the workspace (assembles the coefficient matrix /
/// exponentiates glycolysis rates). Must be called whenever theta changes.
void bind_parameters(const ModelSpec& spec, const Eigen::VectorXd& theta, EvalWorkspace& ws);

/// f(x, t; theta) written into `out`. Returns false if any entry came out
/// non-finite (monomial overflow, Hill-term breakdown); the result is still
/// written so callers can inspect it. Requires bind_parameters first.
bool eval_rhs_bound(const ModelSpec& spec, const Eigen::VectorXd& x, double t,
                    Eigen::Ref<Eigen::VectorXd> out, EvalWorkspace& ws);

/// cotangent^T df/dx into x_bar (overwritten), cotangent^T df/dtheta
/// accumulated into theta_bar. Requires bind_parameters first.
void vjp_rhs_bound(const ModelSpec& spec, const Eigen::VectorXd& x, double t,
                   const Eigen::VectorXd& cotangent, Eigen::Ref<Eigen::VectorXd> x_bar,
                   Eigen::Ref<Eigen::VectorXd> theta_bar, EvalWorkspace& ws);

/// Convenience wrappers that allocate their own workspace.
Eigen::VectorXd eval_rhs(const ModelSpec& spec, const Eigen::VectorXd& theta,
                         const Eigen::VectorXd& x, double t);
std::pair<Eigen::VectorXd, Eigen::VectorXd> vjp_rhs(const ModelSpec& spec,
                                                    const Eigen::VectorXd& theta,
                                                    const Eigen::VectorXd& x, double t,
                                                    const Eigen::VectorXd& cotangent);

/// Maps dictionary coefficients fitted on sigma-normalized data back to
/// physical units: for the coefficient of prod x_j^{e_j} in equation i,
/// physical = normalized * sigma_i / prod sigma_j^{e_j}. Requires a
/// monomial-only library (sin/cos coefficients have no such closed form).
/// Closure weights pass through unchanged; glycolysis parameters map from
/// their sampled logs to physical rates, independent of sigma.
Eigen::VectorXd denormalize_coefficients(const ModelSpec& spec,
                                         const Eigen::VectorXd& theta_normalized,
                                         const Eigen::VectorXd& sigma);

/// Inverse of denormalize_coefficients.
Eigen::VectorXd normalize_coefficients(const ModelSpec& spec,
                                       const Eigen::VectorXd& theta_physical,
                                       const Eigen::VectorXd& sigma);

/// Descriptive label for each theta coordinate ("eq1:x2^3", "mlp:w17",
/// "log(k1)"), used by reports and summaries.
std::vector<std::string> parameter_labels(const ModelSpec& spec);

}  // namespace bsid
