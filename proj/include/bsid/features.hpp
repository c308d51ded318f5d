#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace bsid {

/// One dictionary entry: either a monomial given by its exponent vector, or a
/// unary sin/cos transform of a single coordinate.
struct Feature {
  enum class Kind { monomial, sine, cosine };
  Kind kind = Kind::monomial;
  Eigen::VectorXi exponents;  // size D, monomials only
  int coordinate = -1;        // transforms only

  int total_degree() const { return kind == Kind::monomial ? exponents.sum() : 0; }
};

struct Transform {
  enum class Kind { sine, cosine };
  Kind kind;
  int coordinate;
};

/// Ordered feature set phi(x). Monomials are enumerated in graded
/// lexicographic order (total degree ascending, then exponents of the leading
/// coordinates first), matching [1, x1, x2, x1^2, x1 x2, x2^2, ...] for D=2.
/// Transforms follow the monomials in declaration order. The ordering is a
/// contract: serialized specs and flattened coefficient vectors depend on it.
class FeatureLibrary {
 public:
  FeatureLibrary() = default;

  /// All monomials of total degree <= max_degree over `dimension` variables,
  /// followed by the given transforms. Throws on duplicate transforms.
  static FeatureLibrary polynomial(int dimension, int max_degree,
                                   const std::vector<Transform>& transforms = {});

  int dimension() const { return dimension_; }
  int size() const { return static_cast<int>(features_.size()); }
  const Feature& feature(int k) const { return features_[static_cast<size_t>(k)]; }
  const std::vector<Feature>& features() const { return features_; }
  int max_degree() const { return max_degree_; }
  const std::vector<Transform>& transforms() const { return transforms_; }
  bool monomials_only() const { return transforms_.empty(); }

  /// phi(x); out must have size K.
  void eval(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const;

  /// phi(x) and the K x D Jacobian d phi_k / d x_j.
  void eval_with_jacobian(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> phi,
                          Eigen::Ref<Eigen::MatrixXd> jac) const;

  /// Human-readable descriptor, e.g. "1", "x1^2*x2", "sin(x1)".
  std::string describe(int k) const;

 private:
  int dimension_ = 0;
  int max_degree_ = 0;
  std::vector<Feature> features_;
  std::vector<Transform> transforms_;
};

}  // namespace bsid
