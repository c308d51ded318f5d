#include "bsid/features.hpp"

#include <cmath>
#include <stdexcept>

namespace bsid {

namespace {

void enumerate_monomials(int dimension, int degree, int position, Eigen::VectorXi& scratch,
                         std::vector<Feature>& out) {
  if (position == dimension - 1) {
    scratch[position] = degree;
    Feature f;
    f.kind = Feature::Kind::monomial;
    f.exponents = scratch;
    out.push_back(std::move(f));
    return;
  }
  for (int e = degree; e >= 0; --e) {
    scratch[position] = e;
    enumerate_monomials(dimension, degree - e, position + 1, scratch, out);
  }
}

}  // namespace

FeatureLibrary FeatureLibrary::polynomial(int dimension, int max_degree,
                                          const std::vector<Transform>& transforms) {
  if (dimension < 1) throw std::invalid_argument("feature library: dimension must be >= 1");
  if (max_degree < 0) throw std::invalid_argument("feature library: max_degree must be >= 0");

  FeatureLibrary lib;
  lib.dimension_ = dimension;
  lib.max_degree_ = max_degree;

  Eigen::VectorXi scratch = Eigen::VectorXi::Zero(dimension);
  for (int degree = 0; degree <= max_degree; ++degree) {
    enumerate_monomials(dimension, degree, 0, scratch, lib.features_);
  }

  for (const Transform& t : transforms) {
    if (t.coordinate < 0 || t.coordinate >= dimension)
      throw std::invalid_argument("feature library: transform coordinate out of range");
    for (const Transform& seen : lib.transforms_) {
      if (seen.kind == t.kind && seen.coordinate == t.coordinate) {
        const char* name = t.kind == Transform::Kind::sine ? "sin" : "cos";
        throw std::invalid_argument(std::string("feature library: duplicate transform ") + name +
                                    "(x" + std::to_string(t.coordinate + 1) + ")");
      }
    }
    Feature f;
    f.kind = t.kind == Transform::Kind::sine ? Feature::Kind::sine : Feature::Kind::cosine;
    f.coordinate = t.coordinate;
    lib.features_.push_back(std::move(f));
    lib.transforms_.push_back(t);
  }
  return lib;
}

void FeatureLibrary::eval(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const {
  const double* xp = x.data();
  for (size_t k = 0; k < features_.size(); ++k) {
    const Feature& f = features_[k];
    double v = 1.0;
    switch (f.kind) {
      case Feature::Kind::monomial: {
        const int* e = f.exponents.data();
        for (int j = 0; j < dimension_; ++j) {
          for (int p = 0; p < e[j]; ++p) v *= xp[j];
        }
        break;
      }
      case Feature::Kind::sine:
        v = std::sin(xp[f.coordinate]);
        break;
      case Feature::Kind::cosine:
        v = std::cos(xp[f.coordinate]);
        break;
    }
    out[static_cast<Eigen::Index>(k)] = v;
  }
}

void FeatureLibrary::eval_with_jacobian(const Eigen::VectorXd& x, Eigen::Ref<Eigen::VectorXd> phi,
                                        Eigen::Ref<Eigen::MatrixXd> jac) const {
  eval(x, phi);
  jac.setZero();
  const double* xp = x.data();
  for (size_t k = 0; k < features_.size(); ++k) {
    const Feature& f = features_[k];
    const auto row = static_cast<Eigen::Index>(k);
    switch (f.kind) {
      case Feature::Kind::monomial: {
        const int* e = f.exponents.data();
        for (int j = 0; j < dimension_; ++j) {
          if (e[j] == 0) continue;
          // d/dx_j of prod x_i^{e_i} = e_j * x_j^{e_j-1} * prod_{i!=j} x_i^{e_i}
          double d = static_cast<double>(e[j]);
          for (int i = 0; i < dimension_; ++i) {
            const int reps = (i == j) ? e[i] - 1 : e[i];
            for (int p = 0; p < reps; ++p) d *= xp[i];
          }
          jac(row, j) = d;
        }
        break;
      }
      case Feature::Kind::sine:
        jac(row, f.coordinate) = std::cos(xp[f.coordinate]);
        break;
      case Feature::Kind::cosine:
        jac(row, f.coordinate) = -std::sin(xp[f.coordinate]);
        break;
    }
  }
}

std::string FeatureLibrary::describe(int k) const {
  const Feature& f = features_[static_cast<size_t>(k)];
  if (f.kind == Feature::Kind::sine) return "sin(x" + std::to_string(f.coordinate + 1) + ")";
  if (f.kind == Feature::Kind::cosine) return "cos(x" + std::to_string(f.coordinate + 1) + ")";
  if (f.exponents.sum() == 0) return "1";
  std::string s;
  for (int j = 0; j < dimension_; ++j) {
    const int e = f.exponents[j];
    if (e == 0) continue;
    if (!s.empty()) s += "*";
    s += "x" + std::to_string(j + 1);
    if (e > 1) s += "^" + std::to_string(e);
  }
  return s;
}

}  // namespace bsid
