#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "bsid/model.hpp"
#include "bsid/rng.hpp"

namespace testutil {

// |a - b| measured against max(1, |a|, |b|): relative for large values,
// absolute near zero, which is the only meaningful bound for FD comparisons.
inline double scaled_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// central finite difference of a scalar function
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Eigen::VectorXd random_vector(bsid::Rng& rng, int n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

// random theta with every coordinate kept away from the |.| kink
inline Eigen::VectorXd random_theta(bsid::Rng& rng, int n, double scale, double margin) {
  Eigen::VectorXd v = random_vector(rng, n, scale);
  for (int i = 0; i < n; ++i) {
    if (std::abs(v[i]) < margin) v[i] = v[i] < 0.0 ? -margin : margin;
  }
  return v;
}

// bitwise equality for Eigen objects
template <class A, class B>
bool exact_equal(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (a(i, j) != b(i, j)) return false;
    }
  }
  return true;
}

}  // namespace testutil
