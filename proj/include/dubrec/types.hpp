#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace dubrec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Numerically stable logistic function.
inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Clamp a probability into [eps, 1 - eps].
inline double clamp_unit(double p, double eps) {
  if (p < eps) return eps;
  if (p > 1.0 - eps) return 1.0 - eps;
  return p;
}

}  // namespace dubrec
