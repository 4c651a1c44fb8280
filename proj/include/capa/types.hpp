#pragma once

#include <array>
#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace capa {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;

using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;
using VectorR = Eigen::VectorXd;

// Thrown when a linear solve or factorization produces non-finite output.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when an iterative procedure (multiplier bracket, bisection) fails.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when the channel kernel is evaluated at (or too close to) R = 0.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace capa
