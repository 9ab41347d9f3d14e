#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ligp/error.hpp"

namespace ligp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Isotropic squared-exponential kernel settings shared by every covariance
/// evaluation of a local model.
///
/// `theta` is in squared input units. `eps_k` and `eps_q` are purely numerical
/// jitters on the diagonals of K_m and Q_m; they never enter the nugget.
struct KernelConfig {
  double theta = 1.0;
  double g = 1e-6;
  double eps_k = 1e-6;
  double eps_q = 1e-5;

  /// Throws InvalidArgument unless theta > 0, g >= 0, 0 < eps_k <= eps_q.
  void validate() const;

  KernelConfig with_theta(double t) const {
    KernelConfig c = *this;
    c.theta = t;
    return c;
  }
};

/// Axis-aligned hyperrectangle [lower_k, upper_k].
struct Domain {
  Vector lower;
  Vector upper;

  Domain() = default;
  Domain(Vector lo, Vector hi);

  static Domain cube(std::size_t d, double lo, double hi);
  /// Coordinatewise bounding box of the rows of `x`.
  static Domain bounding_box(const Matrix& x);

  Eigen::Index dim() const { return lower.size(); }
  double volume() const;
  bool contains(const Vector& x) const;
  void validate() const;
};

template <class A, class B>
double squared_distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& z) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double diff = x(k) - z(k);
    s += diff * diff;
  }
  return s;
}

/// exp(-||x - z||^2 / theta).
template <class A, class B>
double kernel(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& z, double theta) {
  if (!(theta > 0.0)) throw InvalidArgument("kernel: theta must be positive");
  if (x.size() != z.size()) throw InvalidArgument("kernel: dimension mismatch");
  return std::exp(-squared_distance(x, z) / theta);
}

/// Entry (i, j) is ||x_i - z_j||^2.
Matrix squared_distance_matrix(const Matrix& x, const Matrix& z);

/// exp(-D / theta) elementwise.
Matrix kernel_from_distances(const Matrix& d2, double theta);

/// Entry (i, j) is kernel(x.row(i), z.row(j), theta).
Matrix cross_kernel_matrix(const Matrix& x, const Matrix& z, double theta);

/// Kernel between every row of `x` and a single point.
Vector kernel_vector(const Matrix& x, const Vector& point, double theta);

}  // namespace ligp
