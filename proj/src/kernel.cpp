#include "ligp/kernel.hpp"

#include <string>

namespace ligp {

void KernelConfig::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw InvalidArgument("theta must be positive and finite");
  if (!(g >= 0.0)) throw InvalidArgument("nugget g must be nonnegative");
  if (!(eps_k > 0.0)) throw InvalidArgument("eps_k must be positive");
  if (!(eps_q >= eps_k)) throw InvalidArgument("eps_q must be >= eps_k");
}

Domain::Domain(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

Domain Domain::cube(std::size_t d, double lo, double hi) {
  return Domain(Vector::Constant(static_cast<Eigen::Index>(d), lo),
                Vector::Constant(static_cast<Eigen::Index>(d), hi));
}

Domain Domain::bounding_box(const Matrix& x) {
  if (x.rows() == 0) throw InvalidArgument("bounding_box: empty point set");
  Domain box;
  box.lower = x.colwise().minCoeff().transpose();
  box.upper = x.colwise().maxCoeff().transpose();
  return box;
}

double Domain::volume() const { return (upper - lower).prod(); }

bool Domain::contains(const Vector& x) const {
  if (x.size() != dim()) return false;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x(k) < lower(k) || x(k) > upper(k)) return false;
  }
  return true;
}

void Domain::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0) throw InvalidArgument("domain: bound size mismatch");
  for (Eigen::Index k = 0; k < lower.size(); ++k) {
    if (!(lower(k) < upper(k))) {
      throw InvalidArgument("domain: lower bound must be below upper bound in coordinate " + std::to_string(k));
    }
  }
}

Matrix squared_distance_matrix(const Matrix& x, const Matrix& z) {
  if (x.cols() != z.cols()) throw InvalidArgument("squared_distance_matrix: dimension mismatch");
  Matrix out(x.rows(), z.rows());
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i, j) = squared_distance(x.row(i), z.row(j));
  }
  return out;
}

Matrix kernel_from_distances(const Matrix& d2, double theta) {
  if (!(theta > 0.0)) throw InvalidArgument("kernel_from_distances: theta must be positive");
  return (-d2.array() / theta).exp().matrix();
}

Matrix cross_kernel_matrix(const Matrix& x, const Matrix& z, double theta) {
  if (!(theta > 0.0)) throw InvalidArgument("cross_kernel_matrix: theta must be positive");
  if (x.cols() != z.cols()) throw InvalidArgument("cross_kernel_matrix: dimension mismatch");
  Matrix out(x.rows(), z.rows());
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out(i, j) = std::exp(-squared_distance(x.row(i), z.row(j)) / theta);
    }
  }
  return out;
}

Vector kernel_vector(const Matrix& x, const Vector& point, double theta) {
  if (!(theta > 0.0)) throw InvalidArgument("kernel_vector: theta must be positive");
  if (x.cols() != point.size()) throw InvalidArgument("kernel_vector: dimension mismatch");
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out(i) = std::exp(-squared_distance(x.row(i), point) / theta);
  }
  return out;
}

}  // namespace ligp
