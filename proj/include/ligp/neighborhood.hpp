#pragma once

#include <cstddef>
#include <vector>

#include "ligp/kernel.hpp"

namespace ligp {

/// Static k-d tree over the rows of a point matrix. Build once, then query
/// concurrently; queries are read-only.
class KdTree {
 public:
  explicit KdTree(const Matrix& points, std::size_t leaf_size = 16);

  /// Indices of the k nearest rows, ordered by (squared distance, index).
  std::vector<Eigen::Index> nearest(const Vector& query, std::size_t k) const;

  Eigen::Index size() const { return count_; }
  Eigen::Index dim() const { return dim_; }

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int split_dim = -1;
    double split_value = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(std::size_t begin, std::size_t end);
  const double* point(Eigen::Index i) const { return data_.data() + i * dim_; }

  Eigen::Index count_ = 0;
  Eigen::Index dim_ = 0;
  std::size_t leaf_size_;
  std::vector<double> data_;  // row-major copy
  std::vector<Eigen::Index> perm_;
  std::vector<Node> nodes_;
};

/// The n training rows nearest to `center`.
struct Neighborhood {
  std::vector<Eigen::Index> indices;
  Matrix x_n;
  Vector y_n;
  Vector center;

  Eigen::Index size() const { return x_n.rows(); }
};

/// Training data plus its spatial index, shared read-only across predictions.
struct Dataset {
  Matrix x;
  Vector y;
  KdTree tree;

  Dataset(Matrix x_in, Vector y_in);
  Eigen::Index size() const { return x.rows(); }
  Eigen::Index dim() const { return x.cols(); }
};

Neighborhood nearest_neighbors(const Dataset& data, const Vector& x_star, Eigen::Index n);

/// Convenience overload that builds a throwaway index.
Neighborhood nearest_neighbors(const Matrix& x_all, const Vector& y_all, const Vector& x_star, Eigen::Index n);

/// Rows `indices` of (x, y) gathered into a neighborhood.
Neighborhood gather(const Matrix& x, const Vector& y, std::vector<Eigen::Index> indices, const Vector& center);

}  // namespace ligp
