#include "ligp/neighborhood.hpp"

#include <algorithm>
#include <queue>
#include <utility>

namespace ligp {

KdTree::KdTree(const Matrix& points, std::size_t leaf_size)
    : count_(points.rows()), dim_(points.cols()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (count_ == 0) throw InvalidArgument("KdTree: empty point set");
  data_.resize(static_cast<std::size_t>(count_ * dim_));
  for (Eigen::Index i = 0; i < count_; ++i) {
    for (Eigen::Index k = 0; k < dim_; ++k) data_[static_cast<std::size_t>(i * dim_ + k)] = points(i, k);
  }
  perm_.resize(static_cast<std::size_t>(count_));
  for (Eigen::Index i = 0; i < count_; ++i) perm_[static_cast<std::size_t>(i)] = i;
  nodes_.reserve(2 * static_cast<std::size_t>(count_) / leaf_size_ + 1);
  build(0, perm_.size());
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  int best_dim = 0;
  double best_spread = -1.0;
  for (Eigen::Index k = 0; k < dim_; ++k) {
    double lo = point(perm_[begin])[k];
    double hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      const double v = point(perm_[i])[k];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = static_cast<int>(k);
    }
  }
  if (best_spread <= 0.0) return id;  // all coincident; keep as leaf

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin), perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                   perm_.begin() + static_cast<std::ptrdiff_t>(end), [&](Eigen::Index a, Eigen::Index b) {
                     return point(a)[best_dim] < point(b)[best_dim];
                   });
  const double split = point(perm_[mid])[best_dim];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.split_dim = best_dim;
  node.split_value = split;
  node.left = left;
  node.right = right;
  return id;
}

std::vector<Eigen::Index> KdTree::nearest(const Vector& query, std::size_t k) const {
  if (query.size() != dim_) throw InvalidArgument("KdTree::nearest: dimension mismatch");
  if (k == 0 || k > static_cast<std::size_t>(count_)) throw InvalidArgument("KdTree::nearest: k out of range");

  using Entry = std::pair<double, Eigen::Index>;  // max-heap on (distance, index)
  std::priority_queue<Entry> heap;
  const double* q = query.data();

  auto visit_leaf = [&](const Node& node) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const Eigen::Index idx = perm_[i];
      const double* p = point(idx);
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < dim_; ++c) {
        const double diff = p[c] - q[c];
        d2 += diff * diff;
      }
      const Entry e{d2, idx};
      if (heap.size() < k) {
        heap.push(e);
      } else if (e < heap.top()) {
        heap.pop();
        heap.push(e);
      }
    }
  };

  // Iterative descent with an explicit stack of (node, lower bound on distance).
  std::vector<std::pair<int, double>> stack;
  stack.emplace_back(0, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    if (heap.size() == k && bound > heap.top().first) continue;
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      visit_leaf(node);
      continue;
    }
    const double diff = q[node.split_dim] - node.split_value;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far, std::max(bound, diff * diff));
    stack.emplace_back(near, bound);
  }

  std::vector<Entry> found;
  found.reserve(heap.size());
  while (!heap.empty()) {
    found.push_back(heap.top());
    heap.pop();
  }
  std::sort(found.begin(), found.end());
  std::vector<Eigen::Index> out;
  out.reserve(found.size());
  for (const auto& e : found) out.push_back(e.second);
  return out;
}

Dataset::Dataset(Matrix x_in, Vector y_in) : x(std::move(x_in)), y(std::move(y_in)), tree(x) {
  if (y.size() != x.rows()) throw InvalidArgument("Dataset: response length does not match input rows");
}

Neighborhood gather(const Matrix& x, const Vector& y, std::vector<Eigen::Index> indices, const Vector& center) {
  Neighborhood nb;
  nb.indices = std::move(indices);
  const auto n = static_cast<Eigen::Index>(nb.indices.size());
  nb.x_n.resize(n, x.cols());
  nb.y_n.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    nb.x_n.row(i) = x.row(nb.indices[static_cast<std::size_t>(i)]);
    nb.y_n(i) = y(nb.indices[static_cast<std::size_t>(i)]);
  }
  nb.center = center;
  return nb;
}

Neighborhood nearest_neighbors(const Dataset& data, const Vector& x_star, Eigen::Index n) {
  if (n < 1 || n > data.size()) throw InvalidArgument("nearest_neighbors: need 1 <= n <= N");
  return gather(data.x, data.y, data.tree.nearest(x_star, static_cast<std::size_t>(n)), x_star);
}

Neighborhood nearest_neighbors(const Matrix& x_all, const Vector& y_all, const Vector& x_star, Eigen::Index n) {
  if (n < 1 || n > x_all.rows()) throw InvalidArgument("nearest_neighbors: need 1 <= n <= N");
  const KdTree tree(x_all);
  return gather(x_all, y_all, tree.nearest(x_star, static_cast<std::size_t>(n)), x_star);
}

}  // namespace ligp
