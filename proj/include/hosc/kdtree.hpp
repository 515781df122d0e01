#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

namespace hosc {

/// Exact kd-tree over the rows of a matrix. Queries are deterministic:
/// candidates are ordered by (squared distance, index), so equidistant
/// neighbors resolve to the lower index.
class KdTree {
 public:
  explicit KdTree(const Eigen::MatrixXd& pts) : pts_(pts) {
    const Eigen::Index n = pts.rows();
    order_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) order_[i] = static_cast<int>(i);
    nodes_.reserve(2 * n);
    if (n > 0) root_ = build(0, static_cast<int>(n));
  }

  struct Hit {
    double d2;
    int idx;
    bool operator<(const Hit& o) const {
      return d2 != o.d2 ? d2 < o.d2 : idx < o.idx;
    }
  };

  /// k nearest rows to `query`, excluding row `skip` (pass -1 to keep all),
  /// sorted by (distance, index).
  std::vector<Hit> knn(const Eigen::Ref<const Eigen::RowVectorXd>& query, int k,
                       int skip = -1) const {
    std::vector<Hit> heap;  // max-heap on (d2, idx)
    heap.reserve(k + 1);
    if (k > 0 && root_ >= 0) search_knn(root_, query, k, skip, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

  /// All rows with distance < r from `query` (strict), excluding `skip`,
  /// sorted by (distance, index).
  std::vector<Hit> radius(const Eigen::Ref<const Eigen::RowVectorXd>& query, double r,
                          int skip = -1) const {
    std::vector<Hit> out;
    if (root_ >= 0) search_radius(root_, query, r * r, skip, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    int left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
    int begin = 0, end = 0;  // leaf range into order_
    bool leaf = false;
  };

  static constexpr int kLeafSize = 16;

  int build(int begin, int end) {
    Node nd;
    if (end - begin <= kLeafSize) {
      nd.leaf = true;
      nd.begin = begin;
      nd.end = end;
      // fixed order inside leaves keeps scans deterministic
      std::sort(order_.begin() + begin, order_.begin() + end);
      nodes_.push_back(nd);
      return static_cast<int>(nodes_.size()) - 1;
    }
    // split on the widest axis at the median
    const Eigen::Index D = pts_.cols();
    int axis = 0;
    double best_spread = -1.0;
    for (Eigen::Index c = 0; c < D; ++c) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int t = begin; t < end; ++t) {
        double v = pts_(order_[t], c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        axis = static_cast<int>(c);
      }
    }
    int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                       double va = pts_(a, axis), vb = pts_(b, axis);
                       return va != vb ? va < vb : a < b;
                     });
    nd.axis = axis;
    nd.split = pts_(order_[mid], axis);
    nodes_.push_back(nd);
    int self = static_cast<int>(nodes_.size()) - 1;
    int l = build(begin, mid);
    int r = build(mid, end);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  void consider(const Eigen::Ref<const Eigen::RowVectorXd>& q, int idx, int k, int skip,
                std::vector<Hit>& heap) const {
    if (idx == skip) return;
    Hit h{(pts_.row(idx) - q).squaredNorm(), idx};
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(h);
      std::push_heap(heap.begin(), heap.end());
    } else if (h < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = h;
      std::push_heap(heap.begin(), heap.end());
    }
  }

  void search_knn(int node, const Eigen::Ref<const Eigen::RowVectorXd>& q, int k, int skip,
                  std::vector<Hit>& heap) const {
    const Node& nd = nodes_[node];
    if (nd.leaf) {
      for (int t = nd.begin; t < nd.end; ++t) consider(q, order_[t], k, skip, heap);
      return;
    }
    double diff = q(nd.axis) - nd.split;
    int near = diff < 0.0 ? nd.left : nd.right;
    int far = diff < 0.0 ? nd.right : nd.left;
    search_knn(near, q, k, skip, heap);
    // descend on equality too: an equidistant lower index may hide there
    if (static_cast<int>(heap.size()) < k || diff * diff <= heap.front().d2)
      search_knn(far, q, k, skip, heap);
  }

  void search_radius(int node, const Eigen::Ref<const Eigen::RowVectorXd>& q, double r2,
                     int skip, std::vector<Hit>& out) const {
    const Node& nd = nodes_[node];
    if (nd.leaf) {
      for (int t = nd.begin; t < nd.end; ++t) {
        int idx = order_[t];
        if (idx == skip) continue;
        double d2 = (pts_.row(idx) - q).squaredNorm();
        if (d2 < r2) out.push_back(Hit{d2, idx});
      }
      return;
    }
    double diff = q(nd.axis) - nd.split;
    int near = diff < 0.0 ? nd.left : nd.right;
    int far = diff < 0.0 ? nd.right : nd.left;
    search_radius(near, q, r2, skip, out);
    if (diff * diff < r2 || nd.left == nd.right) search_radius(far, q, r2, skip, out);
  }

  const Eigen::MatrixXd& pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace hosc
