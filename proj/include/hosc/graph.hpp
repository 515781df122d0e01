#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hosc/flatness.hpp"
#include "hosc/kdtree.hpp"
#include "hosc/model.hpp"
#include "hosc/parallel.hpp"

namespace hosc {

/// For each point, the indices of its ell nearest neighbors (self excluded)
/// and their distances, nondecreasing; ties resolved toward the lower index.
struct NeighborIndex {
  std::vector<std::vector<int>> neighbors;
  std::vector<std::vector<double>> distances;

  int ell() const {
    std::size_t e = 0;
    for (const auto& nb : neighbors) e = std::max(e, nb.size());
    return static_cast<int>(e);
  }
};

/// Sparse symmetric affinity matrix with per-node degrees D_i = sum_j W_ij.
struct AffinityGraph {
  Eigen::SparseMatrix<double> weights;
  Eigen::VectorXd degrees;
};

// Trees stop paying off in high ambient dimension; fall back to brute force.
constexpr int kKdTreeMaxDim = 16;

/// Exact ell-NN under Euclidean distance. kd-tree for D <= 16, brute force
/// above; both produce identical output.
inline NeighborIndex build_knn(const PointCloud& cloud, int ell) {
  if (ell < 1) throw std::invalid_argument("build_knn: ell >= 1 required");
  const Eigen::Index n = cloud.size();
  const int k = static_cast<int>(std::min<Eigen::Index>(ell, n - 1));
  NeighborIndex out;
  out.neighbors.resize(n);
  out.distances.resize(n);

  if (cloud.ambient_dim() <= kKdTreeMaxDim) {
    KdTree tree(cloud.points);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      auto hits = tree.knn(cloud.points.row(i), k, static_cast<int>(i));
      auto& nb = out.neighbors[i];
      auto& ds = out.distances[i];
      nb.reserve(hits.size());
      ds.reserve(hits.size());
      for (const auto& h : hits) {
        nb.push_back(h.idx);
        ds.push_back(std::sqrt(h.d2));
      }
    });
  } else {
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      std::vector<KdTree::Hit> all;
      all.reserve(n - 1);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == static_cast<Eigen::Index>(i)) continue;
        all.push_back({(cloud.points.row(i) - cloud.points.row(j)).squaredNorm(),
                       static_cast<int>(j)});
      }
      std::partial_sort(all.begin(), all.begin() + k, all.end());
      auto& nb = out.neighbors[i];
      auto& ds = out.distances[i];
      for (int t = 0; t < k; ++t) {
        nb.push_back(all[t].idx);
        ds.push_back(std::sqrt(all[t].d2));
      }
    });
  }
  return out;
}

/// Anchored m-tuples with their eta-independent geometry, so a whole eta grid
/// can reuse one enumeration pass. Tuple t has anchor anchors[t] and members
/// members[t*(m-1) .. t*(m-1)+m-2].
struct TupleSet {
  int m = 0;
  std::vector<int> anchors;
  std::vector<int> members;
  std::vector<double> rms_width;
  std::vector<double> diameter;
  std::vector<char> degenerate;  // coincident points => forced zero affinity

  std::size_t count() const { return anchors.size(); }
};

/// Enumerates, for every anchor i, all unordered (m-1)-subsets of its
/// candidate list, recording lambda_rms and diameter of {x_i} u subset.
inline TupleSet enumerate_tuples(const Eigen::MatrixXd& points,
                                 const std::vector<std::vector<int>>& candidates,
                                 int m, int d) {
  const Eigen::Index n = points.rows();
  const int r = m - 1;

  double projected = 0.0;
  std::vector<std::size_t> per_anchor(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t c = candidates[i].size();
    if (static_cast<int>(c) < r) continue;
    double combos = 1.0;
    for (int t = 0; t < r; ++t) combos = combos * double(c - t) / double(t + 1);
    per_anchor[i] = static_cast<std::size_t>(std::llround(combos));
    projected += combos;
  }
  if (projected > 2e8)
    throw std::runtime_error("tuple enumeration would exceed budget; reduce m, ell or epsilon");

  TupleSet ts;
  ts.m = m;
  std::vector<std::size_t> offset(n + 1, 0);
  for (Eigen::Index i = 0; i < n; ++i) offset[i + 1] = offset[i] + per_anchor[i];
  const std::size_t total = offset[n];
  ts.anchors.resize(total);
  ts.members.resize(total * r);
  ts.rms_width.resize(total);
  ts.diameter.resize(total);
  ts.degenerate.resize(total);

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto& cand = candidates[i];
    const int c = static_cast<int>(cand.size());
    if (c < r) return;
    Eigen::MatrixXd tuple(m, points.cols());
    tuple.row(0) = points.row(i);
    std::vector<int> pick(r);
    for (int t = 0; t < r; ++t) pick[t] = t;
    std::size_t slot = offset[i];
    while (true) {
      for (int t = 0; t < r; ++t) tuple.row(t + 1) = points.row(cand[pick[t]]);
      ts.anchors[slot] = static_cast<int>(i);
      for (int t = 0; t < r; ++t) ts.members[slot * r + t] = cand[pick[t]];
      if (has_coincident_rows(tuple)) {
        ts.degenerate[slot] = 1;
        ts.rms_width[slot] = 0.0;
        ts.diameter[slot] = 0.0;
      } else {
        ts.degenerate[slot] = 0;
        ts.rms_width[slot] = lambda_rms(tuple, d);
        ts.diameter[slot] = tuple_diameter(tuple);
      }
      ++slot;
      int pos = r - 1;
      while (pos >= 0 && pick[pos] == c - r + pos) --pos;
      if (pos < 0) break;
      ++pick[pos];
      for (int q = pos + 1; q < r; ++q) pick[q] = pick[q - 1] + 1;
    }
  });
  return ts;
}

inline TupleSet build_tuples(const PointCloud& cloud, const NeighborIndex& index,
                             const HoscParams& p) {
  return enumerate_tuples(cloud.points, index.neighbors, p.m, p.d);
}

/// Clique expansion of cached tuples at the scales in `p`: each tuple of
/// affinity a adds a to W(anchor, j) for every member j, then W <- W + W^T.
/// The ordered-index sum differs only by a constant factor that cancels in Z.
inline AffinityGraph accumulate_affinity(Eigen::Index n, const TupleSet& ts,
                                         const HoscParams& p) {
  const int r = ts.m - 1;
  const bool finite_eps = std::isfinite(p.epsilon);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(ts.count() * r);
  for (std::size_t t = 0; t < ts.count(); ++t) {
    if (ts.degenerate[t]) continue;
    double a = kernel_eval(p.kernel, ts.rms_width[t] / p.eta);
    if (finite_eps) a *= kernel_eval(p.kernel, ts.diameter[t] / p.epsilon);
    if (a <= 0.0) continue;
    const int i = ts.anchors[t];
    for (int q = 0; q < r; ++q)
      trips.emplace_back(i, ts.members[t * r + q], a);
  }
  Eigen::SparseMatrix<double> w(n, n);
  w.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseMatrix<double> sym = Eigen::SparseMatrix<double>(w.transpose()) + w;
  sym.prune(0.0);
  AffinityGraph g;
  g.weights = std::move(sym);
  g.degrees = g.weights * Eigen::VectorXd::Ones(n);
  return g;
}

/// Multiway affinity graph: anchored tuples over the ell-NN sets, clique
/// expanded and symmetrized. Zero affinities leave the matrix empty; callers
/// must cope with isolated nodes.
inline AffinityGraph build_hosc_affinity(const PointCloud& cloud, const NeighborIndex& index,
                                         const HoscParams& p) {
  return accumulate_affinity(cloud.size(), build_tuples(cloud, index, p), p);
}

/// Scale rule for the pairwise baseline: one global epsilon, or the local
/// scaling sqrt(eps_i * eps_j) with eps_i the distance to the sigma_ell-th
/// neighbor.
struct ScScale {
  bool local = false;
  double epsilon = 0.0;
  int sigma_ell = 0;

  static ScScale fixed(double eps) { return ScScale{false, eps, 0}; }
  static ScScale local_scaling(int ell) { return ScScale{true, 0.0, ell}; }
};

/// Pairwise affinity graph restricted to ell-NN adjacency (j in NN(i) or
/// i in NN(j)); symmetric with zero diagonal.
inline AffinityGraph build_sc_affinity(const PointCloud& cloud, const ScScale& scale,
                                       Kernel kernel, const NeighborIndex& index) {
  const Eigen::Index n = cloud.size();
  if (!scale.local && !(scale.epsilon > 0.0))
    throw std::invalid_argument("build_sc_affinity: epsilon > 0 required");

  auto local_eps = [&](Eigen::Index i) {
    const auto& ds = index.distances[i];
    if (ds.empty()) throw std::invalid_argument("local scaling needs nonempty neighbor lists");
    const int s = std::min<int>(scale.sigma_ell, static_cast<int>(ds.size()));
    if (s < 1) throw std::invalid_argument("local scaling: sigma_ell >= 1 required");
    return ds[s - 1];
  };

  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j : index.neighbors[i]) {
      if (j < i) {
        // already handled from j unless the relation is one-sided
        const auto& back = index.neighbors[j];
        if (std::find(back.begin(), back.end(), static_cast<int>(i)) != back.end()) continue;
      }
      double eps = scale.local ? std::sqrt(local_eps(i) * local_eps(j)) : scale.epsilon;
      double a = pair_affinity(cloud.points.row(i).transpose(),
                               cloud.points.row(j).transpose(), eps, kernel);
      if (a <= 0.0) continue;
      trips.emplace_back(static_cast<int>(i), j, a);
      trips.emplace_back(j, static_cast<int>(i), a);
    }
  }
  Eigen::SparseMatrix<double> w(n, n);
  w.setFromTriplets(trips.begin(), trips.end());
  AffinityGraph g;
  g.weights = std::move(w);
  g.degrees = g.weights * Eigen::VectorXd::Ones(n);
  return g;
}

}  // namespace hosc
