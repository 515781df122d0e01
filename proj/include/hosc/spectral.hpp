#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "hosc/graph.hpp"
#include "hosc/model.hpp"
#include "hosc/outliers.hpp"

namespace hosc {

/// Z = D^{-1/2} W D^{-1/2}; rows and columns of isolated nodes stay zero.
inline Eigen::SparseMatrix<double> normalize(const AffinityGraph& g) {
  const Eigen::Index n = g.weights.rows();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i)
    inv_sqrt(i) = g.degrees(i) > 0.0 ? 1.0 / std::sqrt(g.degrees(i)) : 0.0;
  Eigen::SparseMatrix<double> z = g.weights;
  for (int k = 0; k < z.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(z, k); it; ++it)
      it.valueRef() *= inv_sqrt(it.row()) * inv_sqrt(it.col());
  return z;
}

struct EigOptions {
  Eigen::Index dense_threshold = 4096;  // iterative solver above this size
  Eigen::Index dense_fallback_max = 16384;
  int max_lanczos_steps = 400;
  double tol = 1e-10;
};

namespace detail {

// Largest remaining eigenpair of a symmetric sparse matrix by Lanczos with
// full reorthogonalization, deflating against the columns of `found`.
// The start vector depends on how many pairs were already found: a fixed
// start cannot recover a degenerate eigenvalue, because its Krylov space
// meets each eigenspace in at most one direction.
inline bool lanczos_largest(const Eigen::SparseMatrix<double>& z,
                            const Eigen::MatrixXd& found, const EigOptions& opts,
                            double& value, Eigen::VectorXd& vec) {
  const Eigen::Index n = z.rows();
  const int max_steps = static_cast<int>(std::min<Eigen::Index>(n, opts.max_lanczos_steps));

  auto deflate = [&](Eigen::VectorXd& v) {
    if (found.cols() > 0) v -= found * (found.transpose() * v);
  };

  // deterministic start vector, different for each deflation round
  const double phase = 0.7 + 0.37 * double(found.cols());
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v(i) = 1.0 + 0.25 * std::sin(phase * double(i + 1)) +
           0.13 * std::cos((phase + 0.51) * double(i + 1) * double(i + 1));
  deflate(v);
  double nv = v.norm();
  if (nv < 1e-12) {
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::cos(1.3 * double(i + 1) + phase);
    deflate(v);
    nv = v.norm();
    if (nv < 1e-12) return false;
  }
  v /= nv;

  std::vector<Eigen::VectorXd> basis{v};
  std::vector<double> alpha, beta;
  Eigen::VectorXd w;
  for (int j = 0; j < max_steps; ++j) {
    w = z * basis.back();
    deflate(w);
    double a = basis.back().dot(w);
    alpha.push_back(a);
    w -= a * basis.back();
    if (j > 0) w -= beta.back() * basis[basis.size() - 2];
    for (const auto& b : basis) w -= b.dot(w) * b;  // full reorthogonalization
    for (const auto& b : basis) w -= b.dot(w) * b;
    double nb = w.norm();

    // Ritz estimate for the largest eigenvalue of the tridiagonal section
    const int s = static_cast<int>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(s, s);
    for (int q = 0; q < s; ++q) {
      t(q, q) = alpha[q];
      if (q + 1 < s) t(q, q + 1) = t(q + 1, q) = beta[q];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const double theta = es.eigenvalues()(s - 1);
    const double resid = nb * std::abs(es.eigenvectors()(s - 1, s - 1));
    if (resid <= opts.tol * std::max(1.0, std::abs(theta)) || nb < 1e-14 || j + 1 == max_steps) {
      if (resid > 1e-6 * std::max(1.0, std::abs(theta)) && nb >= 1e-14 && j + 1 == max_steps)
        return false;
      Eigen::VectorXd y = es.eigenvectors().col(s - 1);
      vec = Eigen::VectorXd::Zero(n);
      for (int q = 0; q < s; ++q) vec += y(q) * basis[q];
      deflate(vec);
      double norm = vec.norm();
      if (norm < 1e-12) return false;
      vec /= norm;
      value = theta;
      return true;
    }
    beta.push_back(nb);
    basis.push_back(w / nb);
  }
  return false;
}

inline void fix_eigvec_signs(Eigen::MatrixXd& u) {
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      double a = std::abs(u(i, c));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (u(arg, c) < 0.0) u.col(c) = -u.col(c);
  }
}

}  // namespace detail

/// Top-k eigenvalues (descending) and orthonormal eigenvectors of a symmetric
/// matrix. Dense solver up to opts.dense_threshold rows, Lanczos with
/// deflation above; a failed iterative solve falls back to the dense path
/// when the size permits. Eigenvector signs are fixed so each column's
/// largest-magnitude entry is positive.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> top_eigs(
    const Eigen::SparseMatrix<double>& z, Eigen::Index k,
    const EigOptions& opts = EigOptions{}) {
  const Eigen::Index n = z.rows();
  if (k > n) throw std::invalid_argument("top_eigs: k <= N required");

  auto dense_path = [&]() {
    Eigen::MatrixXd zd(z);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(zd);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("top_eigs: dense eigensolver failed");
    Eigen::VectorXd vals(k);
    Eigen::MatrixXd vecs(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      vals(j) = es.eigenvalues()(n - 1 - j);
      vecs.col(j) = es.eigenvectors().col(n - 1 - j);
    }
    detail::fix_eigvec_signs(vecs);
    return std::make_pair(vals, vecs);
  };

  if (n <= opts.dense_threshold) return dense_path();

  Eigen::VectorXd vals(k);
  Eigen::MatrixXd vecs(n, k);
  Eigen::MatrixXd found(n, 0);
  for (Eigen::Index j = 0; j < k; ++j) {
    double value;
    Eigen::VectorXd vec;
    if (!detail::lanczos_largest(z, found, opts, value, vec)) {
      if (n <= opts.dense_fallback_max) return dense_path();
      throw std::runtime_error("top_eigs: Lanczos failed to converge");
    }
    vals(j) = value;
    vecs.col(j) = vec;
    found.conservativeResize(n, j + 1);
    found.col(j) = vec;
  }
  detail::fix_eigvec_signs(vecs);
  return {vals, vecs};
}

/// Rows scaled to unit norm; rows of negligible norm are left zero (their
/// points are treated as isolated downstream).
inline Eigen::MatrixXd row_normalize(const Eigen::MatrixXd& u) {
  Eigen::MatrixXd v = u;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    double norm = v.row(i).norm();
    if (norm > 1e-154)
      v.row(i) /= norm;
    else
      v.row(i).setZero();
  }
  return v;
}

/// Spectrum of Z and the row-normalized eigenvector matrix used for k-means.
struct SpectralEmbedding {
  Eigen::VectorXd eigenvalues;  // descending
  Eigen::MatrixXd v_rows;       // N x K, unit or zero rows
};

struct KmeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double inertia = 0.0;
};

namespace detail {

inline double sq_dist(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  return (a - b).squaredNorm();
}

inline KmeansResult lloyd_once(const Eigen::MatrixXd& v, int k, std::mt19937_64& rng,
                               KmeansInit init) {
  const Eigen::Index n = v.rows();
  Eigen::MatrixXd centers(k, v.cols());
  std::vector<Eigen::Index> chosen;

  if (init == KmeansInit::PlusPlus) {
    Eigen::Index first = static_cast<Eigen::Index>(uniform_index(rng, n));
    centers.row(0) = v.row(first);
    chosen.push_back(first);
    Eigen::VectorXd d2(n);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = sq_dist(v.row(i), centers.row(0));
    for (int c = 1; c < k; ++c) {
      double total = d2.sum();
      Eigen::Index pick = 0;
      if (total > 0.0) {
        double target = uniform01(rng) * total, run = 0.0;
        pick = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
          run += d2(i);
          if (run >= target) {
            pick = i;
            break;
          }
        }
      } else {
        // all mass at chosen centers; take the lowest unchosen index
        for (Eigen::Index i = 0; i < n; ++i)
          if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
            pick = i;
            break;
          }
      }
      centers.row(c) = v.row(pick);
      chosen.push_back(pick);
      for (Eigen::Index i = 0; i < n; ++i)
        d2(i) = std::min(d2(i), sq_dist(v.row(i), centers.row(c)));
    }
  } else {  // NearOrthogonal
    Eigen::Index first = static_cast<Eigen::Index>(uniform_index(rng, n));
    centers.row(0) = v.row(first);
    chosen.push_back(first);
    for (int c = 1; c < k; ++c) {
      Eigen::Index pick = 0;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
        double ni = v.row(i).norm();
        double worst = 0.0;
        for (int q = 0; q < c; ++q) {
          double nq = centers.row(q).norm();
          double cosang = (ni > 0 && nq > 0)
                              ? std::abs(v.row(i).dot(centers.row(q))) / (ni * nq)
                              : 0.0;
          worst = std::max(worst, cosang);
        }
        if (worst < best) {
          best = worst;
          pick = i;
        }
      }
      centers.row(c) = v.row(pick);
      chosen.push_back(pick);
    }
  }

  std::vector<int> labels(n, 0);
  Eigen::VectorXd best_d2(n);
  for (int iter = 0; iter < 300; ++iter) {
    // assignment (ties to the lowest centroid index)
    for (Eigen::Index i = 0; i < n; ++i) {
      int arg = 0;
      double best = sq_dist(v.row(i), centers.row(0));
      for (int c = 1; c < k; ++c) {
        double d = sq_dist(v.row(i), centers.row(c));
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      labels[i] = arg;
      best_d2(i) = best;
    }
    // empty clusters steal the point farthest from its centroid
    std::vector<Eigen::Index> count(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) ++count[labels[i]];
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) continue;
      Eigen::Index worst = 0;
      double wd = -1.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (count[labels[i]] > 1 && best_d2(i) > wd) {
          wd = best_d2(i);
          worst = i;
        }
      --count[labels[worst]];
      labels[worst] = c;
      count[c] = 1;
      centers.row(c) = v.row(worst);
      best_d2(worst) = 0.0;
    }
    // update
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, v.cols());
    std::vector<Eigen::Index> sz(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(labels[i]) += v.row(i);
      ++sz[labels[i]];
    }
    double move = 0.0;
    for (int c = 0; c < k; ++c) {
      if (sz[c] > 0) next.row(c) /= double(sz[c]);
      move = std::max(move, (next.row(c) - centers.row(c)).norm());
      centers.row(c) = next.row(c);
    }
    if (move < 1e-9) break;
  }

  KmeansResult res;
  res.labels = std::move(labels);
  res.centroids = centers;
  res.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) best = std::min(best, sq_dist(v.row(i), centers.row(c)));
    res.inertia += best;
  }
  return res;
}

}  // namespace detail

/// Seeded k-means over the rows of v: best inertia among `restarts` runs of
/// (k-means++ or near-orthogonal) initialization plus Lloyd iterations.
inline KmeansResult kmeans(const Eigen::MatrixXd& v, int k, std::uint64_t seed,
                           int restarts = 10, KmeansInit init = KmeansInit::PlusPlus) {
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts >= 1 required");
  if (k < 1 || k > v.rows()) throw std::invalid_argument("kmeans: 1 <= k <= N required");
  KmeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    KmeansResult run = detail::lloyd_once(v, k, rng, init);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

enum class KSelect { Threshold, Gap };

/// Cluster-count estimate from the spectrum of Z. Threshold mode counts
/// eigenvalues above 1 - n^{-2}/rho; gap mode takes the largest consecutive
/// gap within the top min(10, n-1) eigenvalues. Never returns less than 1.
inline int estimate_k(const Eigen::VectorXd& eigenvalues, Eigen::Index n, double rho,
                      KSelect mode = KSelect::Threshold) {
  if (eigenvalues.size() == 0) return 1;
  if (mode == KSelect::Threshold) {
    const double thr = 1.0 - 1.0 / (double(n) * double(n) * rho);
    int count = 0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
      if (eigenvalues(i) > thr) ++count;
    return std::max(count, 1);
  }
  const Eigen::Index top = std::min<Eigen::Index>({10, n - 1, eigenvalues.size()});
  if (top < 2) return 1;
  int arg = 1;
  double best = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 1; k < top; ++k) {
    double gap = eigenvalues(k - 1) - eigenvalues(k);
    if (gap > best) {
      best = gap;
      arg = static_cast<int>(k);
    }
  }
  return arg;
}

/// Outlier handling around the spectral step.
struct OutlierPolicy {
  enum class Rule { None, O1, O2, Quantile } rule = Rule::None;
  double fraction = 0.0;  // for Quantile
};

namespace detail {

struct PipelineOutput {
  ClusterResult result;
  Eigen::MatrixXd v_rows;          // rows fed to k-means
  std::vector<int> v_row_points;   // original indices of those rows
};

// Shared tail of both pipelines: optional outlier removal (graph rebuilt on
// the survivors via `rebuild`), normalization, eigenvectors, k-means, and
// nearest-neighbor assignment for isolated/removed points.
inline PipelineOutput spectral_tail(const PointCloud& cloud, const AffinityGraph& full,
                                    int k_clusters, int affinity_m, double rho,
                                    std::uint64_t seed, int restarts, KmeansInit init,
                                    const OutlierPolicy& policy,
                                    const std::function<AffinityGraph(const PointCloud&)>& rebuild,
                                    double chosen_eta, double o2_epsilon = 0.0,
                                    double o2_eta = 0.0, int o2_d = 0) {
  const Eigen::Index n = cloud.size();
  ClusterResult res;
  res.degrees = full.degrees;
  res.chosen_eta = chosen_eta;
  res.outlier_mask.assign(n, false);

  switch (policy.rule) {
    case OutlierPolicy::Rule::None:
      break;
    case OutlierPolicy::Rule::O1:
      res.outlier_mask = detect_o1(full.degrees, affinity_m, rho).mask;
      break;
    case OutlierPolicy::Rule::O2:
      res.outlier_mask = detect_o2(full.degrees, affinity_m, rho, n, o2_epsilon, o2_eta,
                                   o2_d, cloud.ambient_dim())
                             .mask;
      break;
    case OutlierPolicy::Rule::Quantile:
      res.outlier_mask = detect_quantile(full.degrees, affinity_m, policy.fraction).mask;
      break;
  }

  std::vector<int> active;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!res.outlier_mask[i]) active.push_back(static_cast<int>(i));
  if (active.empty()) throw std::runtime_error("clustering: every point was removed as outlier");

  // degrees are recomputed on the cleaned graph before normalization
  AffinityGraph work;
  PointCloud active_cloud;
  if (active.size() == static_cast<std::size_t>(n)) {
    work = full;
    active_cloud = cloud;
  } else {
    active_cloud.points.resize(active.size(), cloud.points.cols());
    for (std::size_t t = 0; t < active.size(); ++t)
      active_cloud.points.row(t) = cloud.points.row(active[t]);
    work = rebuild(active_cloud);
  }

  std::vector<int> spec_points;  // indices into `active`
  for (Eigen::Index t = 0; t < work.degrees.size(); ++t)
    if (work.degrees(t) > 0.0) spec_points.push_back(static_cast<int>(t));
  const Eigen::Index ns = static_cast<Eigen::Index>(spec_points.size());
  if (ns == 0) throw std::runtime_error("clustering: affinity graph is empty");

  // compact Z over the non-isolated survivors
  std::vector<int> to_spec(active.size(), -1);
  for (Eigen::Index t = 0; t < ns; ++t) to_spec[spec_points[t]] = static_cast<int>(t);
  Eigen::SparseMatrix<double> z_full = normalize(work);
  std::vector<Eigen::Triplet<double>> trips;
  for (int c = 0; c < z_full.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(z_full, c); it; ++it) {
      int ri = to_spec[it.row()], ci = to_spec[it.col()];
      if (ri >= 0 && ci >= 0) trips.emplace_back(ri, ci, it.value());
    }
  Eigen::SparseMatrix<double> z(ns, ns);
  z.setFromTriplets(trips.begin(), trips.end());

  const Eigen::Index want = std::min<Eigen::Index>(ns, std::max<Eigen::Index>(
                                                           k_clusters == kAutoClusters ? 10 : k_clusters + 1,
                                                           std::min<Eigen::Index>(10, ns)));
  auto [vals, u] = top_eigs(z, want);
  res.eigenvalues = vals;

  int k = k_clusters;
  if (k == kAutoClusters) k = estimate_k(vals, ns, rho, KSelect::Threshold);
  if (k > ns)
    throw std::runtime_error("clustering: K exceeds the number of non-isolated points");

  Eigen::MatrixXd v = row_normalize(u.leftCols(k));

  // rows that vanished numerically join the isolated set
  std::vector<int> km_rows;
  for (Eigen::Index t = 0; t < ns; ++t)
    if (v.row(t).norm() > 0.0) km_rows.push_back(static_cast<int>(t));
  if (static_cast<Eigen::Index>(km_rows.size()) < k)
    throw std::runtime_error("clustering: K exceeds the number of non-isolated points");

  Eigen::MatrixXd vk(km_rows.size(), k);
  for (std::size_t t = 0; t < km_rows.size(); ++t) vk.row(t) = v.row(km_rows[t]);
  KmeansResult km = kmeans(vk, k, seed, restarts, init);

  res.labels.assign(n, -1);
  for (std::size_t t = 0; t < km_rows.size(); ++t)
    res.labels[active[spec_points[km_rows[t]]]] = km.labels[t];

  // isolated and removed points take the label of the nearest labeled point
  std::vector<int> labeled;
  for (Eigen::Index i = 0; i < n; ++i)
    if (res.labels[i] >= 0) labeled.push_back(static_cast<int>(i));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (res.labels[i] >= 0) continue;
    double best = std::numeric_limits<double>::infinity();
    int arg = labeled.front();
    for (int j : labeled) {
      double d = (cloud.points.row(i) - cloud.points.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    res.labels[i] = res.labels[arg];
  }

  PipelineOutput out;
  out.result = std::move(res);
  out.v_rows.resize(km_rows.size(), k);
  out.v_row_points.resize(km_rows.size());
  for (std::size_t t = 0; t < km_rows.size(); ++t) {
    out.v_rows.row(t) = vk.row(t);
    out.v_row_points[t] = active[spec_points[km_rows[t]]];
  }
  return out;
}

// Eigenspace variance of a labeling: sum over clusters of squared distances
// of V rows to their cluster mean.
inline double eigenspace_variance(const Eigen::MatrixXd& v_rows,
                                  const std::vector<int>& row_points,
                                  const std::vector<int>& labels) {
  if (v_rows.rows() == 0) return 0.0;
  int k = 0;
  for (std::size_t t = 0; t < row_points.size(); ++t)
    k = std::max(k, labels[row_points[t]] + 1);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(k, v_rows.cols());
  Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
  for (Eigen::Index t = 0; t < v_rows.rows(); ++t) {
    int c = labels[row_points[t]];
    mean.row(c) += v_rows.row(t);
    count(c) += 1.0;
  }
  for (int c = 0; c < k; ++c)
    if (count(c) > 0) mean.row(c) /= count(c);
  double score = 0.0;
  for (Eigen::Index t = 0; t < v_rows.rows(); ++t)
    score += (v_rows.row(t) - mean.row(labels[row_points[t]])).squaredNorm();
  return score;
}

}  // namespace detail

/// Full multiway pipeline: ell-NN graph, clique-expanded affinities, optional
/// outlier removal, normalized spectral embedding, k-means. Isolated points
/// are assigned to the cluster of their nearest labeled neighbor.
inline ClusterResult cluster_hosc(const PointCloud& cloud, const HoscParams& params,
                                  const OutlierPolicy& policy = OutlierPolicy{}) {
  HoscParams p = validate(params, cloud);
  const double rho = p.rho_for(cloud.size());
  NeighborIndex index = build_knn(cloud, p.ell);
  AffinityGraph g = build_hosc_affinity(cloud, index, p);
  auto rebuild = [&p](const PointCloud& sub) {
    HoscParams q = p;
    q.ell = std::min<int>(q.ell, static_cast<int>(sub.size()) - 1);
    NeighborIndex idx = build_knn(sub, q.ell);
    return build_hosc_affinity(sub, idx, q);
  };
  O2Prescription o2 = std::isfinite(p.epsilon) ? O2Prescription{p.epsilon, p.eta}
                                               : o2_prescription(cloud.size(), p.d,
                                                                 cloud.ambient_dim(), rho);
  return detail::spectral_tail(cloud, g, p.k_clusters, p.m, rho, p.seed, p.restarts, p.init,
                               policy, rebuild, p.eta, o2.epsilon, o2.eta, p.d)
      .result;
}

/// Pairwise baseline pipeline (the affinity of the standard spectral
/// algorithm), sharing the spectral tail with the multiway pipeline.
inline ClusterResult cluster_sc(const PointCloud& cloud, const ScScale& scale, Kernel kernel,
                                int k_clusters, int ell_restrict = -1,
                                std::uint64_t seed = 0, int restarts = 10,
                                const OutlierPolicy& policy = OutlierPolicy{}) {
  cloud.check();
  const Eigen::Index n = cloud.size();
  if (n < 2) throw std::invalid_argument("cluster_sc: N >= 2 required");
  const int ell = ell_restrict > 0 ? std::min<int>(ell_restrict, int(n) - 1) : int(n) - 1;
  const double rho = default_rho(n);
  NeighborIndex index = build_knn(cloud, ell);
  AffinityGraph g = build_sc_affinity(cloud, scale, kernel, index);
  auto rebuild = [&](const PointCloud& sub) {
    int e = std::min<int>(ell, static_cast<int>(sub.size()) - 1);
    NeighborIndex idx = build_knn(sub, e);
    return build_sc_affinity(sub, scale, kernel, idx);
  };
  return detail::spectral_tail(cloud, g, k_clusters, 2, rho, seed, restarts,
                               KmeansInit::PlusPlus, policy, rebuild,
                               scale.local ? 0.0 : scale.epsilon)
      .result;
}

/// Result of an eta search: the winning scale and its clustering.
struct EtaSearchResult {
  double eta = 0.0;
  ClusterResult result;
};

/// Runs the multiway pipeline once per grid value and keeps the eta whose
/// clusters are most concentrated in the eigenspace (ties: smaller eta).
/// The tuple enumeration is shared across the grid.
inline EtaSearchResult select_eta(const PointCloud& cloud, const HoscParams& params,
                                  std::vector<double> eta_grid,
                                  const OutlierPolicy& policy = OutlierPolicy{}) {
  if (eta_grid.empty()) throw std::invalid_argument("select_eta: empty grid");
  HoscParams p = validate(params, cloud);
  const double rho = p.rho_for(cloud.size());
  NeighborIndex index = build_knn(cloud, p.ell);
  TupleSet tuples = build_tuples(cloud, index, p);
  std::sort(eta_grid.begin(), eta_grid.end());

  std::optional<EtaSearchResult> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (double eta : eta_grid) {
    HoscParams q = p;
    q.eta = eta;
    AffinityGraph g = accumulate_affinity(cloud.size(), tuples, q);
    auto rebuild = [&q](const PointCloud& sub) {
      HoscParams r = q;
      r.ell = std::min<int>(r.ell, static_cast<int>(sub.size()) - 1);
      NeighborIndex idx = build_knn(sub, r.ell);
      return build_hosc_affinity(sub, idx, r);
    };
    O2Prescription o2 = std::isfinite(q.epsilon)
                            ? O2Prescription{q.epsilon, q.eta}
                            : o2_prescription(cloud.size(), q.d, cloud.ambient_dim(), rho);
    try {
      detail::PipelineOutput out =
          detail::spectral_tail(cloud, g, q.k_clusters, q.m, rho, q.seed, q.restarts, q.init,
                                policy, rebuild, eta, o2.epsilon, o2.eta, q.d);
      double score =
          detail::eigenspace_variance(out.v_rows, out.v_row_points, out.result.labels);
      if (score < best_score) {
        best_score = score;
        best = EtaSearchResult{eta, std::move(out.result)};
      }
    } catch (const std::runtime_error&) {
      // a grid value that empties the graph is skipped, not fatal
    }
  }
  if (!best) throw std::runtime_error("select_eta: no grid value produced a clustering");
  return *best;
}

}  // namespace hosc
