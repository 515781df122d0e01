#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hosc/graph.hpp"
#include "hosc/model.hpp"

namespace hosc {

/// Outcome of a degree-threshold rule. `normalized_degrees` holds
/// D_i^{1/(m-1)}; `threshold_used` is the cut applied to it.
struct OutlierReport {
  std::vector<bool> mask;
  double threshold_used = 0.0;
  Eigen::VectorXd normalized_degrees;
};

/// D_i^{1/(m-1)} computed through logs so large degrees and large m do not
/// overflow; zero maps to zero.
inline Eigen::VectorXd normalized_degrees(const Eigen::VectorXd& degrees, int m) {
  if (m < 2) throw std::invalid_argument("normalized_degrees: m >= 2 required");
  Eigen::VectorXd out(degrees.size());
  for (Eigen::Index i = 0; i < degrees.size(); ++i)
    out(i) = degrees(i) > 0.0 ? std::exp(std::log(degrees(i)) / (m - 1)) : 0.0;
  return out;
}

/// Relative rule: flag points with normalized degree at most
/// max_j D_j^{1/(m-1)} / rho. All-zero degrees flag every point.
inline OutlierReport detect_o1(const Eigen::VectorXd& degrees, int m, double rho) {
  if (rho <= 1.0) throw std::invalid_argument("detect_o1: rho > 1 required");
  OutlierReport r;
  r.normalized_degrees = normalized_degrees(degrees, m);
  const double top = r.normalized_degrees.size() ? r.normalized_degrees.maxCoeff() : 0.0;
  r.threshold_used = top / rho;
  r.mask.resize(degrees.size());
  for (Eigen::Index i = 0; i < degrees.size(); ++i)
    r.mask[i] = r.normalized_degrees(i) <= r.threshold_used;
  return r;
}

/// Scale prescriptions that make the absolute rule operate at the sparsest
/// viable sampling: epsilon = (rho log N / N)^{1/(2D-d)}, eta = epsilon^2.
struct O2Prescription {
  double epsilon = 0.0;
  double eta = 0.0;
};

inline O2Prescription o2_prescription(Eigen::Index n, int d, int D, double rho) {
  if (rho <= 1.0) throw std::domain_error("o2_prescription: rho > 1 required");
  const double base = rho * std::log(static_cast<double>(n)) / static_cast<double>(n);
  O2Prescription p;
  p.epsilon = std::pow(base, 1.0 / (2.0 * D - d));
  p.eta = p.epsilon * p.epsilon;
  return p;
}

/// Absolute rule: flag points with normalized degree at most
/// rho * N * epsilon^d * eta^(D-d).
inline OutlierReport detect_o2(const Eigen::VectorXd& degrees, int m, double rho,
                               Eigen::Index n, double epsilon, double eta, int d,
                               int ambient_dim) {
  if (!std::isfinite(epsilon))
    throw std::domain_error("detect_o2: finite epsilon required");
  OutlierReport r;
  r.normalized_degrees = normalized_degrees(degrees, m);
  r.threshold_used = rho * static_cast<double>(n) * std::pow(epsilon, d) *
                     std::pow(eta, ambient_dim - d);
  r.mask.resize(degrees.size());
  for (Eigen::Index i = 0; i < degrees.size(); ++i)
    r.mask[i] = r.normalized_degrees(i) <= r.threshold_used;
  return r;
}

/// Known-proportion rule: flag exactly floor(fraction*N) points of smallest
/// normalized degree, ties resolved toward the lower index.
inline OutlierReport detect_quantile(const Eigen::VectorXd& degrees, int m,
                                     double fraction) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("detect_quantile: fraction in [0,1) required");
  OutlierReport r;
  r.normalized_degrees = normalized_degrees(degrees, m);
  const Eigen::Index n = degrees.size();
  const Eigen::Index k = static_cast<Eigen::Index>(std::floor(fraction * n));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double da = r.normalized_degrees(a), db = r.normalized_degrees(b);
    return da != db ? da < db : a < b;
  });
  r.mask.assign(n, false);
  for (Eigen::Index t = 0; t < k; ++t) r.mask[order[t]] = true;
  r.threshold_used = k > 0 ? r.normalized_degrees(order[k - 1]) : -1.0;
  return r;
}

/// Degree-gap score used to pick eta when outliers are present:
/// (mean inlier degree - mean outlier degree) / max degree under the
/// quantile split. Returns -inf for degenerate splits.
inline double degree_gap_score(const Eigen::VectorXd& degrees, int m, double fraction) {
  const Eigen::Index n = degrees.size();
  OutlierReport split = detect_quantile(degrees, m, fraction);
  double max_deg = degrees.size() ? degrees.maxCoeff() : 0.0;
  if (max_deg <= 0.0) return -std::numeric_limits<double>::infinity();
  double in_sum = 0.0, out_sum = 0.0;
  Eigen::Index in_n = 0, out_n = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (split.mask[i]) {
      out_sum += degrees(i);
      ++out_n;
    } else {
      in_sum += degrees(i);
      ++in_n;
    }
  }
  if (in_n == 0 || out_n == 0) return -std::numeric_limits<double>::infinity();
  return (in_sum / in_n - out_sum / out_n) / max_deg;
}

/// Scans the eta grid for the largest degree-gap score (ties: smaller eta).
/// Tuples are enumerated once; only the kernel pass repeats per eta.
inline double select_eta_outliers(const PointCloud& cloud, const HoscParams& params,
                                  const std::vector<double>& eta_grid,
                                  double outlier_fraction) {
  if (eta_grid.empty()) throw std::invalid_argument("select_eta_outliers: empty grid");
  if (!(outlier_fraction > 0.0 && outlier_fraction < 1.0))
    throw std::invalid_argument("select_eta_outliers: fraction in (0,1) required");
  HoscParams p = validate(params, cloud);
  NeighborIndex index = build_knn(cloud, p.ell);
  TupleSet tuples = build_tuples(cloud, index, p);

  std::vector<double> grid = eta_grid;
  std::sort(grid.begin(), grid.end());
  double best_eta = grid.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (double eta : grid) {
    HoscParams q = p;
    q.eta = eta;
    AffinityGraph g = accumulate_affinity(cloud.size(), tuples, q);
    double score = degree_gap_score(g.degrees, p.m, outlier_fraction);
    if (score > best_score) {
      best_score = score;
      best_eta = eta;
    }
  }
  return best_eta;
}

}  // namespace hosc
