#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <vector>

#include "hosc/model.hpp"

namespace hosc {

/// Geometry of one m-point tuple: its root-mean-square distance to the best
/// d-flat and its diameter.
struct TupleFit {
  double rms_width = 0.0;
  double diameter = 0.0;
};

/// Max pairwise Euclidean distance within the rows of pts.
inline double tuple_diameter(const Eigen::Ref<const Eigen::MatrixXd>& pts) {
  const Eigen::Index m = pts.rows();
  double best = 0.0;
  for (Eigen::Index i = 0; i + 1 < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      best = std::max(best, (pts.row(i) - pts.row(j)).norm());
  return best;
}

namespace detail {

// Eigenvalues (ascending) of the smaller side of the centered scatter:
// covariance (DxD) when D <= m, Gram (mxm) otherwise. They are the squared
// singular values of the centered tuple either way.
inline Eigen::VectorXd scatter_spectrum(const Eigen::Ref<const Eigen::MatrixXd>& pts) {
  const Eigen::Index m = pts.rows(), D = pts.cols();
  Eigen::MatrixXd X = pts.rowwise() - pts.colwise().mean();
  Eigen::MatrixXd S;
  if (D <= m)
    S.noalias() = X.transpose() * X;
  else
    S.noalias() = X * X.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace detail

/// Root-mean-square distance of the m rows of pts to their best-fitting
/// d-dimensional affine subspace: sqrt((1/m) sum_{j>d} sigma_j^2) over the
/// singular values of the row-centered tuple. The optimal flat for squared
/// loss passes through the centroid. Degenerate inputs give 0; any tuple of
/// m <= d+1 points gives exactly 0.
inline double lambda_rms(const Eigen::Ref<const Eigen::MatrixXd>& pts, int d) {
  const Eigen::Index m = pts.rows();
  if (m <= d + 1) return 0.0;
  Eigen::VectorXd lam = detail::scatter_spectrum(pts);  // ascending
  const Eigen::Index k = lam.size();
  if (k <= d) return 0.0;
  const double lam_max = std::max(lam(k - 1), 0.0);
  const double floor2 = 1e-24 * lam_max;  // = (1e-12 * sigma_max)^2
  double resid = 0.0;
  for (Eigen::Index j = 0; j < k - d; ++j) {
    double v = lam(j);
    if (v > floor2) resid += v;
  }
  return std::sqrt(resid / static_cast<double>(m));
}

inline TupleFit fit_tuple(const Eigen::Ref<const Eigen::MatrixXd>& pts, int d) {
  return TupleFit{lambda_rms(pts, d), tuple_diameter(pts)};
}

/// Sup-distance flatness upper bound, restricted to flats spanned by d+1 of
/// the points: min over (d+1)-subsets S of max_j dist(x_j, affine span of S).
/// Test oracle only; quality guaranteed up to a dimension-dependent constant.
/// Subsets whose span has dimension < d are skipped; if every subset is
/// degenerate, the lower-dimensional spans are used instead (distance to a
/// sub-flat still upper-bounds distance to some d-flat containing it).
inline double lambda_minmax_oracle(const Eigen::Ref<const Eigen::MatrixXd>& pts, int d) {
  const Eigen::Index m = pts.rows(), D = pts.cols();
  if (m <= d + 1) return 0.0;
  std::vector<int> idx(d + 1);
  for (int i = 0; i <= d; ++i) idx[i] = i;

  auto max_dist_to_span = [&](bool require_full_rank, double& out) -> bool {
    Eigen::MatrixXd dirs(D, d);
    for (int c = 0; c < d; ++c)
      dirs.col(c) = (pts.row(idx[c + 1]) - pts.row(idx[0])).transpose();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dirs);
    qr.setThreshold(1e-12);
    const Eigen::Index rank = qr.rank();
    if (require_full_rank && rank < d) return false;
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(D, rank);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      Eigen::VectorXd v = (pts.row(j) - pts.row(idx[0])).transpose();
      v -= Q * (Q.transpose() * v);
      worst = std::max(worst, v.norm());
    }
    out = worst;
    return true;
  };

  for (int pass = 0; pass < 2; ++pass) {
    const bool strict = pass == 0;
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    // enumerate all (d+1)-subsets of 0..m-1
    for (int i = 0; i <= d; ++i) idx[i] = i;
    while (true) {
      double w;
      if (max_dist_to_span(strict, w)) {
        found = true;
        best = std::min(best, w);
      }
      int pos = d;
      while (pos >= 0 && idx[pos] == m - (d + 1) + pos) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int q = pos + 1; q <= d; ++q) idx[q] = idx[q - 1] + 1;
    }
    if (found) return best;
  }
  return 0.0;  // all points coincide
}

/// True iff two rows agree in every coordinate bit-for-bit.
inline bool rows_identical(const Eigen::Ref<const Eigen::MatrixXd>& pts,
                           Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index c = 0; c < pts.cols(); ++c)
    if (pts(a, c) != pts(b, c)) return false;
  return true;
}

inline bool has_coincident_rows(const Eigen::Ref<const Eigen::MatrixXd>& pts) {
  for (Eigen::Index i = 0; i + 1 < pts.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j)
      if (rows_identical(pts, i, j)) return true;
  return false;
}

/// Multiway affinity of an m-point tuple. Zero if any two points coincide
/// exactly; otherwise kernel(diam/epsilon) * kernel(rms_width/eta), with the
/// diameter factor dropped when epsilon is infinite (the ell-NN restriction
/// stands in for it).
inline double tuple_affinity(const Eigen::Ref<const Eigen::MatrixXd>& pts,
                             const HoscParams& p) {
  if (has_coincident_rows(pts)) return 0.0;
  double a = kernel_eval(p.kernel, lambda_rms(pts, p.d) / p.eta);
  if (std::isfinite(p.epsilon))
    a *= kernel_eval(p.kernel, tuple_diameter(pts) / p.epsilon);
  return a;
}

/// Pairwise affinity: 0 for exactly coincident points, else kernel(|x-y|/eps).
inline double pair_affinity(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& y,
                            double epsilon, Kernel kernel) {
  if ((x.array() == y.array()).all()) return 0.0;
  return kernel_eval(kernel, (x - y).norm() / epsilon);
}

}  // namespace hosc
