#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hosc/graph.hpp"
#include "hosc/kdtree.hpp"
#include "hosc/model.hpp"
#include "hosc/outliers.hpp"

namespace hosc {

/// A log-log correlation curve: log Cor against log scale (epsilon for the
/// pairwise kind, eta for the multiway kind).
struct CorrelationCurve {
  enum class Kind { Pairwise, Multiway };
  std::vector<double> log_scales;
  std::vector<double> log_corr;
  double rho = 0.0;
  Kind kind = Kind::Pairwise;
};

/// Number of ordered pairs (i,j), i != j, with |x_i - x_j| <= epsilon.
inline long long pairwise_correlation(const PointCloud& cloud, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("pairwise_correlation: epsilon > 0");
  const Eigen::Index n = cloud.size();
  const double e2 = epsilon * epsilon;
  long long count = 0;
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if ((cloud.points.row(i) - cloud.points.row(j)).squaredNorm() <= e2) count += 2;
  return count;
}

namespace detail {

// Sorted pairwise distances; lets a whole curve be evaluated with binary
// searches after one O(N^2 log N) pass.
inline std::vector<double> sorted_pair_distances(const PointCloud& cloud) {
  const Eigen::Index n = cloud.size();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      d.push_back((cloud.points.row(i) - cloud.points.row(j)).norm());
  std::sort(d.begin(), d.end());
  return d;
}

inline long long corr_from_sorted(const std::vector<double>& dists, double epsilon) {
  auto it = std::upper_bound(dists.begin(), dists.end(), epsilon);
  return 2LL * static_cast<long long>(it - dists.begin());
}

// Candidates within (strict) epsilon of each point, self excluded.
inline std::vector<std::vector<int>> radius_candidates(const PointCloud& cloud,
                                                       double epsilon) {
  const Eigen::Index n = cloud.size();
  std::vector<std::vector<int>> cand(n);
  if (cloud.ambient_dim() <= kKdTreeMaxDim) {
    KdTree tree(cloud.points);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      for (const auto& h : tree.radius(cloud.points.row(i), epsilon, static_cast<int>(i)))
        cand[i].push_back(h.idx);
    });
  } else {
    const double e2 = epsilon * epsilon;
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == static_cast<Eigen::Index>(i)) continue;
        if ((cloud.points.row(i) - cloud.points.row(j)).squaredNorm() < e2)
          cand[i].push_back(static_cast<int>(j));
      }
    });
  }
  return cand;
}

inline double sum_normalized_degrees(const Eigen::VectorXd& degrees, int m) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < degrees.size(); ++i)
    if (degrees(i) > 0.0) s += std::exp(std::log(degrees(i)) / (m - 1));
  return s;
}

}  // namespace detail

/// Multiway correlation sum_i D_i^{1/(m-1)} with the simple kernel and an
/// explicit locality scale: neighborhoods come from a range search within
/// epsilon, so no tuple the scale admits is truncated away.
inline double multiway_correlation(const PointCloud& cloud, const HoscParams& params) {
  HoscParams p = params;
  p.kernel = Kernel::Simple;
  p.ell = std::max(p.ell, p.m - 1);
  validate(p, cloud);
  if (!std::isfinite(p.epsilon))
    throw std::invalid_argument("multiway_correlation: finite epsilon required");
  auto cand = detail::radius_candidates(cloud, p.epsilon);
  TupleSet tuples = enumerate_tuples(cloud.points, cand, p.m, p.d);
  AffinityGraph g = accumulate_affinity(cloud.size(), tuples, p);
  return detail::sum_normalized_degrees(g.degrees, p.m);
}

/// Pairwise curve over the given scales; scales with zero correlation are
/// dropped (log would be -inf).
inline CorrelationCurve pairwise_curve(const PointCloud& cloud,
                                       const std::vector<double>& scales, double rho) {
  CorrelationCurve c;
  c.rho = rho;
  c.kind = CorrelationCurve::Kind::Pairwise;
  auto dists = detail::sorted_pair_distances(cloud);
  for (double s : scales) {
    long long cor = detail::corr_from_sorted(dists, s);
    if (cor > 0) {
      c.log_scales.push_back(std::log(s));
      c.log_corr.push_back(std::log(static_cast<double>(cor)));
    }
  }
  return c;
}

/// Multiway curve over an eta grid at fixed epsilon; the tuple enumeration
/// happens once. Zero-correlation etas are dropped.
inline CorrelationCurve multiway_curve(const PointCloud& cloud, int d, int m, double epsilon,
                                       const std::vector<double>& etas, double rho) {
  CorrelationCurve c;
  c.rho = rho;
  c.kind = CorrelationCurve::Kind::Multiway;
  auto cand = detail::radius_candidates(cloud, epsilon);
  TupleSet tuples = enumerate_tuples(cloud.points, cand, m, d);
  HoscParams p;
  p.d = d;
  p.m = m;
  p.ell = std::max(m - 1, 1);
  p.epsilon = epsilon;
  p.kernel = Kernel::Simple;
  std::vector<double> grid = etas;
  std::sort(grid.begin(), grid.end());
  for (double eta : grid) {
    p.eta = eta;
    AffinityGraph g = accumulate_affinity(cloud.size(), tuples, p);
    double cor = detail::sum_normalized_degrees(g.degrees, m);
    if (cor > 0.0) {
      c.log_scales.push_back(std::log(eta));
      c.log_corr.push_back(std::log(cor));
    }
  }
  return c;
}

/// Output of the dimension/jitter estimators. `saturated` means the scan ran
/// out of resolution, so tau_hat is only an upper bound.
struct EstimationResult {
  int d_hat = 0;
  double tau_hat = 0.0;
  int r_hat = -1;
  int s_hat = -1;
  bool saturated = false;
};

namespace detail {

// First index r in [r_lo, r_hi] with (A_r - A_{r+1})/log_rho > threshold,
// where A is indexed from r_lo. Returns -1 when no index qualifies.
inline int scan_first_drop(const std::vector<double>& a, int r_lo, int r_hi, double log_rho,
                           double threshold) {
  for (int r = r_lo; r <= r_hi; ++r) {
    const int k = r - r_lo;
    if (k + 1 >= static_cast<int>(a.size())) break;
    if ((a[k] - a[k + 1]) / log_rho > threshold) return r;
  }
  return -1;
}

}  // namespace detail

/// Probe-range upper limit of the theoretical scan; the unknown intrinsic
/// dimension in the published display is replaced by 1, which maximizes the
/// probed range and is therefore safe for any true d >= 1.
inline int theoretical_scan_range(Eigen::Index n, double rho) {
  const double logN = std::log(static_cast<double>(n));
  const double loglogN = std::log(logN);
  return static_cast<int>(std::ceil((logN - loglogN) / std::log(rho))) - 2;
}

/// Consistency-style estimator for (d, tau): scans A_r = log Cor(rho^-r) for
/// the first drop steeper than D - 1/2 per log rho. If none is found within
/// the admissible range the estimate saturates and tau_hat only upper-bounds
/// the jitter. Scales whose correlation vanishes truncate the scan.
inline EstimationResult estimate_dim_and_jitter(const PointCloud& cloud, double rho) {
  cloud.check();
  if (cloud.size() < 8) throw std::invalid_argument("estimate_dim_and_jitter: N >= 8");
  if (rho <= 1.0) throw std::invalid_argument("estimate_dim_and_jitter: rho > 1");
  const int D = cloud.ambient_dim();
  const double log_rho = std::log(rho);
  const int r_n = theoretical_scan_range(cloud.size(), rho);
  const int r_hi = std::max(r_n, 4);

  auto dists = detail::sorted_pair_distances(cloud);
  std::vector<double> a;  // A_r for r = 3.., truncated at the last finite value
  for (int r = 3; r <= r_hi; ++r) {
    long long cor = detail::corr_from_sorted(dists, std::pow(rho, -r));
    if (cor <= 0) break;
    a.push_back(std::log(static_cast<double>(cor)));
  }

  EstimationResult res;
  if (a.empty()) {  // no scale produced a finite count
    res.r_hat = 3;
    res.saturated = true;
    res.tau_hat = std::pow(rho, -3);
    res.d_hat = D;
    return res;
  }
  const int last_r = 3 + static_cast<int>(a.size()) - 1;
  int found = detail::scan_first_drop(a, 3, std::min(r_n - 2 * D - 1, last_r - 1), log_rho,
                                      D - 0.5);
  if (found >= 0) {
    res.r_hat = found;
    res.saturated = false;
  } else {
    // saturated: the admissible range held no kink. When the range is so
    // short that its formula lands below the first probe, fall back to the
    // smallest scale that still produced a finite count.
    res.r_hat = r_n - 2 * D >= 3 ? std::min(r_n - 2 * D, last_r) : last_r;
    res.saturated = true;
  }
  res.tau_hat = std::pow(rho, -res.r_hat);
  if (res.r_hat == 3) {
    res.d_hat = D;
  } else {
    const double slope = (a[0] - a[res.r_hat - 3]) / (res.r_hat * log_rho);
    res.d_hat = std::clamp(static_cast<int>(std::lround(slope)), 1, D);
  }
  return res;
}

/// Small-jitter refinement: once the pairwise scan has saturated at r_hat,
/// scans B_s = log Cor_{d,m}(rho^-r_hat, rho^{-r_hat-s}) for a drop steeper
/// than D - d - 1/2 per log rho, with m >= log(N) (log rho)^2 capped at N-2.
inline EstimationResult refine_tau_multiway(const PointCloud& cloud, int d_hat, int r_hat,
                                            double rho) {
  cloud.check();
  if (rho <= 1.0) throw std::invalid_argument("refine_tau_multiway: rho > 1");
  if (r_hat < 1) throw std::invalid_argument("refine_tau_multiway: r_hat >= 1");
  const int D = cloud.ambient_dim();
  const int d = std::clamp(d_hat, 1, D - 1);
  const double log_rho = std::log(rho);
  const double logN = std::log(static_cast<double>(cloud.size()));
  int m = static_cast<int>(std::ceil(logN * log_rho * log_rho));
  m = std::clamp(m, d + 2, static_cast<int>(cloud.size()) - 2);
  const double epsilon = std::pow(rho, -r_hat);

  auto cand = detail::radius_candidates(cloud, epsilon);
  TupleSet tuples = enumerate_tuples(cloud.points, cand, m, d);
  HoscParams p;
  p.d = d;
  p.m = m;
  p.ell = std::max(m - 1, 1);
  p.epsilon = epsilon;
  p.kernel = Kernel::Simple;
  std::vector<double> b;  // log Cor at eta = rho^{-r_hat-s}; -inf once counts die
  for (int s = 0; s <= r_hat; ++s) {
    p.eta = std::pow(rho, -r_hat - s);
    AffinityGraph g = accumulate_affinity(cloud.size(), tuples, p);
    double cor = detail::sum_normalized_degrees(g.degrees, m);
    b.push_back(cor > 0.0 ? std::log(cor) : -std::numeric_limits<double>::infinity());
  }

  EstimationResult res;
  res.d_hat = d;
  res.r_hat = r_hat;
  res.s_hat = r_hat;
  res.saturated = true;
  const int scan_hi = std::min(r_hat - 1, static_cast<int>(b.size()) - 2);
  for (int s = 0; s <= scan_hi; ++s) {
    if (!std::isfinite(b[s])) break;  // nothing fired before the counts died
    if (!std::isfinite(b[s + 1]) || (b[s] - b[s + 1]) / log_rho > D - d - 0.5) {
      // a crash to zero counts is an unbounded drop, so it also qualifies
      res.s_hat = s;
      res.saturated = false;
      break;
    }
  }
  res.tau_hat = std::pow(rho, -r_hat - res.s_hat + 1);
  return res;
}

/// Least-trimmed-squares slope of a curve: among lines through all point
/// pairs, the one minimizing the sum of the ceil((1-trim)*n) smallest squared
/// residuals. With two points this is the interpolating slope.
inline double robust_slope(const CorrelationCurve& curve, double trim) {
  const std::size_t n = curve.log_scales.size();
  if (n < 2) throw std::invalid_argument("robust_slope: need at least 2 points");
  if (trim < 0.0 || trim >= 0.5) throw std::invalid_argument("robust_slope: trim in [0,0.5)");
  const std::size_t keep =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil((1.0 - trim) * n)));
  bool distinct = false;
  for (std::size_t i = 1; i < n && !distinct; ++i)
    distinct = curve.log_scales[i] != curve.log_scales[0];
  if (!distinct) throw std::invalid_argument("robust_slope: need 2 distinct abscissae");

  double best_obj = std::numeric_limits<double>::infinity();
  double best_slope = 0.0;
  std::vector<double> r2(n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = curve.log_scales[j] - curve.log_scales[i];
      if (dx == 0.0) continue;
      const double slope = (curve.log_corr[j] - curve.log_corr[i]) / dx;
      const double icept = curve.log_corr[i] - slope * curve.log_scales[i];
      for (std::size_t t = 0; t < n; ++t) {
        const double r = curve.log_corr[t] - (slope * curve.log_scales[t] + icept);
        r2[t] = r * r;
      }
      std::nth_element(r2.begin(), r2.begin() + keep - 1, r2.end());
      double obj = 0.0;
      for (std::size_t t = 0; t < keep; ++t) obj += r2[t];
      if (obj < best_obj) {
        best_obj = obj;
        best_slope = slope;
      }
    }
  }
  return best_slope;
}

/// Two independent least-squares segments split between consecutive grid
/// points; the break minimizing total squared error.
struct SegmentedFit {
  bool ok = false;
  int break_index = -1;  // last point of the left (small-scale) segment
  double break_x = 0.0;
  double slope_left = 0.0, slope_right = 0.0;
  double sse_two = 0.0, sse_one = 0.0;
};

namespace detail {

struct LineFit {
  double slope = 0.0, icept = 0.0, sse = 0.0;
};

inline LineFit ls_line(const std::vector<double>& x, const std::vector<double>& y,
                       std::size_t lo, std::size_t hi) {  // [lo, hi)
  const double n = static_cast<double>(hi - lo);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t t = lo; t < hi; ++t) {
    sx += x[t];
    sy += y[t];
    sxx += x[t] * x[t];
    sxy += x[t] * y[t];
  }
  LineFit f;
  const double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-30) {
    f.slope = 0.0;
    f.icept = sy / n;
  } else {
    f.slope = (n * sxy - sx * sy) / det;
    f.icept = (sy - f.slope * sx) / n;
  }
  for (std::size_t t = lo; t < hi; ++t) {
    const double r = y[t] - (f.slope * x[t] + f.icept);
    f.sse += r * r;
  }
  return f;
}

}  // namespace detail

inline SegmentedFit segmented_fit(const std::vector<double>& x, const std::vector<double>& y,
                                  int min_pts = 3) {
  SegmentedFit out;
  const std::size_t n = x.size();
  if (n < 2 * static_cast<std::size_t>(min_pts)) return out;
  out.sse_one = detail::ls_line(x, y, 0, n).sse;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t b = min_pts - 1; b + min_pts < n; ++b) {
    auto left = detail::ls_line(x, y, 0, b + 1);
    auto right = detail::ls_line(x, y, b + 1, n);
    const double sse = left.sse + right.sse;
    if (sse < best) {
      best = sse;
      out.ok = true;
      out.break_index = static_cast<int>(b);
      out.break_x = 0.5 * (x[b] + x[b + 1]);
      out.slope_left = left.slope;
      out.slope_right = right.slope;
      out.sse_two = sse;
    }
  }
  return out;
}

/// Practical estimate: what the theoretical scan asserts asymptotically,
/// done the way the published experiments do it at desk scale - a log-log
/// correlation curve, a robust slope for d, and an automated change-point
/// for the kink. Falls through to the multiway curve when the pairwise curve
/// shows no resolvable kink.
struct PracticalEstimate {
  EstimationResult est;
  CorrelationCurve pairwise;
  std::optional<CorrelationCurve> multiway;
  double multiway_epsilon = 0.0;
  int multiway_m = 0;
};

inline PracticalEstimate estimate_practical(const PointCloud& cloud, double rho) {
  cloud.check();
  if (cloud.size() < 8) throw std::invalid_argument("estimate_practical: N >= 8");
  const int D = cloud.ambient_dim();
  const Eigen::Index N = cloud.size();
  PracticalEstimate out;

  auto dists = detail::sorted_pair_distances(cloud);
  const std::size_t P = dists.size();
  double lo = dists[std::min<std::size_t>(1, P - 1)];
  double hi = dists[static_cast<std::size_t>(0.25 * (P - 1))];
  if (!(hi > lo * 2.0)) hi = dists[P - 1] * 0.999;
  if (!(hi > lo * 2.0) || !(lo > 0.0)) {
    // fully degenerate geometry; report ambient dimension, no kink
    out.est.d_hat = D;
    out.est.saturated = true;
    out.est.tau_hat = std::max(lo, 1e-300);
    return out;
  }

  const int n_scales = 48;
  std::vector<double> scales(n_scales);
  for (int t = 0; t < n_scales; ++t)
    scales[t] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * t / (n_scales - 1.0));
  out.pairwise = pairwise_curve(cloud, scales, rho);
  std::vector<double> xs = out.pairwise.log_scales;
  std::vector<double> ys = out.pairwise.log_corr;
  const double pop_floor = std::log(std::max(24.0, static_cast<double>(N) / 8.0));

  // Between-cluster distances bend the curve upward at large scales; truncate
  // at the first well-populated scale whose local slope climbs back above the
  // smallest slope seen so far.
  {
    std::size_t cut = xs.size();
    double run_min = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t + 1 < xs.size(); ++t) {
      if (ys[t] < pop_floor) continue;
      double slope = (ys[t + 1] - ys[t - 1]) / (xs[t + 1] - xs[t - 1]);
      if (slope > run_min + 0.8) {
        cut = t;
        break;
      }
      run_min = std::min(run_min, slope);
    }
    if (cut >= 10 && cut < xs.size()) {
      xs.resize(cut);
      ys.resize(cut);
    }
  }

  // the well-populated part of the curve carries the dimension estimate
  CorrelationCurve upper;
  for (std::size_t t = 0; t < xs.size(); ++t)
    if (ys[t] >= pop_floor) {
      upper.log_scales.push_back(xs[t]);
      upper.log_corr.push_back(ys[t]);
    }
  CorrelationCurve trimmed;
  trimmed.log_scales = xs;
  trimmed.log_corr = ys;
  double slope_d =
      upper.log_scales.size() >= 4 ? robust_slope(upper, 0.2) : robust_slope(trimmed, 0.2);

  SegmentedFit fit = segmented_fit(xs, ys, 3);
  const bool kink = fit.ok && fit.slope_left - fit.slope_right >= 0.6 &&
                    fit.sse_two <= 0.75 * fit.sse_one &&
                    ys[fit.break_index + 1] >= pop_floor;
  if (kink) {
    out.est.saturated = false;
    out.est.tau_hat = std::exp(fit.break_x);
    // refine d on the segment above the kink when it is long enough
    CorrelationCurve right;
    for (std::size_t t = fit.break_index + 1; t < xs.size(); ++t) {
      right.log_scales.push_back(xs[t]);
      right.log_corr.push_back(ys[t]);
    }
    double s = right.log_scales.size() >= 4 ? robust_slope(right, 0.2) : fit.slope_right;
    out.est.d_hat = std::clamp(static_cast<int>(std::lround(s)), 1, D);
    return out;
  }

  // no pairwise kink: d from the populated slope, then the multiway curve
  out.est.saturated = true;
  out.est.d_hat = std::clamp(static_cast<int>(std::lround(slope_d)), 1, D);
  out.est.tau_hat = std::exp(xs.empty() ? std::log(lo) : xs.front());
  if (out.est.d_hat > D - 1) return out;  // full-dimensional data has no tube to refine

  // epsilon: the smallest scale giving every point a healthy neighborhood
  const double want = std::log(14.0 * static_cast<double>(N));
  double eps = std::exp(xs.back());
  for (std::size_t t = 0; t < xs.size(); ++t)
    if (ys[t] >= want) {
      eps = std::exp(xs[t]);
      break;
    }
  const int m = std::clamp(static_cast<int>(std::ceil(std::log(double(N)))),
                           out.est.d_hat + 2, 8);
  out.multiway_epsilon = eps;
  out.multiway_m = m;
  std::vector<double> etas(44);
  for (int t = 0; t < 44; ++t) etas[t] = eps * std::pow(10.0, -6.0 * t / 43.0);
  CorrelationCurve mw = multiway_curve(cloud, out.est.d_hat, m, eps, etas, rho);
  out.multiway = mw;
  SegmentedFit mfit = segmented_fit(mw.log_scales, mw.log_corr, 3);
  const double mw_top = mw.log_corr.empty()
                            ? 0.0
                            : *std::max_element(mw.log_corr.begin(), mw.log_corr.end());
  if (mfit.ok && mfit.slope_left - mfit.slope_right >= 0.6 &&
      mfit.sse_two <= 0.75 * mfit.sse_one &&
      mw.log_corr[mfit.break_index + 1] >= mw_top - std::log(20.0)) {
    out.est.saturated = false;
    out.est.tau_hat = std::exp(mfit.break_x);
    out.est.s_hat = mfit.break_index;
  } else if (!mw.log_scales.empty()) {
    out.est.tau_hat = std::exp(mw.log_scales.front());
  }
  return out;
}

}  // namespace hosc
