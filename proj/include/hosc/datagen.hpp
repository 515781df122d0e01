#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hosc/model.hpp"

namespace hosc {

// ---- parametric surfaces -------------------------------------------------

/// Circle of radius `radius` in the (x0,x1)-plane, D = 2.
struct Circle {
  Eigen::Vector2d center;
  double radius;
};

/// Straight segment between two points in any ambient dimension.
struct Segment {
  Eigen::VectorXd a, b;
};

/// Circular arc: angles [orientation, orientation + arc_span] on a circle.
struct Moon {
  Eigen::Vector2d center;
  double radius;
  double arc_span;     // radians, in (0, 2*pi]
  double orientation;  // start angle
};

struct Sphere {
  Eigen::Vector3d center;
  double radius;
};

/// Axis-aligned ellipsoid; distances via numeric projection.
struct Ellipsoid {
  Eigen::Vector3d center;
  Eigen::Vector3d semi_axes;
};

/// Arbitrary curve t -> point, discretized on a dense grid with local
/// refinement for distance queries.
struct ParamCurve {
  std::function<Eigen::VectorXd(double)> f;
  double t0 = 0.0, t1 = 1.0;
  int dim = 2;
};

using SurfaceSpec = std::variant<Circle, Segment, Moon, Sphere, Ellipsoid, ParamCurve>;

inline int surface_dim(const SurfaceSpec& s) {
  return std::holds_alternative<Sphere>(s) || std::holds_alternative<Ellipsoid>(s) ? 2 : 1;
}

inline int surface_ambient_dim(const SurfaceSpec& s) {
  return std::visit(
      [](const auto& v) -> int {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Circle> || std::is_same_v<T, Moon>)
          return 2;
        else if constexpr (std::is_same_v<T, Sphere> || std::is_same_v<T, Ellipsoid>)
          return 3;
        else if constexpr (std::is_same_v<T, Segment>)
          return static_cast<int>(v.a.size());
        else
          return v.dim;
      },
      s);
}

namespace detail {

constexpr int kCurveGrid = 4096;
constexpr int kCurveRefine = 60;

inline double gaussian(std::mt19937_64& rng) {
  // Box-Muller on the pinned uniform; one value per call keeps draws ordered
  double u1 = 1.0 - uniform01(rng);
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Distance from p (already relative to the center) to the ellipsoid surface,
// by bisection on the Lagrange parameter of the nearest-point conditions.
inline double ellipsoid_distance(Eigen::Vector3d p, const Eigen::Vector3d& ax) {
  const double scale = ax.maxCoeff();
  for (int i = 0; i < 3; ++i) {
    double floor_i = 1e-12 * ax(i);
    if (std::abs(p(i)) < floor_i) p(i) = p(i) < 0 ? -floor_i : floor_i;
  }
  auto F = [&](double t) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      double q = ax(i) * p(i) / (t + ax(i) * ax(i));
      s += q * q;
    }
    return s - 1.0;
  };
  const double a2min = ax.cwiseProduct(ax).minCoeff();
  double lo = -a2min + 1e-14 * scale * scale;
  while (F(lo) < 0.0) lo = -a2min + 0.5 * (lo + a2min);  // approach the pole
  double hi = ax.maxCoeff() * (ax.maxCoeff() + p.norm()) + scale * scale;
  while (F(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (F(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double t = 0.5 * (lo + hi);
  Eigen::Vector3d x;
  for (int i = 0; i < 3; ++i) x(i) = ax(i) * ax(i) * p(i) / (t + ax(i) * ax(i));
  return (x - p).norm();
}

}  // namespace detail

/// Exact-distance and sampling operations for one surface. Caches the dense
/// grid of a ParamCurve so repeated distance queries stay cheap.
class SurfaceOps {
 public:
  explicit SurfaceOps(SurfaceSpec spec) : spec_(std::move(spec)) {
    if (const auto* pc = std::get_if<ParamCurve>(&spec_)) {
      grid_.resize(detail::kCurveGrid, pc->dim);
      ts_.resize(detail::kCurveGrid);
      arclen_.resize(detail::kCurveGrid);
      double acc = 0.0;
      for (int i = 0; i < detail::kCurveGrid; ++i) {
        ts_[i] = pc->t0 + (pc->t1 - pc->t0) * i / double(detail::kCurveGrid - 1);
        grid_.row(i) = pc->f(ts_[i]).transpose();
        if (i > 0) acc += (grid_.row(i) - grid_.row(i - 1)).norm();
        arclen_[i] = acc;
      }
    }
  }

  const SurfaceSpec& spec() const { return spec_; }
  int intrinsic_dim() const { return surface_dim(spec_); }
  int ambient_dim() const { return surface_ambient_dim(spec_); }

  double distance(const Eigen::VectorXd& x) const {
    if (const auto* c = std::get_if<Circle>(&spec_)) {
      double rho = std::hypot(x(0) - c->center(0), x(1) - c->center(1));
      return std::abs(rho - c->radius);
    }
    if (const auto* s = std::get_if<Segment>(&spec_)) {
      Eigen::VectorXd ab = s->b - s->a;
      double t = ab.squaredNorm() > 0 ? (x - s->a).dot(ab) / ab.squaredNorm() : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      return (x - (s->a + t * ab)).norm();
    }
    if (const auto* mo = std::get_if<Moon>(&spec_)) {
      double dx = x(0) - mo->center(0), dy = x(1) - mo->center(1);
      double rho = std::hypot(dx, dy);
      double psi = std::atan2(dy, dx) - mo->orientation;
      psi -= 2.0 * std::numbers::pi * std::floor(psi / (2.0 * std::numbers::pi));
      if (psi <= mo->arc_span) return std::abs(rho - mo->radius);
      auto arcpt = [&](double ang) {
        return Eigen::Vector2d(mo->center(0) + mo->radius * std::cos(mo->orientation + ang),
                               mo->center(1) + mo->radius * std::sin(mo->orientation + ang));
      };
      Eigen::Vector2d p(x(0), x(1));
      return std::min((p - arcpt(0.0)).norm(), (p - arcpt(mo->arc_span)).norm());
    }
    if (const auto* sp = std::get_if<Sphere>(&spec_))
      return std::abs((x.head<3>() - sp->center).norm() - sp->radius);
    if (const auto* el = std::get_if<Ellipsoid>(&spec_))
      return detail::ellipsoid_distance(x.head<3>() - el->center, el->semi_axes);

    // ParamCurve: nearest grid point, then local ternary refinement
    const auto& pc = std::get<ParamCurve>(spec_);
    Eigen::Index best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < grid_.rows(); ++i) {
      double d = (grid_.row(i).transpose() - x).squaredNorm();
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    double lo = ts_[std::max<Eigen::Index>(best - 1, 0)];
    double hi = ts_[std::min<Eigen::Index>(best + 1, grid_.rows() - 1)];
    auto dist_at = [&](double t) { return (pc.f(t) - x).norm(); };
    for (int it = 0; it < detail::kCurveRefine; ++it) {
      double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (dist_at(m1) <= dist_at(m2))
        hi = m2;
      else
        lo = m1;
    }
    return dist_at(0.5 * (lo + hi));
  }

  /// One point uniform on the surface (arclength / area measure).
  Eigen::VectorXd sample_on(std::mt19937_64& rng) const {
    if (const auto* c = std::get_if<Circle>(&spec_)) {
      double th = uniform_in(rng, 0.0, 2.0 * std::numbers::pi);
      return Eigen::Vector2d(c->center(0) + c->radius * std::cos(th),
                             c->center(1) + c->radius * std::sin(th));
    }
    if (const auto* s = std::get_if<Segment>(&spec_))
      return s->a + uniform01(rng) * (s->b - s->a);
    if (const auto* mo = std::get_if<Moon>(&spec_)) {
      double th = mo->orientation + uniform_in(rng, 0.0, mo->arc_span);
      return Eigen::Vector2d(mo->center(0) + mo->radius * std::cos(th),
                             mo->center(1) + mo->radius * std::sin(th));
    }
    if (const auto* sp = std::get_if<Sphere>(&spec_)) {
      Eigen::Vector3d u;
      do {
        u = Eigen::Vector3d(detail::gaussian(rng), detail::gaussian(rng),
                            detail::gaussian(rng));
      } while (u.norm() < 1e-12);
      u.normalize();
      return sp->center + sp->radius * u;
    }
    if (const auto* el = std::get_if<Ellipsoid>(&spec_)) {
      const Eigen::Vector3d& ax = el->semi_axes;
      const double amin = ax.minCoeff();
      while (true) {
        Eigen::Vector3d u;
        do {
          u = Eigen::Vector3d(detail::gaussian(rng), detail::gaussian(rng),
                              detail::gaussian(rng));
        } while (u.norm() < 1e-12);
        u.normalize();
        // area element of u -> A u scales by det(A) |A^-1 u|; accept by ratio
        double w = Eigen::Vector3d(u(0) / ax(0), u(1) / ax(1), u(2) / ax(2)).norm();
        if (uniform01(rng) <= w * amin)
          return el->center + Eigen::Vector3d(ax(0) * u(0), ax(1) * u(1), ax(2) * u(2));
      }
    }
    // ParamCurve: invert the cumulative arclength table
    const auto& pc = std::get<ParamCurve>(spec_);
    double s = uniform01(rng) * arclen_.back();
    auto it = std::lower_bound(arclen_.begin(), arclen_.end(), s);
    Eigen::Index i = std::max<Eigen::Index>(1, it - arclen_.begin());
    double seg = arclen_[i] - arclen_[i - 1];
    double frac = seg > 0 ? (s - arclen_[i - 1]) / seg : 0.0;
    double t = ts_[i - 1] + frac * (ts_[i] - ts_[i - 1]);
    return pc.f(t);
  }

  /// Axis-aligned box containing the tau-tube.
  void bbox(double tau, Eigen::VectorXd& lo, Eigen::VectorXd& hi) const {
    if (const auto* c = std::get_if<Circle>(&spec_)) {
      lo = c->center.array() - (c->radius + tau);
      hi = c->center.array() + (c->radius + tau);
      return;
    }
    if (const auto* s = std::get_if<Segment>(&spec_)) {
      lo = s->a.cwiseMin(s->b).array() - tau;
      hi = s->a.cwiseMax(s->b).array() + tau;
      return;
    }
    if (const auto* mo = std::get_if<Moon>(&spec_)) {
      lo = mo->center.array() - (mo->radius + tau);
      hi = mo->center.array() + (mo->radius + tau);
      return;
    }
    if (const auto* sp = std::get_if<Sphere>(&spec_)) {
      lo = sp->center.array() - (sp->radius + tau);
      hi = sp->center.array() + (sp->radius + tau);
      return;
    }
    if (const auto* el = std::get_if<Ellipsoid>(&spec_)) {
      lo = el->center - el->semi_axes - Eigen::Vector3d::Constant(tau);
      hi = el->center + el->semi_axes + Eigen::Vector3d::Constant(tau);
      return;
    }
    double slack = 0.0;
    for (Eigen::Index i = 1; i < grid_.rows(); ++i)
      slack = std::max(slack, (grid_.row(i) - grid_.row(i - 1)).norm());
    lo = grid_.colwise().minCoeff().transpose().array() - (tau + slack);
    hi = grid_.colwise().maxCoeff().transpose().array() + (tau + slack);
  }

 private:
  SurfaceSpec spec_;
  Eigen::MatrixXd grid_;
  std::vector<double> ts_;
  std::vector<double> arclen_;
};

// ---- sampling ------------------------------------------------------------

namespace detail {

inline bool in_unit_cube(const Eigen::VectorXd& x) {
  return (x.array() > 0.0).all() && (x.array() < 1.0).all();
}

// Uniform draws in the tube bounding box; for segments the box lives in a
// frame aligned with the segment, which keeps the acceptance rate dimension-
// independent.
class TubeBoxSampler {
 public:
  TubeBoxSampler(const SurfaceOps& surf, double tau) : surf_(surf), tau_(tau) {
    if (const auto* s = std::get_if<Segment>(&surf.spec())) {
      const int D = static_cast<int>(s->a.size());
      seg_frame_ = Eigen::MatrixXd::Identity(D, D);
      Eigen::VectorXd u = s->b - s->a;
      len_ = u.norm();
      u /= len_;
      // Householder reflection mapping e0 to u
      Eigen::VectorXd v = u;
      v(0) -= 1.0;
      if (v.norm() > 1e-12) {
        v.normalize();
        seg_frame_ -= 2.0 * v * v.transpose();
      }
      origin_ = s->a;
      aligned_ = true;
    } else {
      surf.bbox(tau, lo_, hi_);
      lo_ = lo_.cwiseMax(0.0);
      hi_ = hi_.cwiseMin(1.0);
    }
  }

  Eigen::VectorXd draw(std::mt19937_64& rng) const {
    if (aligned_) {
      const int D = static_cast<int>(origin_.size());
      Eigen::VectorXd local(D);
      local(0) = uniform_in(rng, -tau_, len_ + tau_);
      for (int j = 1; j < D; ++j) local(j) = uniform_in(rng, -tau_, tau_);
      return origin_ + seg_frame_ * local;
    }
    Eigen::VectorXd x(lo_.size());
    for (Eigen::Index j = 0; j < lo_.size(); ++j) x(j) = uniform_in(rng, lo_(j), hi_(j));
    return x;
  }

 private:
  const SurfaceOps& surf_;
  double tau_;
  Eigen::VectorXd lo_, hi_;
  bool aligned_ = false;
  Eigen::MatrixXd seg_frame_;
  Eigen::VectorXd origin_;
  double len_ = 0.0;
};

}  // namespace detail

/// n points uniform on {x in (0,1)^D : dist(x, S) < tau}, by rejection with
/// the exact distance; tau = 0 samples the surface itself under its
/// arclength/area measure.
inline Eigen::MatrixXd sample_tube(const SurfaceOps& surf, int n, double tau,
                                   std::mt19937_64& rng) {
  if (tau < 0.0) throw std::invalid_argument("sample_tube: tau >= 0 required");
  const int D = surf.ambient_dim();
  Eigen::MatrixXd out(n, D);
  if (tau == 0.0) {
    for (int i = 0; i < n; ++i) out.row(i) = surf.sample_on(rng).transpose();
    return out;
  }
  detail::TubeBoxSampler box(surf, tau);
  long long draws = 0, accepted = 0;
  while (accepted < n) {
    Eigen::VectorXd x = box.draw(rng);
    ++draws;
    if (detail::in_unit_cube(x) && surf.distance(x) < tau) {
      out.row(accepted++) = x.transpose();
    }
    if (draws >= 10000000 && accepted < std::max(1LL, draws / 1000000))
      throw std::runtime_error(
          "sample_tube: acceptance rate below 1e-6; enlarge tau or shrink the box");
  }
  return out;
}

inline Eigen::MatrixXd sample_tube(const SurfaceSpec& spec, int n, double tau,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SurfaceOps ops(spec);
  return sample_tube(ops, n, tau, rng);
}

/// n points from `a` toward `b`, consecutive points `spacing` apart.
inline Eigen::MatrixXd sample_equispaced_segment(const Eigen::VectorXd& a,
                                                 const Eigen::VectorXd& b, int n,
                                                 double spacing) {
  const double len = (b - a).norm();
  if (n < 1) throw std::invalid_argument("sample_equispaced_segment: n >= 1");
  if (n > 1 && spacing * (n - 1) > len * (1.0 + 1e-12))
    throw std::invalid_argument("sample_equispaced_segment: points overflow the segment");
  Eigen::VectorXd u = len > 0 ? ((b - a) / len).eval() : Eigen::VectorXd::Zero(a.size());
  Eigen::MatrixXd out(n, a.size());
  for (int i = 0; i < n; ++i) out.row(i) = (a + spacing * i * u).transpose();
  return out;
}

/// Appends n0 outliers uniform in the unit cube, rejecting draws closer than
/// delta0 to any surface; they are labeled kOutlier.
inline PointCloud add_outliers(const PointCloud& cloud, int n0,
                               const std::vector<SurfaceOps>& surfaces, double delta0,
                               std::uint64_t seed) {
  if (delta0 < 0.0) throw std::invalid_argument("add_outliers: delta0 >= 0 required");
  std::mt19937_64 rng(seed);
  const int D = cloud.ambient_dim();
  PointCloud out;
  out.points.resize(cloud.size() + n0, D);
  out.points.topRows(cloud.size()) = cloud.points;
  out.truth_labels = cloud.truth_labels;
  if (out.truth_labels.empty()) out.truth_labels.assign(cloud.size(), 0);
  long long draws = 0;
  int got = 0;
  while (got < n0) {
    Eigen::VectorXd x(D);
    for (int j = 0; j < D; ++j) x(j) = uniform01(rng);
    ++draws;
    bool clear = true;
    for (const auto& s : surfaces)
      if (s.distance(x) < delta0) {
        clear = false;
        break;
      }
    if (clear) {
      out.points.row(cloud.size() + got) = x.transpose();
      ++got;
    }
    if (draws >= 10000000 && got < std::max(1LL, draws / 1000000))
      throw std::runtime_error("add_outliers: acceptance rate below 1e-6; shrink delta0");
  }
  out.truth_labels.resize(out.points.rows(), kOutlier);
  for (Eigen::Index i = cloud.size(); i < out.points.rows(); ++i)
    out.truth_labels[i] = kOutlier;
  return out;
}

/// Clusters drawn around a list of surfaces plus optional background
/// outliers; the full generative recipe in one value.
struct GenerativeSpec {
  std::vector<std::pair<SurfaceSpec, int>> surfaces;  // surface, points
  double tau = 0.0;
  int n_outliers = 0;
  double delta0 = 0.0;
  std::uint64_t seed = 0;
};

inline PointCloud generate(const GenerativeSpec& spec) {
  if (spec.surfaces.empty()) throw std::invalid_argument("generate: no surfaces");
  std::vector<SurfaceOps> ops;
  ops.reserve(spec.surfaces.size());
  for (const auto& [s, nk] : spec.surfaces) {
    if (nk < 1) throw std::invalid_argument("generate: each surface needs n_k >= 1");
    ops.emplace_back(s);
  }
  // warn when the jitter is large relative to the surface separation
  if (spec.tau > 0.0 && ops.size() > 1) {
    double min_sep = std::numeric_limits<double>::infinity();
    std::mt19937_64 probe(0xa5a5a5a5ULL);
    for (std::size_t i = 0; i < ops.size(); ++i) {
      for (int t = 0; t < 256; ++t) {
        Eigen::VectorXd x = ops[i].sample_on(probe);
        for (std::size_t j = 0; j < ops.size(); ++j)
          if (j != i) min_sep = std::min(min_sep, ops[j].distance(x));
      }
    }
    if (spec.tau >= min_sep / 2.0)
      std::cerr << "[hosc::generate] warning: tau=" << spec.tau
                << " is at least half the estimated surface separation " << min_sep << "\n";
  }

  std::mt19937_64 rng(spec.seed);
  const int D = ops.front().ambient_dim();
  Eigen::Index total = 0;
  for (const auto& [s, nk] : spec.surfaces) total += nk;
  PointCloud cloud;
  cloud.points.resize(total, D);
  cloud.truth_labels.resize(total);
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < spec.surfaces.size(); ++k) {
    const int nk = spec.surfaces[k].second;
    Eigen::MatrixXd pts = sample_tube(ops[k], nk, spec.tau, rng);
    cloud.points.middleRows(row, nk) = pts;
    std::fill_n(cloud.truth_labels.begin() + row, nk, static_cast<int>(k));
    row += nk;
  }
  if (spec.n_outliers > 0)
    cloud = add_outliers(cloud, spec.n_outliers, ops, spec.delta0, rng());
  return cloud;
}

}  // namespace hosc
