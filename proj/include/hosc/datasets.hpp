#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hosc/datagen.hpp"
#include "hosc/model.hpp"

namespace hosc {

/// A generated benchmark cloud together with the surfaces it came from, so
/// callers can re-run membership checks or reject outliers near the surfaces.
struct NamedDataset {
  PointCloud cloud;
  std::vector<SurfaceSpec> surfaces;
  double tau = 0.0;
};

// Geometry constants for the benchmark datasets. The sources for these
// scenes specify the qualitative setup (counts, separations, jitter); radii
// and centers are fixed here and documented in the README.
namespace scene {
constexpr double kCircleRadii[3] = {0.15, 0.30, 0.45};
constexpr int kCirclePoints[3] = {26, 52, 78};
constexpr double kMoonRadius = 0.22;
constexpr int kMoonPoints = 120;
constexpr double kSphereRadius = 0.35;
constexpr int kSpherePoints = 220;
constexpr double kEllipsoidAxes[3] = {0.16, 0.11, 0.11};
constexpr int kEllipsoidPoints = 130;
constexpr int kCrossCurvePoints = 100;
constexpr double kCrossCurveBend = 0.9;
constexpr int kCurveD10Points = 80;
constexpr double kCurveD10HalfLen = 0.70;
constexpr double kCurveD10Offset = 0.15;
}  // namespace scene

/// Three concentric circles, sampled sparsely enough that pairwise methods
/// cannot bridge the within-ring gaps.
inline NamedDataset make_three_circles(std::uint64_t seed) {
  GenerativeSpec g;
  g.seed = seed;
  g.tau = 0.0;
  for (int k = 0; k < 3; ++k)
    g.surfaces.emplace_back(Circle{Eigen::Vector2d(0.5, 0.5), scene::kCircleRadii[k]},
                            scene::kCirclePoints[k]);
  NamedDataset d;
  d.cloud = generate(g);
  for (auto& [s, n] : g.surfaces) d.surfaces.push_back(s);
  return d;
}

/// Two horizontal segments separated by delta, 100 points each equally
/// spaced at 0.01, optionally jittered uniformly in a tau-disk.
inline NamedDataset make_two_lines(double delta, double tau, std::uint64_t seed) {
  const int n = 100;
  const double spacing = 0.01;
  const double y0 = 0.5 - delta / 2.0, y1 = 0.5 + delta / 2.0;
  Eigen::Vector2d a0(0.005, y0), b0(0.005 + spacing * (n - 1), y0);
  Eigen::Vector2d a1(0.005, y1), b1(0.005 + spacing * (n - 1), y1);
  NamedDataset d;
  d.tau = tau;
  d.surfaces.push_back(Segment{a0, b0});
  d.surfaces.push_back(Segment{a1, b1});
  d.cloud.points.resize(2 * n, 2);
  d.cloud.points.topRows(n) = sample_equispaced_segment(a0, b0, n, spacing);
  d.cloud.points.bottomRows(n) = sample_equispaced_segment(a1, b1, n, spacing);
  d.cloud.truth_labels.assign(2 * n, 0);
  for (int i = n; i < 2 * n; ++i) d.cloud.truth_labels[i] = 1;
  if (tau > 0.0) {
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 2 * n; ++i) {
      double jx, jy;
      do {
        jx = uniform_in(rng, -tau, tau);
        jy = uniform_in(rng, -tau, tau);
      } while (jx * jx + jy * jy >= tau * tau);
      d.cloud.points(i, 0) += jx;
      d.cloud.points(i, 1) += jy;
    }
  }
  return d;
}

/// Two interleaved crescents.
inline NamedDataset make_two_moons(std::uint64_t seed) {
  GenerativeSpec g;
  g.seed = seed;
  g.tau = 0.0;
  const double pi = std::numbers::pi;
  g.surfaces.emplace_back(Moon{Eigen::Vector2d(0.40, 0.44), scene::kMoonRadius, pi, 0.0},
                          scene::kMoonPoints);
  g.surfaces.emplace_back(Moon{Eigen::Vector2d(0.60, 0.56), scene::kMoonRadius, pi, pi},
                          scene::kMoonPoints);
  NamedDataset d;
  d.cloud = generate(g);
  for (auto& [s, n] : g.surfaces) d.surfaces.push_back(s);
  return d;
}

/// A sphere with an ellipsoid inside it (D = 3, d = 2).
inline NamedDataset make_sphere_ellipsoid(std::uint64_t seed) {
  GenerativeSpec g;
  g.seed = seed;
  g.tau = 0.0;
  Eigen::Vector3d c(0.5, 0.5, 0.5);
  g.surfaces.emplace_back(Sphere{c, scene::kSphereRadius}, scene::kSpherePoints);
  g.surfaces.emplace_back(
      Ellipsoid{c, Eigen::Vector3d(scene::kEllipsoidAxes[0], scene::kEllipsoidAxes[1],
                                   scene::kEllipsoidAxes[2])},
      scene::kEllipsoidPoints);
  NamedDataset d;
  d.cloud = generate(g);
  for (auto& [s, n] : g.surfaces) d.surfaces.push_back(s);
  return d;
}

/// Two gently curved arcs crossing at a right angle at the center, no jitter.
inline NamedDataset make_intersecting_curves(std::uint64_t seed) {
  GenerativeSpec g;
  g.seed = seed;
  g.tau = 0.0;
  const double bend = scene::kCrossCurveBend;
  ParamCurve horizontal{[bend](double t) {
                          return Eigen::Vector2d(t, 0.5 + bend * (t - 0.5) * (t - 0.5));
                        },
                        0.08, 0.92, 2};
  ParamCurve vertical{[bend](double t) {
                        return Eigen::Vector2d(0.5 + bend * (t - 0.5) * (t - 0.5), t);
                      },
                      0.08, 0.92, 2};
  g.surfaces.emplace_back(horizontal, scene::kCrossCurvePoints);
  g.surfaces.emplace_back(vertical, scene::kCrossCurvePoints);
  NamedDataset d;
  d.cloud = generate(g);
  for (auto& [s, n] : g.surfaces) d.surfaces.push_back(s);
  return d;
}

/// Three disjoint line segments in D = 10 whose directions touch every
/// coordinate, sampled in a tau-tube; N = 240 at the default counts.
inline NamedDataset make_curves_d10(double tau, std::uint64_t seed) {
  const int D = 10;
  Eigen::VectorXd u1(D), u2(D), u3(D);
  for (int i = 0; i < D; ++i) {
    u1(i) = 1.0;
    u2(i) = (i % 2 == 0) ? 1.0 : -1.0;
    u3(i) = (i % 4 < 2) ? 1.0 : -1.0;
  }
  u3(9) = -1.0;  // keep the third direction off the span of the first two
  u1.normalize();
  u2.normalize();
  u3.normalize();

  // two offset directions orthogonal to all three line directions
  auto orthogonalize = [&](Eigen::VectorXd v, const std::vector<Eigen::VectorXd>& against) {
    for (const auto& w : against) v -= v.dot(w) * w;
    return v.normalized();
  };
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(D), e1 = Eigen::VectorXd::Zero(D);
  e0(0) = 1.0;
  e1(1) = 1.0;
  Eigen::VectorXd va = orthogonalize(e0, {u1, u2, u3});
  Eigen::VectorXd vb = orthogonalize(e1, {u1, u2, u3, va});

  const double half = scene::kCurveD10HalfLen;
  const double off = scene::kCurveD10Offset;
  Eigen::VectorXd mid = Eigen::VectorXd::Constant(D, 0.5);
  Eigen::VectorXd c1 = mid + off * va;
  Eigen::VectorXd c2 = mid - off * va;
  Eigen::VectorXd c3 = mid + 1.6 * off * vb;

  GenerativeSpec g;
  g.seed = seed;
  g.tau = tau;
  g.surfaces.emplace_back(Segment{c1 - half * u1, c1 + half * u1}, scene::kCurveD10Points);
  g.surfaces.emplace_back(Segment{c2 - half * u2, c2 + half * u2}, scene::kCurveD10Points);
  g.surfaces.emplace_back(Segment{c3 - half * u3, c3 + half * u3}, scene::kCurveD10Points);
  NamedDataset d;
  d.tau = tau;
  d.cloud = generate(g);
  for (auto& [s, n] : g.surfaces) d.surfaces.push_back(s);
  return d;
}

/// Appends uniform-cube outliers so they make up `fraction` of the final
/// cloud; no clearance from the surfaces, labels set to kOutlier.
inline PointCloud append_uniform_outliers(const PointCloud& cloud, double fraction,
                                          std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw std::invalid_argument("append_uniform_outliers: fraction in (0,1)");
  const int n0 = static_cast<int>(std::lround(cloud.size() * fraction / (1.0 - fraction)));
  return add_outliers(cloud, n0, {}, 0.0, seed);
}

/// Builds one of the named benchmark datasets. `delta`/`tau` apply where the
/// dataset uses them (two_lines, curves_d10).
inline NamedDataset named_dataset(const std::string& name, std::uint64_t seed,
                                  double delta = 0.025, double tau = 0.0) {
  if (name == "three_circles") return make_three_circles(seed);
  if (name == "two_lines") return make_two_lines(delta, tau, seed);
  if (name == "two_moons") return make_two_moons(seed);
  if (name == "sphere_ellipsoid") return make_sphere_ellipsoid(seed);
  if (name == "intersecting_curves") return make_intersecting_curves(seed);
  if (name == "curves_d10") return make_curves_d10(tau, seed);
  throw std::invalid_argument("unknown dataset: " + name);
}

}  // namespace hosc
