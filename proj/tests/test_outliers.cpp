#include <catch2/catch_amalgamated.hpp>

#include "hosc/outliers.hpp"

using namespace hosc;

namespace {

Eigen::VectorXd degrees_of(std::initializer_list<double> v) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d(i++) = x;
  return d;
}

}  // namespace

TEST_CASE("o1: equal positive degrees flag nobody") {
  OutlierReport r = detect_o1(degrees_of({5, 5, 5, 5}), 3, 2.0);
  for (bool b : r.mask) REQUIRE_FALSE(b);
}

TEST_CASE("o1: zero-degree point among positive degrees is flagged") {
  OutlierReport r = detect_o1(degrees_of({4, 4, 0}), 3, 2.0);
  REQUIRE_FALSE(r.mask[0]);
  REQUIRE(r.mask[2]);
}

TEST_CASE("o1: frozen arithmetic example") {
  // degrees (16,16,1), m=3: normalized (4,4,1); threshold 4/2 = 2
  OutlierReport r = detect_o1(degrees_of({16, 16, 1}), 3, 2.0);
  REQUIRE(r.normalized_degrees(0) == Catch::Approx(4.0));
  REQUIRE(r.normalized_degrees(2) == Catch::Approx(1.0));
  REQUIRE(r.threshold_used == Catch::Approx(2.0));
  REQUIRE_FALSE(r.mask[0]);
  REQUIRE_FALSE(r.mask[1]);
  REQUIRE(r.mask[2]);
}

TEST_CASE("o1: all-zero degrees flag everyone") {
  OutlierReport r = detect_o1(degrees_of({0, 0, 0}), 3, 2.0);
  for (bool b : r.mask) REQUIRE(b);
}

TEST_CASE("o2: threshold extremes") {
  // threshold above every normalized degree flags all
  OutlierReport all = detect_o2(degrees_of({1, 2, 3}), 2, 2.0, 1000, 0.5, 0.5, 1, 2);
  for (bool b : all.mask) REQUIRE(b);
  // threshold 0 with positive degrees flags none
  OutlierReport none = detect_o2(degrees_of({1, 2, 3}), 2, 2.0, 1000, 0.0, 0.0, 1, 2);
  for (bool b : none.mask) REQUIRE_FALSE(b);
}

TEST_CASE("o2: frozen prescription and threshold") {
  // N=1000, d=1, D=2, rho=2: epsilon=(2 log 1000/1000)^{1/3}, eta=epsilon^2,
  // threshold = rho N epsilon eta, all frozen from direct evaluation
  O2Prescription pre = o2_prescription(1000, 1, 2, 2.0);
  REQUIRE(pre.epsilon == Catch::Approx(0.23995086122428846).epsilon(1e-12));
  REQUIRE(pre.eta == Catch::Approx(0.05757641580227774).epsilon(1e-12));
  Eigen::VectorXd deg = degrees_of({1e6, 800, 100});  // normalized: 1e3, ~28.3, 10
  OutlierReport r = detect_o2(deg, 3, 2.0, 1000, pre.epsilon, pre.eta, 1, 2);
  REQUIRE(r.threshold_used == Catch::Approx(27.631021115928554).epsilon(1e-12));
  REQUIRE_FALSE(r.mask[0]);
  REQUIRE_FALSE(r.mask[1]);  // sqrt(800) = 28.28 > 27.63
  REQUIRE(r.mask[2]);
}

TEST_CASE("o2 requires a finite epsilon") {
  REQUIRE_THROWS_AS(detect_o2(degrees_of({1, 2}), 3, 2.0, 10, kInfiniteEpsilon, 0.1, 1, 2),
                    std::domain_error);
}

TEST_CASE("quantile: fraction 0 flags nobody") {
  OutlierReport r = detect_quantile(degrees_of({1, 2, 3}), 3, 0.0);
  for (bool b : r.mask) REQUIRE_FALSE(b);
}

TEST_CASE("quantile: flags exactly floor(fraction*N) smallest degrees") {
  OutlierReport r = detect_quantile(degrees_of({1, 2, 3, 4}), 3, 0.5);
  REQUIRE(r.mask[0]);
  REQUIRE(r.mask[1]);
  REQUIRE_FALSE(r.mask[2]);
  REQUIRE_FALSE(r.mask[3]);
}

TEST_CASE("quantile: ties break toward the lower index") {
  OutlierReport r = detect_quantile(degrees_of({2, 2, 2, 5}), 2, 0.25);
  REQUIRE(r.mask[0]);
  REQUIRE_FALSE(r.mask[1]);
  REQUIRE_FALSE(r.mask[2]);
}

TEST_CASE("quantile: count is exact for every fraction") {
  std::mt19937_64 rng(3);
  Eigen::VectorXd deg(37);
  for (int i = 0; i < 37; ++i) deg(i) = uniform01(rng) * 10;
  for (double f : {0.0, 0.1, 0.25, 0.333, 0.5, 0.9, 0.99}) {
    OutlierReport r = detect_quantile(deg, 4, f);
    int flagged = 0;
    for (bool b : r.mask) flagged += b ? 1 : 0;
    REQUIRE(flagged == static_cast<int>(std::floor(f * 37)));
  }
}

TEST_CASE("threshold reproduces the quantile mask on distinct degrees") {
  std::mt19937_64 rng(5);
  Eigen::VectorXd deg(25);
  for (int i = 0; i < 25; ++i) deg(i) = 0.5 + i + 0.3 * uniform01(rng);
  OutlierReport r = detect_quantile(deg, 3, 0.4);
  for (int i = 0; i < 25; ++i)
    REQUIRE(r.mask[i] == (r.normalized_degrees(i) <= r.threshold_used));
}

TEST_CASE("o1 and quantile masks are invariant under degree rescaling; o2 is not") {
  std::mt19937_64 rng(7);
  Eigen::VectorXd deg(30);
  for (int i = 0; i < 30; ++i) deg(i) = uniform01(rng) * 100;
  const double c = 37.5;
  OutlierReport o1a = detect_o1(deg, 3, 2.0), o1b = detect_o1((c * deg).eval(), 3, 2.0);
  REQUIRE(o1a.mask == o1b.mask);
  OutlierReport qa = detect_quantile(deg, 3, 0.3), qb = detect_quantile((c * deg).eval(), 3, 0.3);
  REQUIRE(qa.mask == qb.mask);

  // an absolute threshold sitting between the scaled and unscaled ranges
  Eigen::VectorXd two = degrees_of({100.0, 400.0});
  OutlierReport o2a = detect_o2(two, 2, 2.0, 10, 1.0, 1.0, 1, 2);   // threshold 20
  OutlierReport o2b = detect_o2((0.1 * two).eval(), 2, 2.0, 10, 1.0, 1.0, 1, 2);
  REQUIRE(o2a.mask != o2b.mask);
}

TEST_CASE("degree gap score prefers the bimodal split") {
  // inliers near 10, outliers near 0: near-perfect normalized gap
  Eigen::VectorXd good = degrees_of({10, 10, 10, 10, 0.01, 0.02});
  Eigen::VectorXd flat = degrees_of({10, 9, 8, 7, 6, 5});
  double g1 = degree_gap_score(good, 3, 1.0 / 3.0);
  double g2 = degree_gap_score(flat, 3, 1.0 / 3.0);
  REQUIRE(g1 > 0.95);
  REQUIRE(g1 > g2);
}

TEST_CASE("select_eta_outliers: single grid value, and bimodal winner") {
  // a straight dense segment plus two far voids; small eta keeps the segment
  // degrees high and the stragglers near zero
  PointCloud cloud;
  cloud.points.resize(24, 2);
  for (int i = 0; i < 20; ++i) cloud.points.row(i) << 0.02 * i, 0.5;
  cloud.points.row(20) << 0.3, 0.9;
  cloud.points.row(21) << 0.7, 0.1;
  cloud.points.row(22) << 0.1, 0.95;
  cloud.points.row(23) << 0.9, 0.92;
  HoscParams p;
  p.d = 1;
  p.m = 3;
  p.ell = 6;
  p.kernel = Kernel::Heat;

  REQUIRE(select_eta_outliers(cloud, p, {0.02}, 1.0 / 6.0) == 0.02);
  double best = select_eta_outliers(cloud, p, {0.001, 0.02, 5.0}, 1.0 / 6.0);
  NeighborIndex idx = build_knn(cloud, p.ell);
  HoscParams q = p;
  q.eta = best;
  AffinityGraph g = build_hosc_affinity(cloud, idx, q);
  OutlierReport r = detect_quantile(g.degrees, p.m, 1.0 / 6.0);
  REQUIRE(r.mask[20]);
  REQUIRE(r.mask[21]);
}
