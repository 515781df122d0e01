#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "hosc/estimate.hpp"

using namespace hosc;

namespace {

PointCloud uniform_square(std::mt19937_64& rng, int n) {
  PointCloud c;
  c.points.resize(n, 2);
  for (int i = 0; i < n; ++i) c.points.row(i) << uniform01(rng), uniform01(rng);
  return c;
}

PointCloud uniform_segment(std::mt19937_64& rng, int n, double tau = 0.0) {
  PointCloud c;
  c.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    double jx = 0.0, jy = 0.0;
    if (tau > 0.0) {
      do {
        jx = uniform_in(rng, -tau, tau);
        jy = uniform_in(rng, -tau, tau);
      } while (jx * jx + jy * jy >= tau * tau);
    }
    c.points.row(i) << uniform01(rng) + jx, 0.5 + jy;
  }
  return c;
}

}  // namespace

TEST_CASE("pairwise correlation: boundary scales and the 3-point enumeration") {
  PointCloud c;
  c.points.resize(3, 1);
  c.points << 0.0, 1.0, 2.0;  // distances 1, 1, 2
  REQUIRE(pairwise_correlation(c, 0.5) == 0);
  REQUIRE(pairwise_correlation(c, 1.5) == 4);
  REQUIRE(pairwise_correlation(c, 2.0) == 6);  // inclusive at the diameter
}

TEST_CASE("pairwise curve counts match the direct double loop") {
  std::mt19937_64 rng(3);
  PointCloud c = uniform_square(rng, 80);
  std::vector<double> scales = {0.01, 0.05, 0.1, 0.3, 0.9};
  CorrelationCurve curve = pairwise_curve(c, scales, 2.0);
  std::size_t at = 0;
  for (double s : scales) {
    long long direct = pairwise_correlation(c, s);
    if (direct == 0) continue;
    REQUIRE(curve.log_scales[at] == Catch::Approx(std::log(s)));
    REQUIRE(curve.log_corr[at] == Catch::Approx(std::log(double(direct))));
    ++at;
  }
  REQUIRE(at == curve.log_scales.size());
}

TEST_CASE("pairwise curve is nondecreasing in scale") {
  std::mt19937_64 rng(5);
  PointCloud c = uniform_square(rng, 120);
  CorrelationCurve curve = pairwise_curve(c, logspace(0.005, 1.0, 30), 2.0);
  for (std::size_t i = 1; i < curve.log_corr.size(); ++i)
    REQUIRE(curve.log_corr[i] >= curve.log_corr[i - 1]);
}

TEST_CASE("multiway correlation: frozen collinear golden and eta monotonicity") {
  PointCloud c;
  c.points.resize(4, 2);
  c.points << 0, 0, 1, 0, 2, 0, 3, 0;
  HoscParams p;
  p.d = 1;
  p.m = 3;
  p.ell = 3;
  p.epsilon = 10.0;
  p.eta = 0.5;
  // every anchored pair is admissible: all degrees are 12, so the sum of
  // square roots is 4*sqrt(12)
  REQUIRE(multiway_correlation(c, p) == Catch::Approx(4.0 * std::sqrt(12.0)).epsilon(1e-12));

  std::mt19937_64 rng(7);
  PointCloud r = uniform_square(rng, 50);
  HoscParams q;
  q.d = 1;
  q.m = 3;
  q.ell = 5;
  q.epsilon = 0.3;
  double prev = -1.0;
  for (double eta : {0.001, 0.01, 0.1, 1.0}) {
    q.eta = eta;
    double cor = multiway_correlation(r, q);
    REQUIRE(cor >= prev);
    prev = cor;
  }
}

TEST_CASE("multiway correlation: all-zero affinities give zero") {
  PointCloud c;
  c.points.resize(4, 2);
  c.points << 0, 0, 5, 5, 9, 2, 3, 8;  // no pair within the scale
  HoscParams p;
  p.d = 1;
  p.m = 3;
  p.ell = 3;
  p.epsilon = 0.5;
  p.eta = 0.1;
  REQUIRE(multiway_correlation(c, p) == 0.0);
}

TEST_CASE("kink scan fires at the first steep drop") {
  // synthetic A_r series: slope 1 per step, then a cliff of depth 3 log rho
  const double log_rho = std::log(2.0);
  std::vector<double> a;
  for (int r = 3; r <= 10; ++r) {
    double v = -r * log_rho;
    if (r >= 7) v -= 3.0 * (r - 6) * log_rho;
    a.push_back(v);
  }
  REQUIRE(detail::scan_first_drop(a, 3, 9, log_rho, 2.5) == 6);
  REQUIRE(detail::scan_first_drop(a, 3, 9, log_rho, 10.0) == -1);
  REQUIRE(detail::scan_first_drop(a, 3, 5, log_rho, 2.5) == -1);  // range excludes it
}

TEST_CASE("theoretical estimator: full-dimensional data reports d = D") {
  // rho = 1.5 keeps the admissible scan range nonempty at this sample size
  std::mt19937_64 rng(11);
  PointCloud c = uniform_square(rng, 1500);
  EstimationResult r = estimate_dim_and_jitter(c, 1.5);
  REQUIRE(r.d_hat == 2);
  REQUIRE(r.r_hat == 3);  // the drop is steep from the very first probe
}

TEST_CASE("theoretical estimator: jitterless curve saturates at the probe floor") {
  std::mt19937_64 rng(13);
  PointCloud c = uniform_segment(rng, 600);
  EstimationResult r = estimate_dim_and_jitter(c, 2.0);
  REQUIRE(r.saturated);
  REQUIRE(r.d_hat == 1);
  // tau_hat equals the smallest probed scale, an upper bound only
  REQUIRE(r.tau_hat <= 0.13);
}

TEST_CASE("theoretical estimator: d is invariant under rigid motion") {
  std::mt19937_64 rng(17);
  PointCloud c = uniform_segment(rng, 500);
  EstimationResult base = estimate_dim_and_jitter(c, 2.0);
  double co = std::cos(0.9), si = std::sin(0.9);
  PointCloud moved = c;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    double x = c.points(i, 0), y = c.points(i, 1);
    moved.points(i, 0) = co * x - si * y + 3.0;
    moved.points(i, 1) = si * x + co * y - 1.5;
  }
  EstimationResult rot = estimate_dim_and_jitter(moved, 2.0);
  REQUIRE(rot.d_hat == base.d_hat);
}

TEST_CASE("multiway refinement: jitterless data stays saturated") {
  std::mt19937_64 rng(19);
  PointCloud c = uniform_segment(rng, 400);
  EstimationResult first = estimate_dim_and_jitter(c, 2.0);
  REQUIRE(first.saturated);
  EstimationResult ref = refine_tau_multiway(c, first.d_hat, first.r_hat, 2.0);
  REQUIRE(ref.saturated);
  REQUIRE(ref.s_hat == first.r_hat);
}

TEST_CASE("multiway refinement: a visible jitter fires the scan") {
  // codimension 2 and m near log N so the drop can clear the threshold
  std::mt19937_64 rng(23);
  PointCloud c;
  const int n = 450;
  const double tau = 0.08;
  c.points.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    double jx, jy, jz;
    do {
      jx = uniform_in(rng, -tau, tau);
      jy = uniform_in(rng, -tau, tau);
      jz = uniform_in(rng, -tau, tau);
    } while (jx * jx + jy * jy + jz * jz >= tau * tau);
    c.points.row(i) << uniform01(rng) + jx, 0.5 + jy, 0.5 + jz;
  }
  const double rho = std::exp(1.0);
  EstimationResult ref = refine_tau_multiway(c, 1, 3, rho);
  REQUIRE_FALSE(ref.saturated);
  REQUIRE(ref.s_hat <= 2);
  REQUIRE(ref.tau_hat == Catch::Approx(std::pow(rho, -3 - ref.s_hat + 1)));
  REQUIRE(ref.tau_hat > tau / (rho * rho));
  REQUIRE(ref.tau_hat < tau * rho * rho);
}

TEST_CASE("robust slope: exact, contaminated, and two-point curves") {
  CorrelationCurve exact;
  for (int i = 0; i < 12; ++i) {
    exact.log_scales.push_back(0.3 * i);
    exact.log_corr.push_back(2.0 * 0.3 * i + 1.0);
  }
  REQUIRE(robust_slope(exact, 0.2) == Catch::Approx(2.0).margin(1e-12));

  CorrelationCurve noisy;
  std::mt19937_64 rng(29);
  for (int i = 0; i < 30; ++i) {
    double x = 0.1 * i;
    double y = x + 0.005 * uniform_in(rng, -1.0, 1.0);
    if (i % 5 == 0) y += 4.0;  // 20% gross contamination
    noisy.log_scales.push_back(x);
    noisy.log_corr.push_back(y);
  }
  REQUIRE(robust_slope(noisy, 0.25) == Catch::Approx(1.0).margin(0.05));

  CorrelationCurve two;
  two.log_scales = {0.0, 1.0};
  two.log_corr = {0.0, 3.5};
  REQUIRE(robust_slope(two, 0.0) == Catch::Approx(3.5));

  CorrelationCurve degenerate;
  degenerate.log_scales = {1.0, 1.0, 1.0};
  degenerate.log_corr = {0.0, 1.0, 2.0};
  REQUIRE_THROWS_AS(robust_slope(degenerate, 0.1), std::invalid_argument);
}

TEST_CASE("segment correlation slope is near 1 for N >= 500") {
  std::mt19937_64 rng(31);
  PointCloud c = uniform_segment(rng, 500);
  CorrelationCurve curve = pairwise_curve(c, logspace(0.01, 0.2, 24), 2.0);
  REQUIRE(robust_slope(curve, 0.2) == Catch::Approx(1.0).margin(0.2));
}

TEST_CASE("segmented fit recovers a synthetic breakpoint") {
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    double xx = -8.0 + 0.15 * i;
    x.push_back(xx);
    y.push_back(xx < -5.0 ? 10.0 * (xx + 5.0) + 1.0 : 1.0 * (xx + 5.0) + 1.0);
  }
  SegmentedFit f = segmented_fit(x, y);
  REQUIRE(f.ok);
  REQUIRE(f.break_x == Catch::Approx(-5.0).margin(0.2));
  REQUIRE(f.slope_left == Catch::Approx(10.0).margin(0.3));
  REQUIRE(f.slope_right == Catch::Approx(1.0).margin(0.1));
}

TEST_CASE("practical estimator: full square, flat segment, and jittered segment") {
  std::mt19937_64 rng(37);

  PointCloud square = uniform_square(rng, 900);
  PracticalEstimate sq = estimate_practical(square, 2.0);
  REQUIRE(sq.est.d_hat == 2);

  PointCloud flat = uniform_segment(rng, 700);
  PracticalEstimate fl = estimate_practical(flat, 2.0);
  REQUIRE(fl.est.d_hat == 1);
  REQUIRE(fl.est.saturated);  // no kink exists above the resolution floor

  PointCloud jit = uniform_segment(rng, 700, 0.02);
  PracticalEstimate jt = estimate_practical(jit, 2.0);
  REQUIRE(jt.est.d_hat == 1);
  REQUIRE_FALSE(jt.est.saturated);
  REQUIRE(jt.est.tau_hat > 0.02 / 4.0);
  REQUIRE(jt.est.tau_hat < 0.02 * 4.0);
}
