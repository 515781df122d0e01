#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "hosc/spectral.hpp"

using namespace hosc;

namespace {

Eigen::SparseMatrix<double> sparse_from(const Eigen::MatrixXd& m) {
  Eigen::SparseMatrix<double> s(m.rows(), m.cols());
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) != 0.0) t.emplace_back(i, j, m(i, j));
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

AffinityGraph graph_from(const Eigen::MatrixXd& w) {
  AffinityGraph g;
  g.weights = sparse_from(w);
  g.degrees = w.rowwise().sum();
  return g;
}

}  // namespace

TEST_CASE("normalize: single edge keeps eigenvalues {1,-1}") {
  Eigen::MatrixXd w(2, 2);
  w << 0, 1, 1, 0;
  Eigen::MatrixXd z(normalize(graph_from(w)));
  REQUIRE(z(0, 1) == Catch::Approx(1.0));
  auto [vals, vecs] = top_eigs(sparse_from(z), 2);
  REQUIRE(vals(0) == Catch::Approx(1.0));
  REQUIRE(vals(1) == Catch::Approx(-1.0));
}

TEST_CASE("normalize: complete graph on three nodes") {
  // Z = (J - I)/2 has eigenvalues 1 and -1/2 (twice)
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(3, 3);
  w.diagonal().setZero();
  auto z = normalize(graph_from(w));
  auto [vals, vecs] = top_eigs(z, 3);
  REQUIRE(vals(0) == Catch::Approx(1.0));
  REQUIRE(vals(1) == Catch::Approx(-0.5));
  REQUIRE(vals(2) == Catch::Approx(-0.5));
}

TEST_CASE("normalize: disconnected edges give eigenvalue 1 per component") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 4);
  w(0, 1) = w(1, 0) = 1.0;
  w(2, 3) = w(3, 2) = 1.0;
  auto [vals, vecs] = top_eigs(normalize(graph_from(w)), 3);
  REQUIRE(vals(0) == Catch::Approx(1.0));
  REQUIRE(vals(1) == Catch::Approx(1.0));
  REQUIRE(vals(2) < 0.5);
}

TEST_CASE("normalize: isolated nodes stay zero rows") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(3, 3);
  w(0, 1) = w(1, 0) = 2.0;
  Eigen::MatrixXd z(normalize(graph_from(w)));
  REQUIRE(z.row(2).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(z(0, 1) == Catch::Approx(1.0));
}

TEST_CASE("top_eigs: diagonal matrix returns sorted diagonal") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(5, 5);
  Eigen::VectorXd diag(5);
  diag << 0.3, 0.9, -0.2, 0.5, 0.1;
  w.diagonal() = diag;
  auto [vals, vecs] = top_eigs(sparse_from(w), 3);
  REQUIRE(vals(0) == Catch::Approx(0.9));
  REQUIRE(vals(1) == Catch::Approx(0.5));
  REQUIRE(vals(2) == Catch::Approx(0.3));
}

TEST_CASE("top_eigs: dense and Lanczos paths agree on a random symmetric matrix") {
  std::mt19937_64 rng(3);
  const int n = 200;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = uniform_in(rng, -1.0, 1.0);
  auto s = sparse_from(a);
  EigOptions dense_opts;  // default threshold keeps n=200 on the dense path
  auto [dv, dU] = top_eigs(s, 6, dense_opts);
  EigOptions iter_opts;
  iter_opts.dense_threshold = 0;  // force the iterative path
  iter_opts.dense_fallback_max = 0;
  auto [iv, iU] = top_eigs(s, 6, iter_opts);
  for (int k = 0; k < 6; ++k) {
    REQUIRE(iv(k) == Catch::Approx(dv(k)).epsilon(1e-8));
    REQUIRE(std::abs(iU.col(k).dot(dU.col(k))) == Catch::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("top_eigs: Lanczos resolves a degenerate top eigenvalue") {
  // two disconnected unit edges: eigenvalue 1 with multiplicity 2
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(40, 40);
  for (int b = 0; b < 20; ++b) w(2 * b, 2 * b + 1) = w(2 * b + 1, 2 * b) = 1.0;
  EigOptions opts;
  opts.dense_threshold = 0;
  opts.dense_fallback_max = 0;
  auto [vals, vecs] = top_eigs(normalize(graph_from(w)), 4, opts);
  for (int k = 0; k < 4; ++k) REQUIRE(vals(k) == Catch::Approx(1.0).margin(1e-9));
  // eigenvectors stay orthonormal under deflation
  Eigen::MatrixXd gram = vecs.transpose() * vecs;
  REQUIRE((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("row_normalize: unit rows, zero rows preserved") {
  Eigen::MatrixXd u(3, 2);
  u << 3, 4, 0, 0, 1, 0;
  Eigen::MatrixXd v = row_normalize(u);
  REQUIRE(v.row(0).norm() == Catch::Approx(1.0));
  REQUIRE(v.row(1).norm() == 0.0);
  REQUIRE(v(0, 0) == Catch::Approx(0.6));
}

TEST_CASE("kmeans: k equal to N gives zero inertia") {
  std::mt19937_64 rng(7);
  Eigen::MatrixXd v(6, 2);
  for (int i = 0; i < 6; ++i) v.row(i) << uniform01(rng), uniform01(rng);
  KmeansResult r = kmeans(v, 6, 1, 5);
  REQUIRE(r.inertia == Catch::Approx(0.0).margin(1e-18));
}

TEST_CASE("kmeans: two tight orthogonal groups split perfectly") {
  Eigen::MatrixXd v(20, 2);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10; ++i) v.row(i) << 1.0, uniform01(rng) * 1e-4;
  for (int i = 10; i < 20; ++i) v.row(i) << uniform01(rng) * 1e-4, 1.0;
  KmeansResult r = kmeans(v, 2, 3, 10);
  for (int i = 1; i < 10; ++i) REQUIRE(r.labels[i] == r.labels[0]);
  for (int i = 11; i < 20; ++i) REQUIRE(r.labels[i] == r.labels[10]);
  REQUIRE(r.labels[0] != r.labels[10]);
}

TEST_CASE("kmeans: returned inertia never exceeds the truth labeling's inertia") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd v(60, 3);
    std::vector<int> truth(60);
    for (int i = 0; i < 60; ++i) {
      int g = i % 3;
      truth[i] = g;
      for (int j = 0; j < 3; ++j)
        v(i, j) = (g == j ? 2.0 : 0.0) + 0.3 * uniform_in(rng, -1.0, 1.0);
    }
    KmeansResult r = kmeans(v, 3, trial, 10);
    // inertia of the ground-truth labeling
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(3, 3);
    Eigen::Vector3d cnt = Eigen::Vector3d::Zero();
    for (int i = 0; i < 60; ++i) {
      mean.row(truth[i]) += v.row(i);
      cnt(truth[i]) += 1;
    }
    for (int c = 0; c < 3; ++c) mean.row(c) /= cnt(c);
    double truth_inertia = 0.0;
    for (int i = 0; i < 60; ++i) truth_inertia += (v.row(i) - mean.row(truth[i])).squaredNorm();
    REQUIRE(r.inertia <= truth_inertia + 1e-9);
  }
}

TEST_CASE("kmeans: near-orthogonal initialization also solves the clean case") {
  Eigen::MatrixXd v(9, 3);
  for (int i = 0; i < 9; ++i) {
    v.row(i).setZero();
    v(i, i / 3) = 1.0;
  }
  KmeansResult r = kmeans(v, 3, 5, 3, KmeansInit::NearOrthogonal);
  REQUIRE(r.inertia == Catch::Approx(0.0).margin(1e-18));
}

TEST_CASE("kmeans: partition is stable under orthogonal maps of well-separated data") {
  Eigen::MatrixXd v(30, 2);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 30; ++i) {
    int g = i < 15 ? 0 : 1;
    v.row(i) << (g ? 10.0 : -10.0) + uniform_in(rng, -0.5, 0.5), uniform_in(rng, -0.5, 0.5);
  }
  double c = std::cos(0.7), s = std::sin(0.7);
  Eigen::Matrix2d rot;
  rot << c, -s, s, c;
  Eigen::MatrixXd vr = v * rot.transpose();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    KmeansResult a = kmeans(v, 2, seed, 10);
    KmeansResult b = kmeans(vr, 2, seed, 10);
    bool same = a.labels == b.labels;
    std::vector<int> flipped(30);
    for (int i = 0; i < 30; ++i) flipped[i] = 1 - b.labels[i];
    REQUIRE((same || a.labels == flipped));
    for (int i = 1; i < 15; ++i) REQUIRE(a.labels[i] == a.labels[0]);
    for (int i = 16; i < 30; ++i) REQUIRE(a.labels[i] == a.labels[15]);
  }
}

TEST_CASE("estimate_k: threshold and gap modes on the worked examples") {
  Eigen::VectorXd e1(5);
  e1 << 1.0, 1.0, 1.0, 0.4, 0.1;
  REQUIRE(estimate_k(e1, 1000, 2.0, KSelect::Threshold) == 3);

  Eigen::VectorXd e2(4);
  e2 << 0.9, 0.8, 0.7, 0.6;
  REQUIRE(estimate_k(e2, 1000, 2.0, KSelect::Threshold) == 1);

  Eigen::VectorXd e3(4);
  e3 << 1.0, 0.99, 0.5, 0.4;
  REQUIRE(estimate_k(e3, 1000, 2.0, KSelect::Gap) == 2);
}

TEST_CASE("pipeline: two far-separated collinear segments cluster perfectly") {
  PointCloud cloud;
  const int n = 100;
  cloud.points.resize(2 * n, 2);
  for (int i = 0; i < n; ++i) {
    cloud.points.row(i) << 0.005 + 0.01 * i, 0.2;
    cloud.points.row(n + i) << 0.005 + 0.01 * i, 0.8;
  }
  cloud.truth_labels.assign(2 * n, 0);
  for (int i = n; i < 2 * n; ++i) cloud.truth_labels[i] = 1;

  TheoryDefaults td = theory_defaults(2 * n, 1, 2, 0.0, 2.0);
  HoscParams p;
  p.d = 1;
  p.m = std::min(td.m, 4);
  p.ell = 10;
  p.epsilon = td.epsilon;
  p.eta = td.eta;
  p.kernel = Kernel::Simple;
  p.k_clusters = 2;
  p.seed = 9;
  ClusterResult res = cluster_hosc(cloud, p);
  int flips = 0;
  for (int i = 0; i < n; ++i) flips += res.labels[i] != res.labels[0];
  for (int i = n; i < 2 * n; ++i) flips += res.labels[i] != res.labels[n];
  REQUIRE(flips == 0);
  REQUIRE(res.labels[0] != res.labels[n]);
  REQUIRE(res.eigenvalues(0) == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("pipeline: K=1 puts everything in one cluster") {
  PointCloud cloud;
  cloud.points.resize(20, 2);
  std::mt19937_64 rng(19);
  for (int i = 0; i < 20; ++i) cloud.points.row(i) << uniform01(rng), uniform01(rng);
  HoscParams p;
  p.d = 1;
  p.m = 3;
  p.ell = 6;
  p.eta = 0.1;
  p.k_clusters = 1;
  ClusterResult res = cluster_hosc(cloud, p);
  for (int v : res.labels) REQUIRE(v == 0);
}

TEST_CASE("pipeline: permuting the input permutes the labels") {
  std::mt19937_64 rng(23);
  PointCloud cloud;
  const int n = 60;
  cloud.points.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    double t = uniform01(rng);
    if (i % 2)
      cloud.points.row(i) << t, 0.25 + 0.002 * uniform01(rng);
    else
      cloud.points.row(i) << t, 0.75 + 0.002 * uniform01(rng);
  }
  HoscParams p;
  p.d = 1;
  p.m = 3;
  p.ell = 8;
  p.eta = 0.02;
  p.k_clusters = 2;
  p.seed = 5;
  ClusterResult base = cluster_hosc(cloud, p);

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  PointCloud shuffled;
  shuffled.points.resize(n, 2);
  for (int i = 0; i < n; ++i) shuffled.points.row(i) = cloud.points.row(perm[i]);
  ClusterResult moved = cluster_hosc(shuffled, p);

  // compare as partitions: same co-membership relation
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      bool same_base = base.labels[perm[a]] == base.labels[perm[b]];
      bool same_moved = moved.labels[a] == moved.labels[b];
      REQUIRE(same_base == same_moved);
    }
}

TEST_CASE("pipeline: isolated points inherit the nearest cluster") {
  PointCloud cloud;
  cloud.points.resize(9, 2);
  for (int i = 0; i < 4; ++i) cloud.points.row(i) << 0.1 + 0.01 * i, 0.1;
  for (int i = 4; i < 8; ++i) cloud.points.row(i) << 0.1 + 0.01 * (i - 4), 0.9;
  cloud.points.row(8) << 0.2, 0.85;  // far from everyone at the working scale
  HoscParams p;
  p.d = 1;
  p.m = 3;
  p.ell = 4;
  p.kernel = Kernel::Simple;
  p.epsilon = 0.08;
  p.eta = 0.01;
  p.k_clusters = 2;
  ClusterResult res = cluster_hosc(cloud, p);
  REQUIRE(res.degrees(8) == 0.0);
  REQUIRE(res.labels[8] == res.labels[4]);  // nearest labeled block is the top row
}

TEST_CASE("select_eta: single grid value and concentrated winner") {
  PointCloud cloud;
  cloud.points.resize(40, 2);
  for (int i = 0; i < 20; ++i) cloud.points.row(i) << 0.01 * i, 0.2;
  for (int i = 20; i < 40; ++i) cloud.points.row(i) << 0.01 * (i - 20), 0.8;
  cloud.truth_labels.assign(40, 0);
  for (int i = 20; i < 40; ++i) cloud.truth_labels[i] = 1;
  HoscParams p;
  p.d = 1;
  p.m = 3;
  p.ell = 6;
  p.k_clusters = 2;
  p.kernel = Kernel::Heat;

  EtaSearchResult one = select_eta(cloud, p, {0.013});
  REQUIRE(one.eta == 0.013);

  EtaSearchResult best = select_eta(cloud, p, {1e-5, 0.013, 0.5});
  ClusterResult& r = best.result;
  int flips = 0;
  for (int i = 1; i < 20; ++i) flips += r.labels[i] != r.labels[0];
  for (int i = 21; i < 40; ++i) flips += r.labels[i] != r.labels[20];
  REQUIRE(flips == 0);
}

TEST_CASE("spectrum of Z stays within [-1, 1] on random affinity graphs") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    PointCloud cloud;
    cloud.points.resize(50, 2);
    for (int i = 0; i < 50; ++i) cloud.points.row(i) << uniform01(rng), uniform01(rng);
    HoscParams p;
    p.d = 1;
    p.m = 3;
    p.ell = 7;
    p.eta = 0.05;
    NeighborIndex idx = build_knn(cloud, p.ell);
    AffinityGraph g = build_hosc_affinity(cloud, idx, p);
    std::vector<int> keep;
    for (int i = 0; i < 50; ++i)
      if (g.degrees(i) > 0) keep.push_back(i);
    auto z = normalize(g);
    Eigen::MatrixXd zd(z);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(zd);
    REQUIRE(es.eigenvalues().minCoeff() >= -1.0 - 1e-8);
    REQUIRE(es.eigenvalues().maxCoeff() <= 1.0 + 1e-8);
  }
}
