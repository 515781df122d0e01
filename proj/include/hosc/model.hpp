#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hosc {

/// Label value marking a ground-truth or detected outlier.
constexpr int kOutlier = -1;

/// Sentinel for "no locality scale": the ell-NN restriction replaces epsilon.
constexpr double kInfiniteEpsilon = std::numeric_limits<double>::infinity();

/// Sentinel for "estimate K from the eigengap".
constexpr int kAutoClusters = 0;

/// N points in R^D, one row per point, with optional ground-truth labels
/// (cluster id in 0..K-1, or kOutlier).
struct PointCloud {
  Eigen::MatrixXd points;        // N x D
  std::vector<int> truth_labels; // empty, or one entry per row

  Eigen::Index size() const { return points.rows(); }
  int ambient_dim() const { return static_cast<int>(points.cols()); }
  bool has_truth() const { return !truth_labels.empty(); }

  void check() const {
    if (points.rows() < 1 || points.cols() < 1)
      throw std::invalid_argument("PointCloud: need N >= 1 and D >= 1");
    if (!points.allFinite())
      throw std::invalid_argument("PointCloud: coordinates must be finite");
    if (has_truth() && static_cast<Eigen::Index>(truth_labels.size()) != points.rows())
      throw std::invalid_argument("PointCloud: truth_labels length must equal N");
  }
};

enum class Kernel { Simple, Heat };

/// Kernel value in [0,1], nonincreasing in |s|.
/// Simple: 1 if |s| < 1 else 0. Heat: exp(-s^2).
inline double kernel_eval(Kernel k, double s) {
  s = std::abs(s);
  if (k == Kernel::Simple) return s < 1.0 ? 1.0 : 0.0;
  return std::exp(-s * s);
}

inline Kernel kernel_from_string(const std::string& s) {
  if (s == "simple") return Kernel::Simple;
  if (s == "heat") return Kernel::Heat;
  throw std::invalid_argument("unknown kernel: " + s);
}

enum class KmeansInit { PlusPlus, NearOrthogonal };

/// Tunables of the multiway pipeline. Immutable value object; copy freely.
struct HoscParams {
  int d = 1;                          // approximation dimension
  int m = 3;                          // affinity order, m >= d+2
  int ell = 10;                       // neighbor count, ell >= m-1
  double epsilon = kInfiniteEpsilon;  // locality scale; infinite = ell-NN only
  double eta = 0.01;                  // flatness scale
  int k_clusters = kAutoClusters;     // K, or kAutoClusters for eigengap
  Kernel kernel = Kernel::Heat;
  double rho = 0.0;                   // slowly growing factor; 0 = default_rho(N)
  std::uint64_t seed = 0;
  int restarts = 10;                  // k-means restarts
  KmeansInit init = KmeansInit::PlusPlus;

  double rho_for(Eigen::Index n) const;
};

/// Default slowly-growing factor: max(2, log log N).
inline double default_rho(Eigen::Index n) {
  double ll = n > 2 ? std::log(std::log(static_cast<double>(n))) : 0.0;
  return std::max(2.0, ll);
}

inline double HoscParams::rho_for(Eigen::Index n) const {
  return rho > 1.0 ? rho : default_rho(n);
}

/// Checks parameter invariants against a cloud; returns params unchanged on
/// success, throws invalid_argument naming the violated invariant otherwise.
inline HoscParams validate(const HoscParams& p, const PointCloud& cloud) {
  cloud.check();
  const int D = cloud.ambient_dim();
  const Eigen::Index N = cloud.size();
  if (p.d < 1 || p.d > D - 1)
    throw std::invalid_argument("1 <= d <= D-1 violated (d=" + std::to_string(p.d) +
                                ", D=" + std::to_string(D) + ")");
  if (p.m < p.d + 2)
    throw std::invalid_argument("m >= d+2 violated (m=" + std::to_string(p.m) +
                                ", d=" + std::to_string(p.d) + ")");
  if (p.ell < p.m - 1)
    throw std::invalid_argument("ell >= m-1 violated (ell=" + std::to_string(p.ell) +
                                ", m=" + std::to_string(p.m) + ")");
  if (p.ell > N - 1)
    throw std::invalid_argument("ell <= N-1 violated (ell=" + std::to_string(p.ell) +
                                ", N=" + std::to_string(N) + ")");
  if (p.k_clusters != kAutoClusters && (p.k_clusters < 1 || p.k_clusters > N))
    throw std::invalid_argument("1 <= K <= N violated (K=" + std::to_string(p.k_clusters) + ")");
  if (!(p.epsilon > 0.0))
    throw std::invalid_argument("epsilon > 0 violated");
  if (!(p.eta > 0.0) || !std::isfinite(p.eta))
    throw std::invalid_argument("eta > 0 violated");
  if (p.rho != 0.0 && p.rho <= 1.0)
    throw std::invalid_argument("rho > 1 violated");
  return p;
}

/// Scale prescriptions derived from the main accuracy guarantee, with all
/// logarithms natural.
struct TheoryDefaults {
  int m = 0;
  double epsilon = 0.0;
  double eta = 0.0;
};

/// m = floor(log N / sqrt(log rho)) clamped to [d+2, floor(log N)],
/// epsilon = max of (rho^2 log N / N)^{1/d} and tau^{1-d/D} (rho^2 log N / N)^{1/D},
/// eta = min(epsilon, tau + rho epsilon^2).
inline TheoryDefaults theory_defaults(Eigen::Index n, int d, int D, double tau, double rho) {
  if (rho <= 1.0) throw std::domain_error("theory_defaults: rho > 1 required");
  if (n < 3) throw std::domain_error("theory_defaults: N >= 3 required");
  if (d < 1 || d > D - 1) throw std::domain_error("theory_defaults: 1 <= d <= D-1 required");
  if (tau < 0.0) throw std::domain_error("theory_defaults: tau >= 0 required");
  const double logN = std::log(static_cast<double>(n));
  TheoryDefaults out;
  int m_hi = static_cast<int>(std::floor(logN));
  int m_raw = static_cast<int>(std::floor(logN / std::sqrt(std::log(rho))));
  out.m = std::clamp(m_raw, d + 2, std::max(d + 2, m_hi));
  const double base = rho * rho * logN / static_cast<double>(n);
  const double eps1 = std::pow(base, 1.0 / d);
  const double eps2 = tau > 0.0 ? std::pow(tau, 1.0 - double(d) / D) * std::pow(base, 1.0 / D) : 0.0;
  out.epsilon = std::max(eps1, eps2);
  out.eta = std::min(out.epsilon, tau + rho * out.epsilon * out.epsilon);
  return out;
}

/// One partition of the data, with the diagnostics the pipeline produced.
struct ClusterResult {
  std::vector<int> labels;        // per point, 0..K-1
  std::vector<bool> outlier_mask; // per point
  Eigen::VectorXd eigenvalues;    // top eigenvalues of Z, descending
  double chosen_eta = 0.0;
  Eigen::VectorXd degrees;        // per point, from the full affinity graph
};

/// Deterministic uniform double in [0,1) from a 64-bit generator.
/// (The standard distributions are implementation-defined; this one is pinned.)
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n), n >= 1, via rejection (unbiased, deterministic).
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / n * n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// n log-spaced values from lo to hi inclusive.
inline std::vector<double> logspace(double lo, double hi, int n) {
  if (n < 1 || lo <= 0.0 || hi <= lo) throw std::invalid_argument("logspace: bad range");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / std::max(1, n - 1));
  return out;
}

/// splitmix64; used to derive independent per-cell RNG streams.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace hosc
