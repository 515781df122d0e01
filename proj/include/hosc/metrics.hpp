#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hosc/model.hpp"

namespace hosc {

namespace detail {

// Min-cost assignment (Hungarian algorithm with potentials) on a square
// cost matrix; returns the column matched to each row.
inline std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      int i0 = p[j0], j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] >= 1) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Fraction of points whose predicted label disagrees with the truth under
/// the best matching of label sets: exhaustive over permutations for K <= 8,
/// Hungarian assignment on the confusion matrix above. Points flagged
/// kOutlier on either side are excluded.
inline double misclassification_rate(const std::vector<int>& pred,
                                     const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("misclassification_rate: length mismatch");
  std::vector<int> p, t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == kOutlier || truth[i] == kOutlier) continue;
    if (pred[i] < 0 || truth[i] < 0)
      throw std::invalid_argument("misclassification_rate: negative non-outlier label");
    p.push_back(pred[i]);
    t.push_back(truth[i]);
  }
  if (p.empty()) return 0.0;
  const int kp = 1 + *std::max_element(p.begin(), p.end());
  const int kt = 1 + *std::max_element(t.begin(), t.end());
  const int k = std::max(kp, kt);  // pad to square with zero rows/columns
  std::vector<std::vector<long long>> agree(k, std::vector<long long>(k, 0));
  for (std::size_t i = 0; i < p.size(); ++i) ++agree[p[i]][t[i]];

  long long best_agree = 0;
  if (k <= 8) {
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      long long a = 0;
      for (int c = 0; c < k; ++c) a += agree[c][perm[c]];
      best_agree = std::max(best_agree, a);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<std::vector<double>> cost(k, std::vector<double>(k));
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) cost[i][j] = -static_cast<double>(agree[i][j]);
    auto match = detail::hungarian(cost);
    for (int i = 0; i < k; ++i)
      if (match[i] >= 0) best_agree += agree[i][match[i]];
  }
  return 1.0 - static_cast<double>(best_agree) / static_cast<double>(p.size());
}

/// Fraction of true outliers that were flagged.
inline double outlier_tpr(const std::vector<bool>& pred, const std::vector<bool>& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("outlier_tpr: length mismatch");
  long long hit = 0, total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!truth[i]) continue;
    ++total;
    if (pred[i]) ++hit;
  }
  if (total == 0) throw std::invalid_argument("outlier_tpr: no true outliers");
  return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace hosc
