#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hosc/datasets.hpp"
#include "hosc/metrics.hpp"
#include "hosc/model.hpp"
#include "hosc/outliers.hpp"
#include "hosc/parallel.hpp"
#include "hosc/spectral.hpp"

namespace hosc {

/// Per-replication score of one algorithm on one generated cloud.
struct CellScore {
  double rate = std::numeric_limits<double>::quiet_NaN();
  double tpr = std::numeric_limits<double>::quiet_NaN();
  double chosen_scale = 0.0;  // eta for the multiway run, epsilon for the baseline
  std::string error;
};

inline int truth_k(const PointCloud& cloud) {
  int k = 0;
  for (int v : cloud.truth_labels) k = std::max(k, v + 1);
  return std::max(k, 1);
}

inline std::vector<bool> truth_outlier_mask(const PointCloud& cloud) {
  std::vector<bool> m(cloud.size(), false);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) m[i] = cloud.truth_labels[i] == kOutlier;
  return m;
}

/// Multiway run: eta picked by eigenspace variance on clean data, by the
/// degree-gap criterion when an outlier fraction is given (the quantile rule
/// then flags that fraction before the spectral step).
inline CellScore run_hosc_cell(const PointCloud& cloud, HoscParams params,
                               const std::vector<double>& eta_grid,
                               double outlier_fraction) {
  CellScore score;
  try {
    params.k_clusters = truth_k(cloud);
    if (outlier_fraction > 0.0) {
      double eta = select_eta_outliers(cloud, params, eta_grid, outlier_fraction);
      params.eta = eta;
      OutlierPolicy policy{OutlierPolicy::Rule::Quantile, outlier_fraction};
      ClusterResult res = cluster_hosc(cloud, params, policy);
      score.chosen_scale = eta;
      score.tpr = outlier_tpr(res.outlier_mask, truth_outlier_mask(cloud));
      std::vector<int> pred = res.labels;
      for (Eigen::Index i = 0; i < cloud.size(); ++i)
        if (res.outlier_mask[i]) pred[i] = kOutlier;
      score.rate = misclassification_rate(pred, cloud.truth_labels);
    } else {
      EtaSearchResult best = select_eta(cloud, params, eta_grid);
      score.chosen_scale = best.eta;
      score.rate = misclassification_rate(best.result.labels, cloud.truth_labels);
    }
  } catch (const std::exception& e) {
    score.error = e.what();
  }
  return score;
}

/// Baseline configurations: a log grid of fixed scales plus local scaling
/// with neighbor counts 5..ls_ell_max.
struct ScSearch {
  std::vector<double> eps_grid;
  int ls_ell_min = 5;
  int ls_ell_max = 15;
  Kernel kernel = Kernel::Heat;
};

/// Baseline run. Clean data: scored at its best (smallest) misclassification
/// over every configuration, mirroring the published comparison protocol.
/// With outliers: the configuration is chosen by the same degree-gap
/// criterion the multiway run uses, then scored.
inline CellScore run_sc_cell(const PointCloud& cloud, const ScSearch& search, int k,
                             double outlier_fraction, std::uint64_t seed) {
  CellScore score;
  try {
    std::vector<ScScale> configs;
    for (double e : search.eps_grid) configs.push_back(ScScale::fixed(e));
    for (int l = search.ls_ell_min; l <= std::min<int>(search.ls_ell_max,
                                                       static_cast<int>(cloud.size()) - 1);
         ++l)
      configs.push_back(ScScale::local_scaling(l));

    if (outlier_fraction > 0.0) {
      NeighborIndex index = build_knn(cloud, static_cast<int>(cloud.size()) - 1);
      double best_gap = -std::numeric_limits<double>::infinity();
      const ScScale* best = &configs.front();
      for (const auto& cfg : configs) {
        AffinityGraph g = build_sc_affinity(cloud, cfg, search.kernel, index);
        double gap = degree_gap_score(g.degrees, 2, outlier_fraction);
        if (gap > best_gap) {
          best_gap = gap;
          best = &cfg;
        }
      }
      OutlierPolicy policy{OutlierPolicy::Rule::Quantile, outlier_fraction};
      ClusterResult res = cluster_sc(cloud, *best, search.kernel, k, -1, seed, 10, policy);
      score.chosen_scale = best->local ? -double(best->sigma_ell) : best->epsilon;
      score.tpr = outlier_tpr(res.outlier_mask, truth_outlier_mask(cloud));
      std::vector<int> pred = res.labels;
      for (Eigen::Index i = 0; i < cloud.size(); ++i)
        if (res.outlier_mask[i]) pred[i] = kOutlier;
      score.rate = misclassification_rate(pred, cloud.truth_labels);
    } else {
      double best_rate = std::numeric_limits<double>::infinity();
      double best_scale = 0.0;
      for (const auto& cfg : configs) {
        ClusterResult res = cluster_sc(cloud, cfg, search.kernel, k, -1, seed, 10);
        double rate = misclassification_rate(res.labels, cloud.truth_labels);
        if (rate < best_rate) {
          best_rate = rate;
          best_scale = cfg.local ? -double(cfg.sigma_ell) : cfg.epsilon;
        }
      }
      score.rate = best_rate;
      score.chosen_scale = best_scale;
    }
  } catch (const std::exception& e) {
    score.error = e.what();
  }
  return score;
}

/// Runs the config's dataset x algorithm x replication grid and aggregates
/// the per-cell scores. With fixed seeds the report is byte-reproducible;
/// timing is recorded only when the config opts in.
inline nlohmann::ordered_json run_benchmark(const nlohmann::json& config) {
  const std::uint64_t master = config.value("seed", 1ULL);
  const int reps = config.value("replications", 1);
  const bool record_timing = config.value("record_timing", false);
  if (reps < 1) throw std::invalid_argument("run_benchmark: replications >= 1");
  if (!config.contains("datasets") || !config.contains("algorithms"))
    throw std::invalid_argument("run_benchmark: config needs datasets and algorithms");

  struct Cell {
    int dataset = 0, algo = 0, rep = 0;
    CellScore score;
  };
  const auto& datasets = config.at("datasets");
  const auto& algorithms = config.at("algorithms");
  std::vector<Cell> cells;
  for (int di = 0; di < static_cast<int>(datasets.size()); ++di)
    for (int ai = 0; ai < static_cast<int>(algorithms.size()); ++ai)
      for (int r = 0; r < reps; ++r) cells.push_back(Cell{di, ai, r, {}});

  auto make_cloud = [&](int di, int rep) {
    const auto& ds = datasets.at(di);
    const std::string name = ds.at("name").get<std::string>();
    const double delta = ds.value("delta", 0.025);
    const double tau = ds.value("tau", 0.0);
    const double frac = ds.value("outlier_fraction", 0.0);
    const bool fixed = ds.value("fixed_clusters", frac > 0.0);
    std::uint64_t data_seed = fixed ? mix_seed(master, 1000003ULL + di)
                                    : mix_seed(master, 7000003ULL + di * 1009ULL + rep);
    NamedDataset nd = named_dataset(name, data_seed, delta, tau);
    PointCloud cloud = nd.cloud;
    if (frac > 0.0)
      cloud = append_uniform_outliers(cloud, frac,
                                      mix_seed(master, 9000017ULL + di * 1013ULL + rep));
    return cloud;
  };

  auto run_cell = [&](std::size_t idx) {
    Cell& cell = cells[idx];
    const auto& algo = algorithms.at(cell.algo);
    const auto& ds = datasets.at(cell.dataset);
    const double frac = ds.value("outlier_fraction", 0.0);
    PointCloud cloud;
    try {
      cloud = make_cloud(cell.dataset, cell.rep);
    } catch (const std::exception& e) {
      cell.score.error = e.what();
      return;
    }
    const std::uint64_t algo_seed = mix_seed(master, 3000001ULL + idx);
    const std::string kind = algo.at("algo").get<std::string>();
    if (kind == "hosc") {
      HoscParams p;
      p.d = algo.value("d", 1);
      p.m = algo.value("m", p.d + 2);
      p.ell = algo.value("ell", 10);
      p.kernel = kernel_from_string(algo.value("kernel", std::string("heat")));
      p.seed = algo_seed;
      const auto& grid = algo.at("eta_grid");
      auto etas = logspace(grid.at("lo").get<double>(), grid.at("hi").get<double>(),
                           grid.value("n", 20));
      cell.score = run_hosc_cell(cloud, p, etas, frac);
    } else if (kind == "sc") {
      ScSearch s;
      const auto& grid = algo.at("eps_grid");
      s.eps_grid = logspace(grid.at("lo").get<double>(), grid.at("hi").get<double>(),
                            grid.value("n", 15));
      s.ls_ell_min = algo.value("ls_ell_min", 5);
      s.ls_ell_max = algo.value("ls_ell_max", 15);
      s.kernel = kernel_from_string(algo.value("kernel", std::string("heat")));
      cell.score = run_sc_cell(cloud, s, truth_k(cloud), frac, algo_seed);
    } else {
      cell.score.error = "unknown algorithm: " + kind;
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(cells.size(), run_cell);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::ordered_json report;
  report["schema"] = 1;
  report["seed"] = master;
  report["replications"] = reps;
  if (record_timing) report["wall_time_s"] = elapsed;
  report["results"] = nlohmann::ordered_json::array();
  for (int di = 0; di < static_cast<int>(datasets.size()); ++di) {
    for (int ai = 0; ai < static_cast<int>(algorithms.size()); ++ai) {
      nlohmann::ordered_json rec;
      rec["dataset"] = datasets.at(di).value("name", "");
      rec["dataset_index"] = di;
      rec["algorithm"] = algorithms.at(ai).value("algo", "");
      rec["algorithm_index"] = ai;
      std::vector<double> rates, tprs, scales;
      std::vector<std::string> errors;
      for (const auto& cell : cells) {
        if (cell.dataset != di || cell.algo != ai) continue;
        if (!cell.score.error.empty()) {
          errors.push_back(cell.score.error);
          continue;
        }
        rates.push_back(cell.score.rate);
        scales.push_back(cell.score.chosen_scale);
        if (!std::isnan(cell.score.tpr)) tprs.push_back(cell.score.tpr);
      }
      auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / v.size();
      };
      auto stddev_of = [&](const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        double m = mean_of(v), s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / (v.size() - 1));
      };
      rec["completed"] = rates.size();
      rec["errors"] = errors;
      rec["rates"] = rates;
      rec["chosen_scales"] = scales;
      rec["mean_rate"] = mean_of(rates);
      rec["stddev_rate"] = stddev_of(rates);
      if (!tprs.empty()) {
        rec["tprs"] = tprs;
        rec["mean_tpr"] = mean_of(tprs);
        rec["stddev_tpr"] = stddev_of(tprs);
      }
      report["results"].push_back(rec);
    }
  }
  return report;
}

}  // namespace hosc
