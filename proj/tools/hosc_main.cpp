#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>

#include "hosc/bench.hpp"
#include "hosc/datasets.hpp"
#include "hosc/estimate.hpp"
#include "hosc/io.hpp"
#include "hosc/metrics.hpp"
#include "hosc/outliers.hpp"
#include "hosc/spectral.hpp"
#include "hosc/svg.hpp"

namespace {

struct EtaGridOpt {
  double lo = 0.0, hi = 0.0;
  int n = 0;
  bool set = false;
};

// LO:HI:N
EtaGridOpt parse_grid(const std::string& s) {
  EtaGridOpt g;
  auto c1 = s.find(':');
  auto c2 = s.rfind(':');
  if (c1 == std::string::npos || c2 == c1)
    throw CLI::ValidationError("grid", "expected LO:HI:N");
  g.lo = std::stod(s.substr(0, c1));
  g.hi = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
  g.n = std::stoi(s.substr(c2 + 1));
  g.set = true;
  return g;
}

int run(int argc, char** argv) {
  CLI::App app{"Higher-order spectral clustering toolkit"};
  app.require_subcommand(1);

  // ---- generate ----
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  std::string gen_dataset, gen_out;
  std::uint64_t gen_seed = 1;
  double gen_delta = 0.025, gen_tau = 0.0, gen_outlier_fraction = 0.0;
  gen->add_option("--dataset", gen_dataset,
                  "three_circles|two_lines|two_moons|sphere_ellipsoid|"
                  "intersecting_curves|curves_d10")
      ->required();
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--out", gen_out, "Output CSV")->required();
  gen->add_option("--delta", gen_delta, "Separation (two_lines)");
  gen->add_option("--tau", gen_tau, "Jitter");
  gen->add_option("--outlier-fraction", gen_outlier_fraction,
                  "Append uniform outliers at this fraction of the final cloud");

  // ---- cluster ----
  auto* clu = app.add_subcommand("cluster", "Cluster a CSV point cloud");
  std::string clu_algo = "hosc", clu_in, clu_out, clu_kernel = "heat", clu_k = "auto";
  std::string clu_eta_grid, clu_epsilon = "inf", clu_rule = "none";
  int clu_d = 1, clu_m = 3, clu_ell = 10, clu_sigma_ell = 7;
  double clu_eta = 0.0, clu_fraction = 0.0, clu_rho = 0.0;
  std::uint64_t clu_seed = 1;
  clu->add_option("--algo", clu_algo, "hosc|sc")->check(CLI::IsMember({"hosc", "sc"}));
  clu->add_option("--in", clu_in, "Input cloud CSV")->required();
  clu->add_option("--out", clu_out, "Output labels CSV")->required();
  clu->add_option("--d", clu_d, "Approximation dimension");
  clu->add_option("--m", clu_m, "Affinity order");
  clu->add_option("--ell", clu_ell, "Neighbor count");
  clu->add_option("--eta", clu_eta, "Flatness scale (hosc)");
  clu->add_option("--eta-grid", clu_eta_grid, "LO:HI:N search grid for eta (hosc)");
  clu->add_option("--epsilon", clu_epsilon, "Locality scale: number, inf, or local (sc)");
  clu->add_option("--sigma-ell", clu_sigma_ell, "Neighbor rank for local scaling (sc)");
  clu->add_option("--k", clu_k, "Cluster count or 'auto'");
  clu->add_option("--kernel", clu_kernel, "simple|heat")
      ->check(CLI::IsMember({"simple", "heat"}));
  clu->add_option("--seed", clu_seed, "RNG seed");
  clu->add_option("--rho", clu_rho, "Slowly growing factor (default max(2, log log N))");
  clu->add_option("--outlier-rule", clu_rule, "none|o1|o2|quantile")
      ->check(CLI::IsMember({"none", "o1", "o2", "quantile"}));
  clu->add_option("--fraction", clu_fraction, "Outlier fraction for the quantile rule");

  // ---- estimate ----
  auto* est = app.add_subcommand("estimate", "Estimate intrinsic dimension and jitter");
  std::string est_in, est_mode = "theory", est_curve_out;
  double est_rho = 0.0;
  est->add_option("--in", est_in, "Input cloud CSV")->required();
  est->add_option("--rho", est_rho, "Scale ratio between probes (default max(2, log log N))");
  est->add_option("--mode", est_mode, "theory|practical")
      ->check(CLI::IsMember({"theory", "practical"}));
  est->add_option("--curve-out", est_curve_out, "Write the correlation curve CSV here");

  // ---- outliers ----
  auto* out = app.add_subcommand("outliers", "Flag low-degree points");
  std::string out_in, out_out, out_rule = "quantile", out_kernel = "heat";
  double out_fraction = 0.0, out_eta = 0.01, out_rho = 0.0;
  int out_d = 1, out_m = 3, out_ell = 10;
  out->add_option("--in", out_in, "Input cloud CSV")->required();
  out->add_option("--out", out_out, "Output mask CSV")->required();
  out->add_option("--rule", out_rule, "o1|o2|quantile")
      ->check(CLI::IsMember({"o1", "o2", "quantile"}));
  out->add_option("--fraction", out_fraction, "Outlier fraction (quantile)");
  out->add_option("--d", out_d, "Approximation dimension");
  out->add_option("--m", out_m, "Affinity order");
  out->add_option("--ell", out_ell, "Neighbor count");
  out->add_option("--eta", out_eta, "Flatness scale");
  out->add_option("--kernel", out_kernel, "simple|heat")
      ->check(CLI::IsMember({"simple", "heat"}));
  out->add_option("--rho", out_rho, "Threshold factor (default max(2, log log N))");

  // ---- bench ----
  auto* ben = app.add_subcommand("bench", "Run a benchmark config");
  std::string ben_config, ben_out;
  ben->add_option("--config", ben_config, "Config JSON")->required();
  ben->add_option("--out", ben_out, "Report JSON")->required();

  // ---- plot ----
  auto* plo = app.add_subcommand("plot", "Render a labeled scatter SVG");
  std::string plo_in, plo_labels, plo_out, plo_projection = "first2";
  plo->add_option("--in", plo_in, "Input cloud CSV")->required();
  plo->add_option("--labels", plo_labels, "Labels CSV (optional)");
  plo->add_option("--out", plo_out, "Output SVG")->required();
  plo->add_option("--projection", plo_projection, "first2|pca")
      ->check(CLI::IsMember({"first2", "pca"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen->parsed()) {
    hosc::NamedDataset d = hosc::named_dataset(gen_dataset, gen_seed, gen_delta, gen_tau);
    hosc::PointCloud cloud = d.cloud;
    if (gen_outlier_fraction > 0.0)
      cloud = hosc::append_uniform_outliers(cloud, gen_outlier_fraction,
                                            hosc::mix_seed(gen_seed, 0x0c71e5ULL));
    hosc::write_csv(cloud, gen_out);
    std::cout << "wrote " << cloud.size() << " points (D=" << cloud.ambient_dim() << ") to "
              << gen_out << "\n";
    return 0;
  }

  if (clu->parsed()) {
    hosc::PointCloud cloud = hosc::read_csv(clu_in);
    int k = clu_k == "auto" ? hosc::kAutoClusters : std::stoi(clu_k);
    hosc::OutlierPolicy policy;
    if (clu_rule == "o1") policy.rule = hosc::OutlierPolicy::Rule::O1;
    if (clu_rule == "o2") policy.rule = hosc::OutlierPolicy::Rule::O2;
    if (clu_rule == "quantile") {
      policy.rule = hosc::OutlierPolicy::Rule::Quantile;
      policy.fraction = clu_fraction;
    }
    hosc::ClusterResult res;
    if (clu_algo == "hosc") {
      hosc::HoscParams p;
      p.d = clu_d;
      p.m = clu_m;
      p.ell = clu_ell;
      p.k_clusters = k;
      p.kernel = hosc::kernel_from_string(clu_kernel);
      p.seed = clu_seed;
      p.rho = clu_rho;
      if (clu_epsilon != "inf" && clu_epsilon != "local") p.epsilon = std::stod(clu_epsilon);
      if (!clu_eta_grid.empty()) {
        EtaGridOpt g = parse_grid(clu_eta_grid);
        auto grid = hosc::logspace(g.lo, g.hi, g.n);
        auto best = hosc::select_eta(cloud, p, grid, policy);
        res = best.result;
      } else {
        if (clu_eta <= 0.0)
          throw CLI::ValidationError("--eta", "hosc needs --eta or --eta-grid");
        p.eta = clu_eta;
        res = hosc::cluster_hosc(cloud, p, policy);
      }
    } else {
      hosc::ScScale scale = clu_epsilon == "local"
                                ? hosc::ScScale::local_scaling(clu_sigma_ell)
                                : hosc::ScScale::fixed(std::stod(clu_epsilon));
      if (k == hosc::kAutoClusters)
        throw CLI::ValidationError("--k", "sc needs an explicit cluster count");
      res = hosc::cluster_sc(cloud, scale, hosc::kernel_from_string(clu_kernel), k,
                             clu_ell, clu_seed, 10, policy);
    }
    hosc::write_labels_csv(res, clu_out);
    std::cout << "clustered " << cloud.size() << " points";
    if (res.chosen_eta > 0.0) std::cout << " (eta=" << res.chosen_eta << ")";
    std::cout << "; labels in " << clu_out << "\n";
    if (cloud.has_truth()) {
      std::vector<int> pred = res.labels;
      for (Eigen::Index i = 0; i < cloud.size(); ++i)
        if (res.outlier_mask[i]) pred[i] = hosc::kOutlier;
      std::cout << "misclassification vs labels: "
                << hosc::misclassification_rate(pred, cloud.truth_labels) << "\n";
    }
    return 0;
  }

  if (est->parsed()) {
    hosc::PointCloud cloud = hosc::read_csv(est_in);
    double rho = est_rho > 1.0 ? est_rho : hosc::default_rho(cloud.size());
    if (est_mode == "theory") {
      hosc::EstimationResult r = hosc::estimate_dim_and_jitter(cloud, rho);
      if (r.saturated) {
        hosc::EstimationResult ref =
            hosc::refine_tau_multiway(cloud, r.d_hat, r.r_hat, rho);
        std::cout << "d_hat=" << r.d_hat << " tau_hat=" << ref.tau_hat
                  << " r_hat=" << r.r_hat << " s_hat=" << ref.s_hat
                  << " saturated=" << (ref.saturated ? 1 : 0) << "\n";
      } else {
        std::cout << "d_hat=" << r.d_hat << " tau_hat=" << r.tau_hat << " r_hat=" << r.r_hat
                  << " saturated=0\n";
      }
      if (!est_curve_out.empty()) {
        auto scales = hosc::logspace(1e-4, 1.0, 60);
        hosc::write_curve_csv(hosc::pairwise_curve(cloud, scales, rho), est_curve_out);
      }
    } else {
      hosc::PracticalEstimate pe = hosc::estimate_practical(cloud, rho);
      std::cout << "d_hat=" << pe.est.d_hat << " tau_hat=" << pe.est.tau_hat
                << " saturated=" << (pe.est.saturated ? 1 : 0) << "\n";
      if (!est_curve_out.empty()) hosc::write_curve_csv(pe.pairwise, est_curve_out);
    }
    return 0;
  }

  if (out->parsed()) {
    hosc::PointCloud cloud = hosc::read_csv(out_in);
    hosc::HoscParams p;
    p.d = out_d;
    p.m = out_m;
    p.ell = out_ell;
    p.eta = out_eta;
    p.kernel = hosc::kernel_from_string(out_kernel);
    p = hosc::validate(p, cloud);
    double rho = out_rho > 1.0 ? out_rho : hosc::default_rho(cloud.size());
    hosc::NeighborIndex index = hosc::build_knn(cloud, p.ell);
    hosc::AffinityGraph g = hosc::build_hosc_affinity(cloud, index, p);
    hosc::OutlierReport rep;
    if (out_rule == "o1") {
      rep = hosc::detect_o1(g.degrees, p.m, rho);
    } else if (out_rule == "o2") {
      auto pre = hosc::o2_prescription(cloud.size(), p.d, cloud.ambient_dim(), rho);
      rep = hosc::detect_o2(g.degrees, p.m, rho, cloud.size(), pre.epsilon, pre.eta, p.d,
                            cloud.ambient_dim());
    } else {
      rep = hosc::detect_quantile(g.degrees, p.m, out_fraction);
    }
    std::ofstream f(out_out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + out_out);
    f << "outlier,normalized_degree\n";
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", rep.normalized_degrees(i));
      f << (rep.mask[i] ? 1 : 0) << ',' << buf << "\n";
    }
    int flagged = 0;
    for (bool b : rep.mask) flagged += b ? 1 : 0;
    std::cout << "flagged " << flagged << " of " << cloud.size() << " points; mask in "
              << out_out << "\n";
    return 0;
  }

  if (ben->parsed()) {
    std::ifstream cf(ben_config);
    if (!cf) throw std::runtime_error("cannot open " + ben_config);
    nlohmann::json config = nlohmann::json::parse(cf);
    nlohmann::ordered_json report = hosc::run_benchmark(config);
    std::ofstream rf(ben_out, std::ios::binary);
    if (!rf) throw std::runtime_error("cannot open " + ben_out);
    rf << report.dump(2) << "\n";
    std::cout << "report written to " << ben_out << "\n";
    return 0;
  }

  if (plo->parsed()) {
    hosc::PointCloud cloud = hosc::read_csv(plo_in);
    std::vector<int> labels;
    if (!plo_labels.empty()) {
      auto [lab, mask] = hosc::read_labels_csv(plo_labels);
      if (lab.size() != static_cast<std::size_t>(cloud.size()))
        throw std::runtime_error("labels file length does not match the cloud");
      labels = lab;
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) labels[i] = hosc::kOutlier;
    } else if (cloud.has_truth()) {
      labels = cloud.truth_labels;
    }
    hosc::emit_svg_scatter(cloud, labels, plo_out,
                           plo_projection == "pca" ? hosc::Projection::Pca
                                                   : hosc::Projection::FirstTwo);
    std::cout << "plot written to " << plo_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::ParseError&) {
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
