#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hosc/model.hpp"

namespace hosc {

enum class Projection { FirstTwo, Pca };

namespace detail {

inline std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// Top-2 principal directions of the cloud, signs fixed for reproducibility.
inline Eigen::MatrixXd pca_axes(const Eigen::MatrixXd& pts) {
  Eigen::MatrixXd centered = pts.rowwise() - pts.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / double(std::max<Eigen::Index>(1, pts.rows() - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::Index D = pts.cols();
  Eigen::MatrixXd axes(D, 2);
  axes.col(0) = es.eigenvectors().col(D - 1);
  axes.col(1) = es.eigenvectors().col(D - 2);
  for (int c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < D; ++i)
      if (std::abs(axes(i, c)) > best) {
        best = std::abs(axes(i, c));
        arg = i;
      }
    if (axes(arg, c) < 0) axes.col(c) = -axes.col(c);
  }
  return axes;
}

}  // namespace detail

/// Standalone SVG scatter plot: one marker per point, one fill color per
/// label, crosses for outliers (label < 0). 600x600 canvas, data box plus a
/// 5% margin; byte-identical output for identical input.
inline void emit_svg_scatter(const PointCloud& cloud, const std::vector<int>& labels,
                             const std::string& path,
                             Projection projection = Projection::FirstTwo) {
  if (cloud.ambient_dim() < 2) throw std::invalid_argument("emit_svg_scatter: D >= 2 required");
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(cloud.size()))
    throw std::invalid_argument("emit_svg_scatter: labels length mismatch");

  Eigen::MatrixXd xy;
  if (projection == Projection::FirstTwo || cloud.ambient_dim() == 2) {
    xy = cloud.points.leftCols(2);
  } else {
    Eigen::MatrixXd centered = cloud.points.rowwise() - cloud.points.colwise().mean();
    xy = centered * detail::pca_axes(cloud.points);
  }

  const double margin = 0.05;
  double xmin = xy.col(0).minCoeff(), xmax = xy.col(0).maxCoeff();
  double ymin = xy.col(1).minCoeff(), ymax = xy.col(1).maxCoeff();
  double xspan = xmax - xmin, yspan = ymax - ymin;
  if (xspan <= 0) xspan = 1.0;
  if (yspan <= 0) yspan = 1.0;
  xmin -= margin * xspan;
  xmax += margin * xspan;
  ymin -= margin * yspan;
  ymax += margin * yspan;

  static const char* kPalette[10] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                     "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const double W = 600.0, H = 600.0;
  auto sx = [&](double x) { return (x - xmin) / (xmax - xmin) * W; };
  auto sy = [&](double y) { return H - (y - ymin) / (ymax - ymin) * H; };

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("emit_svg_scatter: cannot open " + path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" "
       "viewBox=\"0 0 600 600\">\n";
  f << "<rect width=\"600\" height=\"600\" fill=\"white\"/>\n";
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const int lab = labels.empty() ? 0 : labels[i];
    const std::string x = detail::fmt_coord(sx(xy(i, 0)));
    const std::string y = detail::fmt_coord(sy(xy(i, 1)));
    if (lab < 0) {
      f << "<path d=\"M" << x << " " << y
        << " m-3 -3 l6 6 m0 -6 l-6 6\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    } else {
      f << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\""
        << kPalette[lab % 10] << "\"/>\n";
    }
  }
  f << "</svg>\n";
  if (!f) throw std::runtime_error("emit_svg_scatter: write failed for " + path);
}

}  // namespace hosc
