#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hosc/estimate.hpp"
#include "hosc/model.hpp"

namespace hosc {

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

/// Writes the cloud as CSV with header x0,...,x{D-1}[,label]; the label
/// column appears when ground truth is present ("outlier" for kOutlier).
/// Values carry 17 significant digits so a round trip is lossless.
inline void write_csv(const PointCloud& cloud, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_csv: cannot open " + path);
  const int D = cloud.ambient_dim();
  for (int c = 0; c < D; ++c) f << (c ? ",x" : "x") << c;
  if (cloud.has_truth()) f << ",label";
  f << "\n";
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < D; ++c) {
      if (c) f << ',';
      f << detail::fmt_double(cloud.points(i, c));
    }
    if (cloud.has_truth()) {
      f << ',';
      if (cloud.truth_labels[i] == kOutlier)
        f << "outlier";
      else
        f << cloud.truth_labels[i];
    }
    f << "\n";
  }
  if (!f) throw std::runtime_error("write_csv: write failed for " + path);
}

/// Parses the cloud CSV format; malformed rows raise errors naming the line.
inline PointCloud read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("read_csv: empty file " + path);
  auto header = detail::split_csv_line(line);
  bool has_label = !header.empty() && header.back() == "label";
  const int D = static_cast<int>(header.size()) - (has_label ? 1 : 0);
  if (D < 1) throw std::runtime_error("read_csv: line 1: no coordinate columns");
  for (int c = 0; c < D; ++c)
    if (header[c] != "x" + std::to_string(c))
      throw std::runtime_error("read_csv: line 1: expected column x" + std::to_string(c) +
                               ", got '" + header[c] + "'");

  std::vector<double> values;
  std::vector<int> labels;
  long long line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != D + (has_label ? 1 : 0))
      throw std::runtime_error("read_csv: line " + std::to_string(line_no) + ": expected " +
                               std::to_string(D + (has_label ? 1 : 0)) + " columns, got " +
                               std::to_string(cells.size()));
    for (int c = 0; c < D; ++c) {
      try {
        std::size_t used = 0;
        double v = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument("trailing characters");
        values.push_back(v);
      } catch (const std::exception&) {
        throw std::runtime_error("read_csv: line " + std::to_string(line_no) +
                                 ": bad number '" + cells[c] + "'");
      }
    }
    if (has_label) {
      const std::string& cell = cells[D];
      if (cell == "outlier") {
        labels.push_back(kOutlier);
      } else {
        try {
          std::size_t used = 0;
          int v = std::stoi(cell, &used);
          if (used != cell.size() || v < 0) throw std::invalid_argument("bad label");
          labels.push_back(v);
        } catch (const std::exception&) {
          throw std::runtime_error("read_csv: line " + std::to_string(line_no) +
                                   ": bad label '" + cell + "'");
        }
      }
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(values.size()) / D;
  if (n == 0) throw std::runtime_error("read_csv: no data rows in " + path);
  PointCloud cloud;
  cloud.points.resize(n, D);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < D; ++c) cloud.points(i, c) = values[i * D + c];
  cloud.truth_labels = std::move(labels);
  cloud.check();
  return cloud;
}

/// Writes per-point cluster assignments: header label,outlier.
inline void write_labels_csv(const ClusterResult& r, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_labels_csv: cannot open " + path);
  f << "label,outlier\n";
  for (std::size_t i = 0; i < r.labels.size(); ++i)
    f << r.labels[i] << ',' << (r.outlier_mask[i] ? 1 : 0) << "\n";
  if (!f) throw std::runtime_error("write_labels_csv: write failed for " + path);
}

/// Reads a labels file: either the label,outlier format written by the
/// cluster command or a cloud CSV with a label column.
inline std::pair<std::vector<int>, std::vector<bool>> read_labels_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_labels_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("read_labels_csv: empty file");
  auto header = detail::split_csv_line(line);
  std::vector<int> labels;
  std::vector<bool> mask;
  if (header.size() == 2 && header[0] == "label" && header[1] == "outlier") {
    long long line_no = 1;
    while (std::getline(f, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto cells = detail::split_csv_line(line);
      if (cells.size() != 2)
        throw std::runtime_error("read_labels_csv: line " + std::to_string(line_no) +
                                 ": expected 2 columns");
      labels.push_back(std::stoi(cells[0]));
      mask.push_back(cells[1] != "0");
    }
    return {labels, mask};
  }
  f.close();
  PointCloud cloud = read_csv(path);
  if (!cloud.has_truth())
    throw std::runtime_error("read_labels_csv: " + path + " carries no label column");
  for (int v : cloud.truth_labels) {
    labels.push_back(v);
    mask.push_back(v == kOutlier);
  }
  return {labels, mask};
}

/// Two-column CSV export of a correlation curve.
inline void write_curve_csv(const CorrelationCurve& c, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_curve_csv: cannot open " + path);
  f << "log_scale,log_corr\n";
  for (std::size_t i = 0; i < c.log_scales.size(); ++i)
    f << detail::fmt_double(c.log_scales[i]) << ',' << detail::fmt_double(c.log_corr[i])
      << "\n";
  if (!f) throw std::runtime_error("write_curve_csv: write failed for " + path);
}

}  // namespace hosc
