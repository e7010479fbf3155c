#pragma once

#include <algorithm>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "clairaut/dynamics.hpp"

namespace clairaut {

inline std::vector<std::string> csv_header(const ClairautTransform& ct) {
  std::vector<std::string> h{"t"};
  for (const auto& c : ct.model().coords) h.push_back("q:" + c);
  for (const auto& c : ct.split().regular) h.push_back("p:" + c);
  for (const auto& c : ct.split().degenerate) h.push_back("v:" + c);
  h.insert(h.end(), {"H_phys", "consistency_residual", "el_residual"});
  return h;
}

inline std::vector<double> csv_row(const Sample& s) {
  std::vector<double> row{s.t};
  row.insert(row.end(), s.q.begin(), s.q.end());
  row.insert(row.end(), s.p.begin(), s.p.end());
  row.insert(row.end(), s.v.begin(), s.v.end());
  row.insert(row.end(), {s.H, s.consistency, s.el});
  return row;
}

inline void write_csv(std::ostream& os, const ClairautTransform& ct, const Trajectory& tr) {
  auto header = csv_header(ct);
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << "\n";
  for (const auto& s : tr.samples) {
    auto row = csv_row(s);
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << format_number17(row[k]);
    os << "\n";
  }
}

/// Polylines of the selected columns against t.
inline void write_svg(std::ostream& os, const ClairautTransform& ct, const Trajectory& tr,
                      const std::vector<std::string>& columns) {
  const double W = 800, Hh = 480, pad = 40;
  auto header = csv_header(ct);
  std::vector<std::size_t> idx;
  for (const auto& c : columns) {
    auto it = std::find(header.begin(), header.end(), c);
    if (it == header.end()) throw Error("unknown plot column '" + c + "'");
    idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  std::vector<std::vector<double>> rows;
  for (const auto& s : tr.samples) rows.push_back(csv_row(s));
  double t0 = rows.empty() ? 0 : rows.front()[0], t1 = rows.empty() ? 1 : rows.back()[0];
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : rows)
    for (auto k : idx) {
      lo = std::min(lo, r[k]);
      hi = std::max(hi, r[k]);
    }
  if (!(hi > lo)) {
    lo -= 1;
    hi += 1;
  }
  if (!(t1 > t0)) t1 = t0 + 1;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t c = 0; c < idx.size(); ++c) {
    os << "<polyline fill=\"none\" stroke=\"" << colors[c % 6] << "\" points=\"";
    std::size_t stride = std::max<std::size_t>(1, rows.size() / 2000);
    for (std::size_t k = 0; k < rows.size(); k += stride) {
      double x = pad + (rows[k][0] - t0) / (t1 - t0) * (W - 2 * pad);
      double y = Hh - pad - (rows[k][idx[c]] - lo) / (hi - lo) * (Hh - 2 * pad);
      os << x << "," << y << " ";
    }
    os << "\"/>\n";
    os << "<text x=\"" << pad + 10 << "\" y=\"" << pad + 16 * (c + 1) << "\" fill=\"" << colors[c % 6]
       << "\" font-size=\"12\">" << columns[c] << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace clairaut
