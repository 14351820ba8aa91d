#pragma once

// Per-bump geometry table and CSV writers for prediction grids.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "bumpnet/error.hpp"
#include "bumpnet/metrics.hpp"
#include "bumpnet/model.hpp"

namespace bumpnet {

/// One row per bump: index, center, sides, rotation, sharpness, height.
inline std::vector<BumpGeometry> bump_report(const BumpNetModel& m) {
  std::vector<BumpGeometry> rows;
  rows.reserve(m.bump_count());
  for (std::size_t i = 0; i < m.bump_count(); ++i) rows.push_back(m.geometry(i));
  return rows;
}

inline std::string bump_report_csv(const BumpNetModel& m) {
  const std::size_t n = m.dim();
  std::string s = "bump";
  for (std::size_t j = 0; j < n; ++j) s += ",center_" + std::to_string(j);
  for (std::size_t j = 0; j < n; ++j) s += ",side_" + std::to_string(j);
  for (std::size_t j = 0; j + 1 < n; ++j) s += ",rotation_" + std::to_string(j);
  s += ",sharpness,height\n";
  char buf[40];
  const auto rows = bump_report(m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& g = rows[i];
    s += std::to_string(i);
    auto put = [&](double v) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      s += buf;
    };
    for (double v : g.center) put(v);
    for (double v : g.sides) put(v);
    for (double v : g.rotation) put(v);
    put(g.sharpness);
    put(g.height);
    s += '\n';
  }
  return s;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
  if (!out) throw ValidationError("failed writing " + path);
}

/// Columns x_0..x_{n-1}, u_pred, u_exact, abs_err.
inline std::string grid_csv(const GridEvaluation& g) {
  std::string s;
  for (std::size_t j = 0; j < g.dim; ++j) s += "x_" + std::to_string(j) + ",";
  s += "u_pred,u_exact,abs_err\n";
  char buf[40];
  for (std::size_t i = 0; i < g.pred.size(); ++i) {
    for (std::size_t j = 0; j < g.dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g,", g.points[i * g.dim + j]);
      s += buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g,", g.pred[i]);
    s += buf;
    std::snprintf(buf, sizeof(buf), "%.17g,", g.exact[i]);
    s += buf;
    std::snprintf(buf, sizeof(buf), "%.17g\n", std::abs(g.pred[i] - g.exact[i]));
    s += buf;
  }
  return s;
}

}  // namespace bumpnet
