#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdsplit/errors.hpp"
#include "pdsplit/grid.hpp"

namespace pdsplit {

// Scientific notation with 10 significant digits; enough to round-trip the
// interesting part of a double and stable across reruns.
inline std::string format_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9e", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Row-major CSV for a grid: the last axis spans a line, every leading axis
/// combination gets its own line.
inline void write_grid_csv(const std::string& path, const Grid& g) {
  const std::size_t cols = g.shape.empty() ? g.size() : static_cast<std::size_t>(g.shape.back());
  const std::size_t rows = cols == 0 ? 0 : g.size() / cols;
  std::string out;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out += ',';
      out += format_sci(g.data[r * cols + c]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

inline Grid read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<double> data;
  std::string line;
  int rows = 0;
  long cols = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    long c = 0;
    while (std::getline(ss, cell, ',')) {
      data.push_back(std::stod(cell));
      ++c;
    }
    if (cols >= 0 && c != cols) throw IoError("ragged CSV: " + path);
    cols = c;
    ++rows;
  }
  if (rows == 0) throw IoError("empty CSV: " + path);
  return Grid({rows, static_cast<int>(cols)}, std::move(data));
}

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples) with the linear
/// scaling recorded in a JSON sidecar so values round-trip to within
/// (vmax - vmin) / 65535.
inline void write_grid_pgm(const std::string& path, const Grid& g,
                           const std::string& sidecar_path) {
  if (g.shape.size() != 2) throw ShapeError("write_grid_pgm: needs a 2-D grid");
  const int h = g.shape[0], w = g.shape[1];
  double vmin = g.data[0], vmax = g.data[0];
  for (double v : g.data) {
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  const double span = vmax - vmin;
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n65535\n";
  out.reserve(out.size() + g.size() * 2);
  for (double v : g.data) {
    const double t = span > 0.0 ? (v - vmin) / span : 0.0;
    const auto raw = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    out.push_back(static_cast<char>(raw >> 8));
    out.push_back(static_cast<char>(raw & 0xff));
  }
  write_text_file(path, out);
  nlohmann::json meta{{"vmin", vmin}, {"vmax", vmax}, {"maxval", 65535}};
  write_text_file(sidecar_path, meta.dump(2) + "\n");
}

inline Grid read_grid_pgm(const std::string& path, const std::string& sidecar_path) {
  const std::string raw = read_text_file(path);
  std::istringstream in(raw);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0) throw IoError("not a binary PGM: " + path);
  if (maxval != 65535) throw IoError("expected 16-bit PGM: " + path);
  in.get();  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(w) * h * 2;
  const std::size_t off = static_cast<std::size_t>(in.tellg());
  if (raw.size() - off < need) throw IoError("truncated PGM: " + path);

  const auto meta = nlohmann::json::parse(read_text_file(sidecar_path));
  const double vmin = meta.at("vmin").get<double>();
  const double vmax = meta.at("vmax").get<double>();

  Grid g({h, w});
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto hi = static_cast<unsigned char>(raw[off + 2 * i]);
    const auto lo = static_cast<unsigned char>(raw[off + 2 * i + 1]);
    const double t = (hi * 256 + lo) / 65535.0;
    g.data[i] = vmin + t * (vmax - vmin);
  }
  return g;
}

}  // namespace pdsplit
