#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "pdsplit/errors.hpp"
#include "pdsplit/io.hpp"

namespace pdsplit {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  const double a = std::abs(v);
  if (v == 0.0)
    std::snprintf(buf, sizeof buf, "0");
  else if (a >= 0.01 && a < 10000.0)
    std::snprintf(buf, sizeof buf, "%g", v);
  else
    std::snprintf(buf, sizeof buf, "%.0e", v);
  return buf;
}

inline std::vector<double> linear_ticks(double lo, double hi) {
  const double span = hi - lo;
  if (!(span > 0.0)) return {lo};
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (mag * m >= raw) {
      step = mag * m;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step)
    t.push_back(v);
  return t;
}

inline std::vector<double> log_ticks(double lo, double hi) {
  std::vector<double> t;
  for (int e = static_cast<int>(std::floor(std::log10(lo))); std::pow(10.0, e) <= hi * (1 + 1e-12);
       ++e)
    if (std::pow(10.0, e) >= lo * (1 - 1e-12)) t.push_back(std::pow(10.0, e));
  if (t.empty()) t = {lo, hi};
  return t;
}

}  // namespace detail

/// Self-contained line plot; a pure function of the series data, so a rerun
/// over identical inputs reproduces the file byte for byte.
inline void write_svg_lineplot(const std::string& path, const std::string& title,
                               const std::string& xlabel, const std::string& ylabel,
                               const std::vector<Series>& series, bool logx = false,
                               bool logy = false) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  const double W = 820, H = 520, ml = 80, mr = 170, mt = 44, mb = 56;
  const double pw = W - ml - mr, ph = H - mt - mb;

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto usable = [&](double vx, double vy) {
    if (!std::isfinite(vx) || !std::isfinite(vy)) return false;
    if (logx && !(vx > 0.0)) return false;
    if (logy && !(vy > 0.0)) return false;
    return true;
  };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (usable(s.x[i], s.y[i])) {
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, s.y[i]);
        ymax = std::max(ymax, s.y[i]);
      }
  if (xmin > xmax) {
    xmin = ymin = logx || logy ? 1.0 : 0.0;
    xmax = ymax = logx || logy ? 10.0 : 1.0;
  }
  if (xmin == xmax) {
    xmax = logx ? xmax * 10.0 : xmax + 1.0;
    xmin = logx ? xmin / 10.0 : xmin - 1.0;
  }
  if (ymin == ymax) {
    ymax = logy ? ymax * 10.0 : ymax + 1.0;
    ymin = logy ? ymin / 10.0 : ymin - 1.0;
  }

  auto tx = [&](double v) {
    const double t = logx ? (std::log10(v) - std::log10(xmin)) / (std::log10(xmax) - std::log10(xmin))
                          : (v - xmin) / (xmax - xmin);
    return ml + t * pw;
  };
  auto ty = [&](double v) {
    const double t = logy ? (std::log10(v) - std::log10(ymin)) / (std::log10(ymax) - std::log10(ymin))
                          : (v - ymin) / (ymax - ymin);
    return mt + (1.0 - t) * ph;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt2(W) +
         "\" height=\"" + detail::fmt2(H) + "\" viewBox=\"0 0 " + detail::fmt2(W) + " " +
         detail::fmt2(H) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + detail::fmt2(ml + pw / 2) +
         "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         title + "</text>\n";

  const auto xticks = logx ? detail::log_ticks(xmin, xmax) : detail::linear_ticks(xmin, xmax);
  const auto yticks = logy ? detail::log_ticks(ymin, ymax) : detail::linear_ticks(ymin, ymax);
  svg += "<g stroke=\"#cccccc\" stroke-width=\"1\">\n";
  for (double v : xticks)
    svg += "<line x1=\"" + detail::fmt2(tx(v)) + "\" y1=\"" + detail::fmt2(mt) + "\" x2=\"" +
           detail::fmt2(tx(v)) + "\" y2=\"" + detail::fmt2(mt + ph) + "\"/>\n";
  for (double v : yticks)
    svg += "<line x1=\"" + detail::fmt2(ml) + "\" y1=\"" + detail::fmt2(ty(v)) + "\" x2=\"" +
           detail::fmt2(ml + pw) + "\" y2=\"" + detail::fmt2(ty(v)) + "\"/>\n";
  svg += "</g>\n";

  svg += "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#333333\">\n";
  for (double v : xticks)
    svg += "<text x=\"" + detail::fmt2(tx(v)) + "\" y=\"" + detail::fmt2(mt + ph + 18) +
           "\" text-anchor=\"middle\">" + detail::tick_label(v) + "</text>\n";
  for (double v : yticks)
    svg += "<text x=\"" + detail::fmt2(ml - 8) + "\" y=\"" + detail::fmt2(ty(v) + 4) +
           "\" text-anchor=\"end\">" + detail::tick_label(v) + "</text>\n";
  svg += "<text x=\"" + detail::fmt2(ml + pw / 2) + "\" y=\"" + detail::fmt2(H - 10) +
         "\" text-anchor=\"middle\">" + xlabel + "</text>\n";
  svg += "<text x=\"20\" y=\"" + detail::fmt2(mt + ph / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " + detail::fmt2(mt + ph / 2) +
         ")\">" + ylabel + "</text>\n";
  svg += "</g>\n";

  svg += "<rect x=\"" + detail::fmt2(ml) + "\" y=\"" + detail::fmt2(mt) + "\" width=\"" +
         detail::fmt2(pw) + "\" height=\"" + detail::fmt2(ph) +
         "\" fill=\"none\" stroke=\"#333333\"/>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = palette[si % 8];
    std::string pts;
    bool open = false;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) {
        if (open) {
          svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
                 "\" stroke-width=\"1.6\" points=\"" + pts + "\"/>\n";
          pts.clear();
          open = false;
        }
        continue;
      }
      pts += detail::fmt2(tx(s.x[i])) + "," + detail::fmt2(ty(s.y[i])) + " ";
      open = true;
    }
    if (open)
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.6\" points=\"" + pts + "\"/>\n";
    const double lyy = mt + 16 + 18.0 * si;
    svg += "<line x1=\"" + detail::fmt2(ml + pw + 12) + "\" y1=\"" + detail::fmt2(lyy - 4) +
           "\" x2=\"" + detail::fmt2(ml + pw + 34) + "\" y2=\"" + detail::fmt2(lyy - 4) +
           "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + detail::fmt2(ml + pw + 40) + "\" y=\"" + detail::fmt2(lyy) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + s.label + "</text>\n";
  }
  svg += "</svg>\n";
  write_text_file(path, svg);
}

}  // namespace pdsplit
