#include "blendsa/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "blendsa/error.hpp"

namespace blendsa {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

struct Rgb {
  double r, g, b;
};

// Blue-white-red ramp anchored at the range midpoint.
std::string ramp_color(double t) {
  static const Rgb lo{0x21, 0x66, 0xac};
  static const Rgb mid{0xf7, 0xf7, 0xf7};
  static const Rgb hi{0xb2, 0x18, 0x2b};
  t = std::min(1.0, std::max(0.0, t));
  const Rgb* a = &lo;
  const Rgb* b = &mid;
  double u = 2.0 * t;
  if (t > 0.5) {
    a = &mid;
    b = &hi;
    u = 2.0 * t - 1.0;
  }
  const int r = static_cast<int>(std::lround(a->r + u * (b->r - a->r)));
  const int g = static_cast<int>(std::lround(a->g + u * (b->g - a->g)));
  const int bl = static_cast<int>(std::lround(a->b + u * (b->b - a->b)));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, bl);
  return buf;
}

}  // namespace

std::string render_heatmap_svg(const SweepResult& sweep,
                               const std::string& coefficient) {
  if (sweep.axes.size() != 2) {
    throw ParseError("heat map needs exactly two sweep axes");
  }
  std::size_t coef_idx = sweep.coef_names.size();
  for (std::size_t i = 0; i < sweep.coef_names.size(); ++i) {
    if (sweep.coef_names[i] == coefficient) {
      coef_idx = i;
      break;
    }
  }
  if (coef_idx == sweep.coef_names.size()) {
    throw ParseError("unknown coefficient '" + coefficient + "'");
  }
  const std::vector<double>& gy = sweep.axes[0].grid;  // rows, slow axis
  const std::vector<double>& gx = sweep.axes[1].grid;  // cols, fast axis
  const std::size_t ny = gy.size();
  const std::size_t nx = gx.size();
  if (sweep.cells.size() != nx * ny) {
    throw ParseError("sweep cell count does not match its axes");
  }

  double vmin = std::numeric_limits<double>::infinity();
  double vmax = -std::numeric_limits<double>::infinity();
  for (const SweepCell& cell : sweep.cells) {
    if (!cell.ok) continue;
    const double v = cell.theta[static_cast<Eigen::Index>(coef_idx)];
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  const bool have_range = vmin <= vmax;
  if (!have_range) {
    vmin = 0.0;
    vmax = 0.0;
  }
  const double vmid = 0.5 * (vmin + vmax);
  const double span = vmax - vmin;

  const int cw = static_cast<int>(
      std::min(48.0, std::max(10.0, 700.0 / static_cast<double>(nx))));
  const int ch = static_cast<int>(
      std::min(48.0, std::max(10.0, 520.0 / static_cast<double>(ny))));
  const int left = 76, top = 34, bottom = 58, right = 120;
  const int gw = cw * static_cast<int>(nx);
  const int gh = ch * static_cast<int>(ny);
  const int width = left + gw + right;
  const int height = top + gh + bottom;

  std::string svg;
  svg.reserve(64 * nx * ny + 4096);
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" viewBox=\"0 0 " + std::to_string(width) + " " +
         std::to_string(height) + "\">\n";
  svg += "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"1\" x2=\"0\" "
         "y2=\"0\">\n";
  svg += "<stop offset=\"0\" stop-color=\"#2166ac\"/>\n";
  svg += "<stop offset=\"0.5\" stop-color=\"#f7f7f7\"/>\n";
  svg += "<stop offset=\"1\" stop-color=\"#b2182b\"/>\n";
  svg += "</linearGradient></defs>\n";
  svg += "<rect width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"" + std::to_string(left + gw / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" +
         xml_escape(coefficient) + " estimate</text>\n";

  // Cells: row i bottom-up, column j left-right.
  for (std::size_t i = 0; i < ny; ++i) {
    for (std::size_t j = 0; j < nx; ++j) {
      const SweepCell& cell = sweep.cells[i * nx + j];
      const int x = left + static_cast<int>(j) * cw;
      const int y = top + gh - static_cast<int>(i + 1) * ch;
      std::string fill = "#999999";
      std::string tip = "delta_" + sweep.axes[0].mechanism + "=" +
                        fmt("%.6g", gy[i]) + ", delta_" +
                        sweep.axes[1].mechanism + "=" + fmt("%.6g", gx[j]);
      if (cell.ok) {
        const double v = cell.theta[static_cast<Eigen::Index>(coef_idx)];
        const double t = span > 0.0 ? (v - vmin) / span : 0.5;
        fill = ramp_color(t);
        tip += ": " + fmt("%.6g", v);
      } else {
        tip += ": failed (" + cell.error + ")";
      }
      const bool anchor = gy[i] == 0.0 && gx[j] == 0.0;
      svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" +
             std::to_string(y) + "\" width=\"" + std::to_string(cw) +
             "\" height=\"" + std::to_string(ch) + "\" fill=\"" + fill +
             "\"";
      if (anchor) {
        svg += " stroke=\"#000000\" stroke-width=\"1.5\"";
      }
      svg += "><title>" + xml_escape(tip) + "</title></rect>\n";
    }
  }

  // Tick labels, thinned to at most ~9 per axis.
  const std::size_t xstep = std::max<std::size_t>(1, (nx + 8) / 9);
  const std::size_t ystep = std::max<std::size_t>(1, (ny + 8) / 9);
  for (std::size_t j = 0; j < nx; j += xstep) {
    const int x = left + static_cast<int>(j) * cw + cw / 2;
    svg += "<text x=\"" + std::to_string(x) + "\" y=\"" +
           std::to_string(top + gh + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">" +
           fmt("%.3g", gx[j]) + "</text>\n";
  }
  for (std::size_t i = 0; i < ny; i += ystep) {
    const int y = top + gh - static_cast<int>(i) * ch - ch / 2 + 4;
    svg += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" +
           std::to_string(y) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"10\">" +
           fmt("%.3g", gy[i]) + "</text>\n";
  }
  svg += "<text x=\"" + std::to_string(left + gw / 2) + "\" y=\"" +
         std::to_string(top + gh + 40) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">delta_" +
         xml_escape(sweep.axes[1].mechanism) + "</text>\n";
  svg += "<text x=\"18\" y=\"" + std::to_string(top + gh / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 18 " +
         std::to_string(top + gh / 2) + ")\">delta_" +
         xml_escape(sweep.axes[0].mechanism) + "</text>\n";

  // Legend.
  const int lx = left + gw + 24;
  svg += "<rect x=\"" + std::to_string(lx) + "\" y=\"" +
         std::to_string(top) + "\" width=\"18\" height=\"" +
         std::to_string(gh) + "\" fill=\"url(#ramp)\" stroke=\"#666666\"/>\n";
  const int tx = lx + 24;
  svg += "<text x=\"" + std::to_string(tx) + "\" y=\"" +
         std::to_string(top + gh) +
         "\" font-family=\"sans-serif\" font-size=\"10\">" +
         fmt("%.6g", vmin) + "</text>\n";
  svg += "<text x=\"" + std::to_string(tx) + "\" y=\"" +
         std::to_string(top + gh / 2 + 4) +
         "\" font-family=\"sans-serif\" font-size=\"10\">" +
         fmt("%.6g", vmid) + "</text>\n";
  svg += "<text x=\"" + std::to_string(tx) + "\" y=\"" +
         std::to_string(top + 10) +
         "\" font-family=\"sans-serif\" font-size=\"10\">" +
         fmt("%.6g", vmax) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace blendsa
