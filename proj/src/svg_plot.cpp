#include "optree/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

namespace optree {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct LeafRect {
  std::string code;
  double x0, y0, x1, y1;
  double log_dens;
};

}  // namespace

std::string partition_svg(const HmapTree& tree, bool fill, int size_px) {
  if (tree.dim() != 2)
    throw ConfigError("partition plots support 2-D trees only (got p = " +
                      std::to_string(tree.dim()) + ")");
  std::vector<LeafRect> rects;
  double dmin = 0.0, dmax = 0.0;
  bool first = true;
  for (const auto& node : tree.nodes()) {
    if (node.split_dim >= 0) continue;
    LeafRect r{node.region.encode(), node.region.lower(0), node.region.lower(1),
               node.region.upper(0), node.region.upper(1), node.log_dens};
    if (std::isfinite(node.log_dens)) {
      if (first || node.log_dens < dmin) dmin = node.log_dens;
      if (first || node.log_dens > dmax) dmax = node.log_dens;
      first = false;
    }
    rects.push_back(std::move(r));
  }
  std::sort(rects.begin(), rects.end(),
            [](const LeafRect& a, const LeafRect& b) { return a.code < b.code; });

  const double s = static_cast<double>(size_px);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_px << "\" height=\""
      << size_px << "\" viewBox=\"0 0 " << size_px << " " << size_px << "\">\n";
  for (const auto& r : rects) {
    double x = r.x0 * s;
    double y = (1.0 - r.y1) * s;  // flip so the origin sits bottom-left
    double w = (r.x1 - r.x0) * s;
    double h = (r.y1 - r.y0) * s;
    std::string style = "fill:none;stroke:black;stroke-width:1";
    if (fill) {
      int gray = 255;
      if (std::isfinite(r.log_dens) && dmax > dmin) {
        double t = (r.log_dens - dmin) / (dmax - dmin);
        gray = static_cast<int>(std::lround(255.0 * (1.0 - 0.85 * t)));
      }
      char color[16];
      std::snprintf(color, sizeof color, "#%02x%02x%02x", gray, gray, gray);
      style = std::string("fill:") + color + ";stroke:black;stroke-width:1";
    }
    out << "  <rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
        << "\" height=\"" << fmt(h) << "\" style=\"" << style << "\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

namespace {

std::string polyline_svg(const std::vector<std::pair<double, double>>& pts, int width_px,
                         int height_px) {
  double ymax = 1e-9;
  for (const auto& [x, y] : pts) ymax = std::max(ymax, y);
  const double w = static_cast<double>(width_px);
  const double h = static_cast<double>(height_px);
  const double pad = 8.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_px << "\" height=\""
      << height_px << "\" viewBox=\"0 0 " << width_px << " " << height_px << "\">\n";
  out << "  <polyline style=\"fill:none;stroke:black;stroke-width:1.5\" points=\"";
  for (size_t i = 0; i < pts.size(); ++i) {
    if (i) out << ' ';
    double px = pad + pts[i].first * (w - 2 * pad);
    double py = h - pad - pts[i].second / ymax * (h - 2 * pad);
    out << fmt(px) << ',' << fmt(py);
  }
  out << "\"/>\n</svg>\n";
  return out.str();
}

}  // namespace

std::string density_curve_svg(const HmapTree& tree, int width_px, int height_px) {
  if (tree.dim() != 1)
    throw ConfigError("density curves support 1-D trees only (got p = " +
                      std::to_string(tree.dim()) + ")");
  // Staircase over leaves ordered by position.
  std::vector<const TreeNode*> leaves;
  for (const auto& node : tree.nodes())
    if (node.split_dim < 0) leaves.push_back(&node);
  std::sort(leaves.begin(), leaves.end(), [](const TreeNode* a, const TreeNode* b) {
    return a->region.lower(0) < b->region.lower(0);
  });
  std::vector<std::pair<double, double>> pts;
  for (const TreeNode* leaf : leaves) {
    double d = std::exp(leaf->log_dens);
    pts.emplace_back(leaf->region.lower(0), d);
    pts.emplace_back(leaf->region.upper(0), d);
  }
  return polyline_svg(pts, width_px, height_px);
}

std::string density_curve_svg(const FeeDensity& density, int width_px, int height_px) {
  if (density.dim() != 1)
    throw ConfigError("density curves support 1-D densities only (got p = " +
                      std::to_string(density.dim()) + ")");
  // Piecewise linear through the vertex values, ordered by position.
  const auto& tri = density.triangulation();
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < tri.vertex_count(); ++i)
    pts.emplace_back(tri.vertex(i)[0], density.coeffs()[static_cast<size_t>(i)]);
  std::sort(pts.begin(), pts.end());
  return polyline_svg(pts, width_px, height_px);
}

}  // namespace optree
