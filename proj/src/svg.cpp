#include "dgpmp/svg.hpp"

#include <cstdio>
#include <sstream>

namespace dgpmp::svg {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<Segment> iso_contour(const Sdf& sdf, double level) {
  const OccupancyGrid& g = sdf.grid();
  std::vector<Segment> out;
  auto lerp = [&](int x0, int y0, int x1, int y1) {
    const double a = sdf.at(x0, y0) - level;
    const double b = sdf.at(x1, y1) - level;
    const double t = a / (a - b);
    return Vec2(g.cell_center(x0, y0) + t * (g.cell_center(x1, y1) - g.cell_center(x0, y0)));
  };
  for (int iy = 0; iy + 1 < g.height(); ++iy) {
    for (int ix = 0; ix + 1 < g.width(); ++ix) {
      // Corners counter-clockwise from bottom-left.
      const int cx[4] = {ix, ix + 1, ix + 1, ix};
      const int cy[4] = {iy, iy, iy + 1, iy + 1};
      int mask = 0;
      for (int k = 0; k < 4; ++k)
        if (sdf.at(cx[k], cy[k]) > level) mask |= 1 << k;
      if (mask == 0 || mask == 15) continue;
      std::vector<Vec2> pts;
      for (int k = 0; k < 4; ++k) {
        const int n = (k + 1) % 4;
        if (((mask >> k) & 1) != ((mask >> n) & 1)) pts.push_back(lerp(cx[k], cy[k], cx[n], cy[n]));
      }
      if (pts.size() == 2) {
        out.push_back({pts[0], pts[1]});
      } else if (pts.size() == 4) {
        // Saddle: pair crossings by the sign of the cell average.
        double avg = 0.0;
        for (int k = 0; k < 4; ++k) avg += sdf.at(cx[k], cy[k]);
        const bool center_above = avg / 4.0 > level;
        const bool corner0_above = mask & 1;
        if (center_above == corner0_above) {
          out.push_back({pts[0], pts[1]});
          out.push_back({pts[2], pts[3]});
        } else {
          out.push_back({pts[3], pts[0]});
          out.push_back({pts[1], pts[2]});
        }
      }
    }
  }
  return out;
}

std::string render(const PlanFigure& fig) {
  if (!fig.sdf) throw InvalidArgument("figure needs an SDF");
  const OccupancyGrid& g = fig.sdf->grid();
  const double res = g.resolution();
  const Vec2 lo = g.origin() - Vec2::Constant(res / 2);
  const double w_m = res * g.width();
  const double h_m = res * g.height();
  const double scale = fig.width_px / w_m;
  const double h_px = h_m * scale;
  auto px = [&](const Vec2& p) { return fmt((p.x() - lo.x()) * scale); };
  auto py = [&](const Vec2& p) { return fmt(h_px - (p.y() - lo.y()) * scale); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fig.width_px << "\" height=\""
     << fmt(h_px) << "\" viewBox=\"0 0 " << fig.width_px << ' ' << fmt(h_px) << "\">\n";
  if (!fig.title.empty()) os << "<title>" << escape(fig.title) << "</title>\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  os << "<g fill=\"#808080\" stroke=\"none\">\n";
  for (int iy = 0; iy < g.height(); ++iy) {
    int ix = 0;
    while (ix < g.width()) {
      if (!g.occupied(ix, iy)) {
        ++ix;
        continue;
      }
      int end = ix;
      while (end < g.width() && g.occupied(end, iy)) ++end;
      const Vec2 corner = lo + res * Vec2(ix, iy + 1);
      os << "<rect x=\"" << px(corner) << "\" y=\"" << py(corner) << "\" width=\""
         << fmt((end - ix) * res * scale) << "\" height=\"" << fmt(res * scale) << "\"/>\n";
      ix = end;
    }
  }
  os << "</g>\n";

  os << "<g stroke=\"#404040\" stroke-width=\"1\" fill=\"none\">\n";
  for (const auto& s : iso_contour(*fig.sdf, fig.contour_level))
    os << "<line x1=\"" << px(s.a) << "\" y1=\"" << py(s.a) << "\" x2=\"" << px(s.b)
       << "\" y2=\"" << py(s.b) << "\"/>\n";
  os << "</g>\n";

  auto polyline = [&](const Trajectory& t, const char* style) {
    os << "<polyline fill=\"none\" " << style << " points=\"";
    for (int i = 0; i < t.size(); ++i) os << (i ? " " : "") << px(t.position(i)) << ',' << py(t.position(i));
    os << "\"/>\n";
  };
  for (const auto& t : fig.initializations)
    polyline(t, "stroke=\"red\" stroke-width=\"2\" stroke-dasharray=\"6,4\"");
  for (const auto& t : fig.solutions) {
    polyline(t, "stroke=\"blue\" stroke-width=\"2\"");
    if (fig.robot_radius > 0.0)
      for (int i = 0; i < t.size(); ++i)
        os << "<circle cx=\"" << px(t.position(i)) << "\" cy=\"" << py(t.position(i))
           << "\" r=\"" << fmt(fig.robot_radius * scale)
           << "\" fill=\"none\" stroke=\"blue\" stroke-opacity=\"0.25\"/>\n";
  }
  const double marker = std::max(4.0, fig.robot_radius * scale);
  os << "<circle cx=\"" << px(fig.start) << "\" cy=\"" << py(fig.start) << "\" r=\"" << fmt(marker)
     << "\" fill=\"green\"/>\n";
  os << "<circle cx=\"" << px(fig.goal) << "\" cy=\"" << py(fig.goal) << "\" r=\"" << fmt(marker)
     << "\" fill=\"cyan\"/>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace dgpmp::svg
