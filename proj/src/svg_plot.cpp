#include "rhcbf/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rhcbf::plot {

namespace {

double lerp_zero(double a, double b) {
  // Parameter in [0,1] where the sign change of the linear interpolant sits.
  const double denom = a - b;
  if (std::abs(denom) < 1e-300) return 0.5;
  return std::clamp(a / denom, 0.0, 1.0);
}

}  // namespace

std::vector<Segment> marching_squares(
    const std::function<double(double, double)>& f, double x_min, double x_max,
    double y_min, double y_max, int res) {
  if (res < 1) throw std::invalid_argument("marching_squares: res < 1");
  const double dx = (x_max - x_min) / res;
  const double dy = (y_max - y_min) / res;

  std::vector<double> vals((res + 1) * (res + 1));
  for (int iy = 0; iy <= res; ++iy)
    for (int ix = 0; ix <= res; ++ix)
      vals[iy * (res + 1) + ix] = f(x_min + ix * dx, y_min + iy * dy);

  std::vector<Segment> segs;
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      // Corner order: 0=(ix,iy) 1=(ix+1,iy) 2=(ix+1,iy+1) 3=(ix,iy+1).
      const double v0 = vals[iy * (res + 1) + ix];
      const double v1 = vals[iy * (res + 1) + ix + 1];
      const double v2 = vals[(iy + 1) * (res + 1) + ix + 1];
      const double v3 = vals[(iy + 1) * (res + 1) + ix];
      const double x0 = x_min + ix * dx, y0 = y_min + iy * dy;

      int pattern = 0;
      if (v0 >= 0.0) pattern |= 1;
      if (v1 >= 0.0) pattern |= 2;
      if (v2 >= 0.0) pattern |= 4;
      if (v3 >= 0.0) pattern |= 8;
      if (pattern == 0 || pattern == 15) continue;

      // Edge midpoints with linear interpolation. Edges: bottom(0-1),
      // right(1-2), top(3-2), left(0-3).
      auto edge = [&](int e) -> std::pair<double, double> {
        switch (e) {
          case 0: return {x0 + lerp_zero(v0, v1) * dx, y0};
          case 1: return {x0 + dx, y0 + lerp_zero(v1, v2) * dy};
          case 2: return {x0 + lerp_zero(v3, v2) * dx, y0 + dy};
          default: return {x0, y0 + lerp_zero(v0, v3) * dy};
        }
      };
      auto emit = [&](int e1, int e2) {
        const auto [ax, ay] = edge(e1);
        const auto [bx, by] = edge(e2);
        segs.push_back({ax, ay, bx, by});
      };
      switch (pattern) {
        case 1: case 14: emit(3, 0); break;
        case 2: case 13: emit(0, 1); break;
        case 3: case 12: emit(3, 1); break;
        case 4: case 11: emit(1, 2); break;
        case 6: case 9: emit(0, 2); break;
        case 7: case 8: emit(3, 2); break;
        case 5:
          emit(3, 0);
          emit(1, 2);
          break;
        case 10:
          emit(0, 1);
          emit(3, 2);
          break;
        default: break;
      }
    }
  }
  return segs;
}

namespace {

std::string color_for(double value, double value_max) {
  const double t = (value_max > 0.0) ? std::clamp(value / value_max, 0.0, 1.0) : 0.0;
  const int r = static_cast<int>(std::lround(40 + 200 * t));
  const int g = static_cast<int>(std::lround(40 + 60 * t));
  const int b = static_cast<int>(std::lround(220 - 180 * t));
  std::ostringstream os;
  os << "rgb(" << r << ',' << g << ',' << b << ')';
  return os.str();
}

}  // namespace

void write_scatter_svg(const std::string& path,
                       const std::vector<ScatterPoint>& points,
                       const std::vector<Segment>& contour, double value_max,
                       double x_min, double x_max, double y_min, double y_max,
                       const std::string& title) {
  const double W = 640.0, H = 640.0, margin = 50.0;
  const double sx = (W - 2 * margin) / std::max(x_max - x_min, 1e-12);
  const double sy = (H - 2 * margin) / std::max(y_max - y_min, 1e-12);
  auto px = [&](double x) { return margin + (x - x_min) * sx; };
  auto py = [&](double y) { return H - margin - (y - y_min) * sy; };

  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (int)W
     << "\" height=\"" << (int)H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"16\">"
     << title << "</text>\n";
  os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\""
     << W - 2 * margin << "\" height=\"" << H - 2 * margin
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (const auto& p : points)
    os << "<circle cx=\"" << px(p.x) << "\" cy=\"" << py(p.y)
       << "\" r=\"4\" fill=\"" << color_for(p.value, value_max) << "\"/>\n";
  for (const auto& s : contour)
    os << "<line x1=\"" << px(s.x0) << "\" y1=\"" << py(s.y0) << "\" x2=\""
       << px(s.x1) << "\" y2=\"" << py(s.y1)
       << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  os << "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_scatter_svg: cannot open " + path);
  out << os.str();
}

}  // namespace rhcbf::plot
