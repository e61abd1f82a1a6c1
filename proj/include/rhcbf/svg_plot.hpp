#pragma once

#include <functional>
#include <string>
#include <vector>

namespace rhcbf::plot {

struct Segment {
  double x0{0.0}, y0{0.0}, x1{0.0}, y1{0.0};
};

/// Zero-level-set segments of f over [x_min,x_max] x [y_min,y_max] by marching
/// squares on a res x res cell grid with linear edge interpolation.
std::vector<Segment> marching_squares(
    const std::function<double(double, double)>& f, double x_min, double x_max,
    double y_min, double y_max, int res);

struct ScatterPoint {
  double x{0.0}, y{0.0};
  double value{0.0};
};

/// Scatter plot colored by value (blue -> red over [0, value_max]) with an
/// optional contour polyline overlay. Deterministic byte output.
void write_scatter_svg(const std::string& path,
                       const std::vector<ScatterPoint>& points,
                       const std::vector<Segment>& contour, double value_max,
                       double x_min, double x_max, double y_min, double y_max,
                       const std::string& title);

}  // namespace rhcbf::plot
