#include "rhcbf/toy_plant.hpp"

#include <cmath>

namespace rhcbf::toy {

HybridSystem make_toy_system(const ToyConfig& cfg) {
  HybridSystem sys;
  sys.n_z = 2;
  sys.m_c = 2;
  sys.m_d = 0;
  sys.flow_set = [](const Vec&) { return true; };
  sys.jump_set = [](const Vec&) { return false; };
  sys.guard = [](const Vec&) { return 1.0; };
  sys.est_flow = [](const Vec&, double, const Vec& u) { return u; };
  sys.est_jump = [](const Vec& z, double, const Vec&) { return z; };
  sys.err_flow = [d = cfg.delta_c](const Vec&, double, const Vec&) { return d; };
  sys.err_jump = [](const Vec&, double, const Vec&) { return 0.0; };
  sys.input_box_c = InputBox(Vec::Constant(2, -cfg.input_limit),
                             Vec::Constant(2, cfg.input_limit));
  return sys;
}

StatePredicate toy_safe_set(const ToyConfig& cfg) {
  const double r = cfg.safe_radius;
  return [r](const Vec& z) { return z.norm() < r; };
}

ControlPair spiral_expert(const ToyConfig& cfg) {
  Mat A(2, 2);
  A << -0.6, -1.2, 1.2, -0.6;
  const InputBox box(Vec::Constant(2, -cfg.input_limit),
                     Vec::Constant(2, cfg.input_limit));
  ControlPair pair;
  pair.flow_law = [A, box](const Vec& z, double) { return box.clamp(A * z); };
  return pair;
}

std::vector<Vec> toy_initial_conditions(int n, double r_min, double r_max) {
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  std::vector<Vec> ics;
  ics.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double frac = (n > 1) ? static_cast<double>(i) / (n - 1) : 0.0;
    // Area-uniform radii: equal point density per unit area of the annulus.
    const double r =
        std::sqrt(r_min * r_min + frac * (r_max * r_max - r_min * r_min));
    const double ang = golden * i;
    Vec z(2);
    z << r * std::cos(ang), r * std::sin(ang);
    ics.push_back(z);
  }
  return ics;
}

}  // namespace rhcbf::toy
