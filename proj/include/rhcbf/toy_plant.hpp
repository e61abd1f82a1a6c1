#pragma once

#include "rhcbf/hybrid.hpp"

namespace rhcbf::toy {

/// Planar single integrator dz/dt = u with a constant flow error ball and no
/// jumps: the minimal plant for filter and learning checks.
struct ToyConfig {
  double delta_c{0.05};
  double input_limit{2.0};
  double safe_radius{0.75};  // geometric safe set ||z|| < safe_radius
};

HybridSystem make_toy_system(const ToyConfig& cfg);

StatePredicate toy_safe_set(const ToyConfig& cfg);

/// Inward spiral u = A z (rotation + contraction), clipped to the box: fills
/// the safe disk with expert flow samples.
ControlPair spiral_expert(const ToyConfig& cfg);

/// Deterministic initial conditions spread over the annulus
/// r in [r_min, r_max], evenly rotated with a golden-angle offset.
std::vector<Vec> toy_initial_conditions(int n, double r_min, double r_max);

}  // namespace rhcbf::toy
