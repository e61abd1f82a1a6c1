#pragma once

#include "rhcbf/hybrid.hpp"

namespace rhcbf::compass_gait {

/// Planar compass-gait biped on a constant slope. Angles are measured from
/// the world vertical, positive counter-clockwise; the walker travels in the
/// -x direction, downhill along the ramp y = x * tan(slope).
struct WalkerParams {
  double m{5.0};      // leg mass [kg]
  double m_H{10.0};   // hip mass [kg]
  double a{0.5};      // foot to leg CoM [m]
  double b{0.5};      // leg CoM to hip [m]
  double slope{0.0525};  // ramp angle [rad]
  double gravity{9.81};

  double leg_length() const { return a + b; }
  void validate() const;
};

/// State layout z = [theta_stance, theta_swing, dtheta_stance, dtheta_swing].
struct WalkerState {
  double theta_stance{0.0};
  double theta_swing{0.0};
  double dtheta_stance{0.0};
  double dtheta_swing{0.0};

  static WalkerState from_vec(const Vec& z);
  Vec to_vec() const;
};

// Manipulator matrices of the swing phase, in generalized coordinates
// q = [theta_stance, theta_swing]:
//   M(q) qdd + C(q, qd) qd + G(q) = S u,  u = [u_ankle, u_hip].
Mat mass_matrix(const WalkerParams& p, const Vec& z);
Vec coriolis_times_qd(const WalkerParams& p, const Vec& z);
Vec gravity_vector(const WalkerParams& p, const Vec& z);
Mat actuation_matrix();

/// Control-affine swing dynamics zdot = f(z) + g(z) u.
Vec walker_flow(const WalkerParams& p, const Vec& z, const Vec& u);

/// Total mechanical energy (potential zero at the stance contact).
double mechanical_energy(const WalkerParams& p, const Vec& z);

/// Swing-foot height above the ramp surface (signed).
double touchdown_guard(const WalkerParams& p, const Vec& z);

/// Plastic impact at touchdown: angular momentum of the full system is
/// conserved about the new contact point and that of the trailing leg about
/// the hip; legs are relabeled (stance <-> swing). Unactuated.
Vec impact_map(const WalkerParams& p, const Vec& z);

struct ExpertGains {
  double k_energy{1.0};
  double e_ref{0.0};  // target mechanical energy; 0 means "compute from the
                      // passive limit cycle" via reference_energy()
};

/// Energy-shaping expert: u = -k (E - E_ref) S^T qdot, clipped to the box.
Vec energy_expert(const WalkerParams& p, const ExpertGains& gains, const Vec& z,
                  const InputBox& box);

/// Mean mechanical energy over one late step of the passive limit cycle.
double reference_energy(const WalkerParams& p);

/// Passive limit-cycle initial condition used throughout the experiments.
Vec limit_cycle_ic();

/// Stance fixed at (0, 0.4); swing on an n_grid x n_grid grid centered at
/// (0, -2.0) with the given halfwidths in angle and rate.
std::vector<Vec> paper_initial_conditions(int n_grid, double angle_halfwidth,
                                          double rate_halfwidth);

struct WalkerConfig {
  WalkerParams params;
  ExpertGains expert;
  double input_limit{15.0};       // symmetric torque box [N m]
  double flow_noise{0.0};         // Delta_c for the flow error bound
  double scissor_threshold{0.05}; // min leg spread for a valid touchdown
  double jump_height_tol{1e-6};
  double fall_angle{1.5707963267948966};  // pi/2
  double fall_hip_height_frac{0.3};

  // When est_params differ from params, the estimate uses est_params while
  // ground truth (if enabled) uses params; hip-mass uncertainty plugs in here.
  WalkerParams est_params;
  bool use_truth{false};
  WalkerConfig() { est_params = params; }
};

bool fell(const WalkerConfig& cfg, const Vec& z);

/// Wires the walker into the generic hybrid-system interface. The jump is
/// unactuated (m_d = 0) and its error bound is identically zero.
HybridSystem make_walker_system(const WalkerConfig& cfg);

/// Number of impact events before termination or fall, capped at max_steps.
int count_steps(const HybridArc& arc, int max_steps = 20);

}  // namespace rhcbf::compass_gait
