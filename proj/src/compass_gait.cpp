// Compass-gait walker on a slope.
//
// Swing-phase dynamics are the two-link manipulator equations obtained from
// the Lagrangian of the point masses (leg CoMs at distance a from the feet,
// hip mass at the joint), with the stance foot pinned. In generalized
// coordinates q = [theta_stance, theta_swing] (angles from the vertical,
// positive CCW, travel in -x):
//
//   M(q) = [ (m_H + m) l^2 + m a^2   -m l b cos(ts - tw) ]
//          [ -m l b cos(ts - tw)      m b^2              ]
//   C(q,qd) qd = [ -m l b sin(ts - tw) * tw_d^2 ]
//                [  m l b sin(ts - tw) * ts_d^2 ]
//   G(q) = [ -(m a + (m_H + m) l) g sin(ts) ]
//          [  m b g sin(tw)                 ]
//
// Actuation: ankle torque on the stance leg and hip torque between the legs,
//   S = [ 1  -1 ]
//       [ 0   1 ].
//
// The impact is plastic: angular momentum of the whole walker about the new
// contact point and of the trailing leg about the hip are conserved, then the
// legs are relabeled. Both momenta are linear in the angular rates, so the
// transition solves a 2x2 system assembled from the mass geometry.

#include "rhcbf/compass_gait.hpp"

#include <cmath>
#include <stdexcept>

namespace rhcbf::compass_gait {

void WalkerParams::validate() const {
  if (m <= 0 || m_H <= 0 || a <= 0 || b <= 0 || gravity <= 0)
    throw std::invalid_argument("WalkerParams: masses/lengths must be positive");
  if (std::abs(slope) >= M_PI / 2)
    throw std::invalid_argument("WalkerParams: |slope| must be < pi/2");
}

WalkerState WalkerState::from_vec(const Vec& z) {
  if (z.size() != 4) throw std::invalid_argument("WalkerState: dim != 4");
  return {z[0], z[1], z[2], z[3]};
}

Vec WalkerState::to_vec() const {
  Vec z(4);
  z << theta_stance, theta_swing, dtheta_stance, dtheta_swing;
  return z;
}

Mat mass_matrix(const WalkerParams& p, const Vec& z) {
  const double l = p.leg_length();
  const double c = std::cos(z[0] - z[1]);
  Mat M(2, 2);
  M(0, 0) = (p.m_H + p.m) * l * l + p.m * p.a * p.a;
  M(0, 1) = -p.m * l * p.b * c;
  M(1, 0) = M(0, 1);
  M(1, 1) = p.m * p.b * p.b;
  return M;
}

Vec coriolis_times_qd(const WalkerParams& p, const Vec& z) {
  const double l = p.leg_length();
  const double s = std::sin(z[0] - z[1]);
  Vec bias(2);
  bias[0] = -p.m * l * p.b * s * z[3] * z[3];
  bias[1] = p.m * l * p.b * s * z[2] * z[2];
  return bias;
}

Vec gravity_vector(const WalkerParams& p, const Vec& z) {
  const double l = p.leg_length();
  Vec G(2);
  G[0] = -(p.m * p.a + (p.m_H + p.m) * l) * p.gravity * std::sin(z[0]);
  G[1] = p.m * p.b * p.gravity * std::sin(z[1]);
  return G;
}

Mat actuation_matrix() {
  Mat S(2, 2);
  S << 1.0, -1.0, 0.0, 1.0;
  return S;
}

Vec walker_flow(const WalkerParams& p, const Vec& z, const Vec& u) {
  const Mat M = mass_matrix(p, z);
  if (std::abs(M.determinant()) < 1e-12)
    throw std::runtime_error("walker_flow: singular mass matrix");
  Vec tau = Vec::Zero(2);
  if (u.size() == 2) tau = actuation_matrix() * u;
  const Vec qdd = M.ldlt().solve(tau - coriolis_times_qd(p, z) - gravity_vector(p, z));
  Vec dz(4);
  dz << z[2], z[3], qdd[0], qdd[1];
  return dz;
}

double mechanical_energy(const WalkerParams& p, const Vec& z) {
  const double l = p.leg_length();
  const Mat M = mass_matrix(p, z);
  const Eigen::Vector2d qd(z[2], z[3]);
  const double T = 0.5 * qd.dot(M * qd);
  const double V = p.gravity * ((p.m * p.a + (p.m_H + p.m) * l) * std::cos(z[0]) -
                                p.m * p.b * std::cos(z[1]));
  return T + V;
}

double touchdown_guard(const WalkerParams& p, const Vec& z) {
  const double l = p.leg_length();
  return l * (std::cos(z[0] - p.slope) - std::cos(z[1] - p.slope));
}

namespace {

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Leg direction from foot to hip and its angular-rate derivative.
inline Eigen::Vector2d leg_up(double th) { return {-std::sin(th), std::cos(th)}; }
inline Eigen::Vector2d leg_up_dot(double th) { return {-std::cos(th), -std::sin(th)}; }

// Columns map [dtheta_stance; dtheta_swing] to [L_total about `about`;
// L_of_leg `leg` about the hip], in a frame pinned at the stance foot.
Mat momentum_matrix(const WalkerParams& p, double ts, double tw,
                    const Eigen::Vector2d& about, bool hip_leg_is_stance) {
  const double l = p.leg_length();
  const Eigen::Vector2d hip = l * leg_up(ts);
  const Eigen::Vector2d r_st = p.a * leg_up(ts);
  const Eigen::Vector2d r_sw = hip - p.b * leg_up(tw);

  Mat A(2, 2);
  for (int col = 0; col < 2; ++col) {
    const double ds = (col == 0) ? 1.0 : 0.0;
    const double dw = (col == 0) ? 0.0 : 1.0;
    const Eigen::Vector2d v_st = p.a * ds * leg_up_dot(ts);
    const Eigen::Vector2d v_hip = l * ds * leg_up_dot(ts);
    const Eigen::Vector2d v_sw = v_hip - p.b * dw * leg_up_dot(tw);
    A(0, col) = p.m * cross2(r_st - about, v_st) +
                p.m_H * cross2(hip - about, v_hip) +
                p.m * cross2(r_sw - about, v_sw);
    if (hip_leg_is_stance)
      A(1, col) = p.m * cross2(r_st - hip, v_st);
    else
      A(1, col) = p.m * cross2(r_sw - hip, v_sw);
  }
  return A;
}

}  // namespace

Vec impact_map(const WalkerParams& p, const Vec& z) {
  const double l = p.leg_length();
  const double ts = z[0], tw = z[1];
  // New contact point in the pre-impact frame.
  const Eigen::Vector2d P = l * leg_up(ts) - l * leg_up(tw);

  const Mat Q_minus = momentum_matrix(p, ts, tw, P, /*hip_leg_is_stance=*/true);
  // Post-impact: roles swap, pivot moves to P (origin of the post frame).
  const Mat Q_plus =
      momentum_matrix(p, tw, ts, Eigen::Vector2d::Zero(), /*hip_leg_is_stance=*/false);
  if (std::abs(Q_plus.determinant()) < 1e-12)
    throw std::runtime_error("impact_map: singular post-impact momentum matrix");

  const Eigen::Vector2d qd_minus(z[2], z[3]);
  const Eigen::Vector2d qd_plus = Q_plus.partialPivLu().solve(Q_minus * qd_minus);

  Vec zp(4);
  zp << tw, ts, qd_plus[0], qd_plus[1];
  return zp;
}

Vec energy_expert(const WalkerParams& p, const ExpertGains& gains, const Vec& z,
                  const InputBox& box) {
  const double dE = mechanical_energy(p, z) - gains.e_ref;
  const Eigen::Vector2d qd(z[2], z[3]);
  const Eigen::Vector2d stu = actuation_matrix().transpose() * qd;
  Vec u(2);
  u << -gains.k_energy * dE * stu[0], -gains.k_energy * dE * stu[1];
  return box.clamp(u);
}

Vec limit_cycle_ic() {
  Vec z(4);
  z << 0.0, 0.0, 0.4, -2.0;
  return z;
}

double reference_energy(const WalkerParams& p) {
  WalkerConfig cfg;
  cfg.params = p;
  cfg.est_params = p;
  cfg.use_truth = true;
  const HybridSystem sys = make_walker_system(cfg);
  ControlPair passive;
  passive.flow_law = [](const Vec&, double) { return Vec::Zero(2); };
  SimulateOptions opt;
  opt.fall_predicate = [&cfg](const Vec& z) { return fell(cfg, z); };
  const HybridArc arc = simulate(sys, limit_cycle_ic(), passive, {}, {10.0, 100}, opt);
  if (arc.segments.size() < 2)
    throw std::runtime_error("reference_energy: passive walker did not step");
  // Average over the last full step (between the last two impacts).
  const FlowSegment& seg = arc.segments[arc.segments.size() - 1];
  double sum = 0.0;
  for (const Vec& z : seg.states) sum += mechanical_energy(p, z);
  return sum / static_cast<double>(seg.states.size());
}

std::vector<Vec> paper_initial_conditions(int n_grid, double angle_halfwidth,
                                          double rate_halfwidth) {
  if (n_grid < 1) throw std::invalid_argument("paper_initial_conditions: n_grid < 1");
  std::vector<Vec> ics;
  ics.reserve(static_cast<std::size_t>(n_grid) * n_grid);
  for (int i = 0; i < n_grid; ++i) {
    for (int k = 0; k < n_grid; ++k) {
      const double fa = (n_grid == 1) ? 0.0 : (2.0 * i / (n_grid - 1.0) - 1.0);
      const double fr = (n_grid == 1) ? 0.0 : (2.0 * k / (n_grid - 1.0) - 1.0);
      Vec z(4);
      z << 0.0, 0.0 + fa * angle_halfwidth, 0.4, -2.0 + fr * rate_halfwidth;
      ics.push_back(z);
    }
  }
  return ics;
}

bool fell(const WalkerConfig& cfg, const Vec& z) {
  if (std::abs(z[0]) > cfg.fall_angle || std::abs(z[1]) > cfg.fall_angle)
    return true;
  const double l = cfg.params.leg_length();
  const double hip_height = l * std::cos(z[0] - cfg.params.slope);
  return hip_height < cfg.fall_hip_height_frac * l;
}

HybridSystem make_walker_system(const WalkerConfig& cfg) {
  cfg.params.validate();
  cfg.est_params.validate();
  HybridSystem sys;
  sys.n_z = 4;
  sys.m_c = 2;
  sys.m_d = 0;

  const WalkerParams truth = cfg.params;
  const WalkerParams est = cfg.est_params;
  const double scissor = cfg.scissor_threshold;
  const double htol = cfg.jump_height_tol;
  const double noise = cfg.flow_noise;

  sys.flow_set = [](const Vec& z) { return z.allFinite(); };
  sys.jump_set = [truth, scissor, htol](const Vec& z) {
    if (z[0] - z[1] <= scissor) return false;
    return std::abs(touchdown_guard(truth, z)) <= htol;
  };
  sys.guard = [truth, scissor](const Vec& z) {
    if (z[0] - z[1] <= scissor) return 1.0;
    return touchdown_guard(truth, z);
  };
  sys.est_flow = [est](const Vec& z, double, const Vec& u) {
    return walker_flow(est, z, u);
  };
  sys.est_jump = [est](const Vec& z, double, const Vec&) {
    return impact_map(est, z);
  };
  sys.err_flow = [noise](const Vec&, double, const Vec&) { return noise; };
  sys.err_jump = [](const Vec&, double, const Vec&) { return 0.0; };
  sys.input_box_c = InputBox(Vec::Constant(2, -cfg.input_limit),
                             Vec::Constant(2, cfg.input_limit));
  sys.input_box_d = InputBox::empty();

  if (cfg.use_truth) {
    sys.truth_flow = [truth](const Vec& z, double, const Vec& u) {
      return walker_flow(truth, z, u);
    };
    sys.truth_jump = [truth](const Vec& z, double, const Vec&) {
      return impact_map(truth, z);
    };
  }
  return sys;
}

int count_steps(const HybridArc& arc, int max_steps) {
  return std::min(static_cast<int>(arc.jumps.size()), max_steps);
}

}  // namespace rhcbf::compass_gait
