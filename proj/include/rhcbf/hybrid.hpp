#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rhcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Hybrid time (t, j): continuous time plus jump counter.
struct HybridTime {
  double t{0.0};
  int j{0};
};

struct HybridState {
  Vec z;
  HybridTime time;
};

/// Componentwise box constraint on control inputs. A zero-dimensional box
/// stands for an unactuated channel.
struct InputBox {
  Vec lower;
  Vec upper;

  InputBox() = default;
  InputBox(Vec lo, Vec hi);
  static InputBox unbounded(int dim);
  static InputBox empty() { return InputBox(); }

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vec& u, double tol = 1e-12) const;
  Vec clamp(const Vec& u) const;
};

using StatePredicate = std::function<bool(const Vec&)>;
using GuardFn = std::function<double(const Vec&)>;
// (z, t, u) -> value. Used for estimated and ground-truth dynamics alike.
using DynamicsFn = std::function<Vec(const Vec&, double, const Vec&)>;
// (z, t, u) -> error-ball radius.
using ErrorFn = std::function<double(const Vec&, double, const Vec&)>;
using ControlLaw = std::function<Vec(const Vec&, double)>;

/// Uncertain hybrid control system: flow/jump sets, estimated dynamics with
/// error bounds, and optional ground truth for simulation. Immutable after
/// construction; safe to share across threads.
struct HybridSystem {
  int n_z{0};
  int m_c{0};
  int m_d{0};

  StatePredicate flow_set;
  StatePredicate jump_set;
  // Zero-crossing from positive to non-positive signals entry into D.
  GuardFn guard;

  DynamicsFn est_flow;
  DynamicsFn est_jump;
  ErrorFn err_flow;
  ErrorFn err_jump;

  InputBox input_box_c;
  InputBox input_box_d;

  // Optional ground truth; when absent simulation draws from the admissible
  // set around the estimate.
  DynamicsFn truth_flow;
  DynamicsFn truth_jump;

  bool in_domain(const Vec& z) const { return flow_set(z) || jump_set(z); }
};

enum class FlowExit { guard_hit, t_max, left_flow_set, stopped };

struct FlowSegment {
  int j{0};
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs;  // applied flow input at each sample
  FlowExit exit{FlowExit::t_max};
};

struct JumpRecord {
  double t{0.0};
  Vec z_before;
  Vec z_after;
};

enum class Termination { horizon_reached, left_domain, zeno_suspected, fell };

struct HybridArc {
  std::vector<FlowSegment> segments;
  std::vector<JumpRecord> jumps;
  Termination termination{Termination::horizon_reached};
  HybridTime end_time;

  const Vec& final_state() const;
};

/// Realized flow field handed to the integrator. `on_step` (optional) is
/// invoked once at the beginning of every integrator step, before the RK4
/// stage evaluations; disturbance redraws hook in here.
struct FlowField {
  DynamicsFn eval;
  std::function<void(const Vec&, double)> on_step;
};

struct IntegrateOptions {
  double guard_tol{1e-8};
  int max_bisections{60};
  StatePredicate stop;  // optional early-out (e.g. fall detection)
};

/// Fixed-step RK4 over the flow set with guard sign-change detection and
/// bisection refinement of the event time.
FlowSegment integrate_flow(const HybridSystem& sys, const Vec& z0, double t0,
                           int j, const ControlLaw& control,
                           const FlowField& dyn, double t_max, double step,
                           const IntegrateOptions& opt = {});

/// z+ = dyn(z, t, u_d). Throws if z is not in the jump set.
Vec apply_jump(const HybridSystem& sys, const Vec& z, double t, const Vec& u_d,
               const DynamicsFn& dyn);

enum class DisturbanceMode { none, uniform_ball, worst_case_surface };

/// Realization policy for the admissible dynamics ball around the estimate.
/// worst_case_surface picks the ball-surface point most aligned against the
/// supplied barrier gradient.
struct DisturbancePolicy {
  DisturbanceMode mode{DisturbanceMode::none};
  std::uint64_t seed{0};
  std::function<Vec(const Vec&)> barrier_grad;  // for worst_case_surface
  // How long a uniform_ball draw persists before it is redrawn. Zero means
  // one integrator step, which makes the realized disturbance zero-mean
  // high-frequency noise whose integrated effect vanishes as the step
  // shrinks; a positive hold models persistent model error within the ball.
  double hold_time{0.0};
};

enum class DynKind { flow, jump };

/// Uniform draw from the closed admissible ball around the estimate.
Vec sample_admissible(const HybridSystem& sys, const Vec& z, double t,
                      const Vec& u, DynKind which, std::mt19937_64& rng);

/// Direction-uniform point in the closed unit ball (radius ~ U^{1/n}).
Vec uniform_ball(int dim, std::mt19937_64& rng);

struct Horizon {
  double T{1.0};
  int J{1000};
};

struct SimulateOptions {
  double step{1e-3};
  int max_jumps_per_instant{25};
  StatePredicate fall_predicate;  // optional plant-specific fall flag
  IntegrateOptions integrate;
};

struct ControlPair {
  ControlLaw flow_law;
  ControlLaw jump_law;  // may be null when m_d == 0
};

/// Alternates integrate_flow / apply_jump until the horizon is reached, the
/// state leaves C ∪ D, a fall is detected, or Zeno behavior is suspected.
HybridArc simulate(const HybridSystem& sys, const Vec& z0,
                   const ControlPair& controls,
                   const DisturbancePolicy& disturbance, const Horizon& horizon,
                   const SimulateOptions& opt = {});

/// CSV columns: t, j, z_1..z_n, u_1..u_m, segment_id. Jump records and the
/// termination reason go to a JSON sidecar.
void write_arc_csv(const HybridArc& arc, const std::string& path);
void write_arc_sidecar(const HybridArc& arc, const std::string& path);

std::string to_string(Termination term);

}  // namespace rhcbf
