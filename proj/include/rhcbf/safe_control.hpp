#pragma once

#include "rhcbf/barrier_net.hpp"
#include "rhcbf/train.hpp"

namespace rhcbf {

/// Barrier candidate as value + gradient callables, so the runtime filter
/// works identically for a trained network and an analytic h.
struct BarrierFn {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;

  static BarrierFn from_net(const BarrierNet& net);
  static BarrierFn analytic(std::function<double(const Vec&)> value,
                            std::function<Vec(const Vec&)> grad);
};

struct FilterResult {
  Vec u_applied;
  double constraint_slack{0.0};  // robust flow/jump expression at u_applied
  bool feasible{false};
  bool modified{false};
};

/// Min-norm safety filter over the robust flow constraint. The estimated flow
/// must be control affine (probed at construction) and the flow error bound
/// must not depend on u (rejected at construction otherwise), so the
/// constraint reduces to a single halfspace a.u >= b with
///   a = g_hat(z,t)^T grad h,  b = -kappa h - <grad h, f_hat> + ||grad h|| Delta_c.
class FlowFilter {
 public:
  FlowFilter(BarrierFn barrier, const HybridSystem& sys, double kappa);

  /// argmin ||u - u_nom||^2 s.t. a.u >= b and box bounds. If the halfspace
  /// misses the box entirely, returns the box point maximizing a.u with
  /// feasible = false.
  FilterResult operator()(const Vec& z, double t, const Vec& u_nom) const;

  double kappa() const { return kappa_; }

 private:
  BarrierFn barrier_;
  const HybridSystem& sys_;
  double kappa_;
};

/// Selects the candidate jump input maximizing the robust post-jump margin
/// h(est_jump) - lip_bar * Delta_d; feasible when the best candidate is >= 0.
/// Throws on an empty candidate list.
FilterResult jump_filter(const BarrierFn& barrier, const HybridSystem& sys,
                         const Vec& z, double t,
                         const std::vector<Vec>& candidates, double lip_bar);

struct ViolationLog {
  struct Row {
    double t{0.0};
    int j{0};
    double h{0.0};
    double slack{0.0};
    bool modified{false};
  };
  std::vector<Row> rows;
  double min_h{0.0};
  std::vector<Row> negative_events;  // rows with h < 0

  void write_csv(const std::string& path) const;
};

struct ClosedLoopResult {
  HybridArc arc;
  ViolationLog log;
};

/// Simulates the system with the flow filter wrapping the nominal law (and
/// jump_filter selecting among the nominal jump input). Requires h(z0) >= 0.
/// The log is reconstructed over the stored arc samples.
ClosedLoopResult closed_loop(const BarrierFn& barrier, const HybridSystem& sys,
                             const ControlPair& nominal, const Vec& z0,
                             const DisturbancePolicy& disturbance,
                             const Horizon& horizon, double kappa,
                             double lip_bar, const SimulateOptions& opt = {});

}  // namespace rhcbf
