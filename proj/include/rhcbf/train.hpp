#pragma once

#include "rhcbf/barrier_net.hpp"
#include "rhcbf/datasets.hpp"
#include "rhcbf/hybrid.hpp"

namespace rhcbf {

struct Hyperparams {
  double gamma_safe{0.1};
  double gamma_unsafe{0.1};
  double gamma_dyn_c{0.05};
  double gamma_dyn_d{0.05};
  double lip_bar{10.0};
  double alpha_gain{1.0};    // kappa in alpha(s) = kappa * s
  double weight_decay{1e-4}; // mu
  int epochs{30000};
  double eta{0.005};
  double beta{0.05};
  /// Extra hinge tightening: the optimizer treats a constraint as active while
  /// its residual exceeds -margin, so training pushes each constraint `margin`
  /// past its threshold. Reported violation fractions stay at the nominal
  /// thresholds.
  double margin{0.0};
  std::uint64_t seed{0};
  int num_threads{1};

  void validate() const;
};

/// Per-sample non-negative multipliers, initialized to all ones.
struct DualVars {
  Vec safe;
  Vec unsafe;
  Vec dyn_c;
  Vec dyn_d;

  static DualVars ones(int n_safe, int n_unsafe, int n_dyn_c, int n_dyn_d);
  bool nonnegative() const;
};

/// View of the bundle used by the Lagrangian: safe states (possibly thinned),
/// ring states, and the dynamics samples.
struct TrainingData {
  std::vector<Vec> safe_points;
  std::vector<Vec> ring_points;
  std::vector<FlowSample> flow;
  std::vector<JumpSample> jump;

  static TrainingData from_bundle(const DatasetBundle& bundle,
                                  double thin_standoff = 0.0);
};

/// Robust flow margin:
///   q_c = <grad h, West_c(z,t,u)> - ||grad h|| Delta_c + kappa h.
double q_c(const BarrierNet& net, const HybridSystem& sys, const Vec& z,
           const Vec& u_c, double t, double kappa);

/// Robust post-jump margin: q_d = h(West_d(z,t,u)) - Lip_bar * Delta_d.
double q_d(const BarrierNet& net, const HybridSystem& sys, const Vec& z,
           const Vec& u_d, double t, double lip_bar);

struct Residuals {
  Vec safe;    // gamma_safe - h(z_i)
  Vec unsafe;  // h(z_i) + gamma_unsafe
  Vec dyn_c;   // gamma_dyn_c - q_c_i
  Vec dyn_d;   // gamma_dyn_d - q_d_i

  double violation_fraction(int family) const;  // 0..3 in field order
};

/// Empirical Lagrangian value and the pre-hinge residuals.
double lagrangian(const BarrierNet& net, const HybridSystem& sys,
                  const TrainingData& data, const Hyperparams& hp,
                  const DualVars& lam, Residuals* residuals = nullptr);

Residuals compute_residuals(const BarrierNet& net, const HybridSystem& sys,
                            const TrainingData& data, const Hyperparams& hp);

/// One full-batch gradient step theta <- theta - eta * grad L(theta, lambda).
/// Returns the residuals evaluated at the pre-step parameters.
Residuals primal_step(BarrierNet& net, const HybridSystem& sys,
                      const TrainingData& data, const Hyperparams& hp,
                      const DualVars& lam);

/// Gradient of the Lagrangian at the current parameters (exposed for tests).
ParamGrad lagrangian_grad(const BarrierNet& net, const HybridSystem& sys,
                          const TrainingData& data, const Hyperparams& hp,
                          const DualVars& lam, Residuals* residuals = nullptr);

/// Projected dual ascent, lambda <- [lambda + beta * r]_+ per sample.
void dual_step(const Residuals& residuals, DualVars& lam, double beta);

struct TraceRow {
  int epoch{0};
  double lagrangian{0.0};
  double viol_safe{0.0}, viol_unsafe{0.0}, viol_dyn_c{0.0}, viol_dyn_d{0.0};
  double theta_norm{0.0};
  double max_lambda_safe{0.0}, max_lambda_unsafe{0.0};
  double max_lambda_dyn_c{0.0}, max_lambda_dyn_d{0.0};
};

struct TrainingTrace {
  std::vector<TraceRow> rows;
  void write_csv(const std::string& path) const;
};

struct TrainResult {
  BarrierNet net;       // final parameters
  BarrierNet best_net;  // lowest total violation fraction seen
  double best_violation{0.0};
  TrainingTrace trace;
};

/// Primal-dual iteration over E epochs from a seeded initialization.
TrainResult train(const HybridSystem& sys, const TrainingData& data,
                  const Hyperparams& hp, std::vector<int> hidden_dims = {32, 16});

}  // namespace rhcbf
