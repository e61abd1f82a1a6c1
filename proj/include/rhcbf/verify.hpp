#pragma once

#include "rhcbf/barrier_net.hpp"
#include "rhcbf/datasets.hpp"
#include "rhcbf/train.hpp"

namespace rhcbf {

struct LipschitzEstimate {
  double sampled_max{0.0};   // max gradient norm over ball samples (lower bound)
  double upper_bound{0.0};   // sound global bound
};

/// Local Lipschitz estimate of h within B_eps(center): sampled gradient-norm
/// maximum plus the global product bound. Certification uses the bound,
/// diagnostics the sample max.
LipschitzEstimate local_lipschitz(const BarrierNet& net, const Vec& center,
                                  double eps, int n_samples,
                                  std::mt19937_64& rng);

using ScalarField = std::function<double(const Vec&)>;

/// Sampled local Lipschitz estimate of an arbitrary scalar field by pairwise
/// difference quotients over ball samples (empirical, not certified).
double sampled_lipschitz(const ScalarField& f, const Vec& center, double eps,
                         int n_samples, std::mt19937_64& rng);

/// Max over ball samples and time-probe pairs of |q(., t') - q(., t'')|.
/// Returns exactly 0 for declared time-invariant systems or a single probe.
double time_variation_bound(const std::function<double(const Vec&, double)>& q,
                            const Vec& center, double eps,
                            const std::vector<double>& time_probes,
                            int n_ball_samples, std::mt19937_64& rng,
                            bool time_invariant);

struct CheckResult {
  bool ok{false};
  double margin{0.0};
  std::string diagnosis;
};

/// eps_bar < gamma_unsafe / L_h(z_i) for all ring samples and h(z_i) <=
/// -gamma_unsafe at every ring sample.
CheckResult check_prop1(double eps_bar, double gamma_unsafe,
                        const std::vector<double>& L_h_ring,
                        const std::vector<double>& h_ring);

/// eps_c <= gamma_safe / L_h on flow safe samples, eps_d likewise on jump
/// samples, and h >= gamma_safe on all of them.
CheckResult check_prop2(double eps_c, double eps_d, double gamma_safe,
                        const std::vector<double>& L_h_safe_c,
                        const std::vector<double>& h_safe_c,
                        const std::vector<double>& L_h_safe_d,
                        const std::vector<double>& h_safe_d);

/// eps <= (gamma_dyn - M_q) / L_q at every dynamics sample and q >= gamma_dyn.
CheckResult check_prop3(double eps_c, double eps_d, double gamma_dyn_c,
                        double gamma_dyn_d, const std::vector<double>& L_q_c,
                        const std::vector<double>& M_q_c,
                        const std::vector<double>& q_c_vals,
                        const std::vector<double>& L_q_d,
                        const std::vector<double>& M_q_d,
                        const std::vector<double>& q_d_vals);

struct GridValidateResult {
  double min_h{0.0};
  double max_h{0.0};
  int n_probes{0};
  std::vector<Vec> violations;
};

using RegionSampler = std::function<std::vector<Vec>(int, std::mt19937_64&)>;

/// Evaluates h over a dense probe set of a region; the caller supplies the
/// probe generator (grid or rejection sampling). `want_nonnegative` selects
/// which sign counts as a violation.
GridValidateResult grid_validate(const BarrierNet& net,
                                 const std::vector<Vec>& probes,
                                 bool want_nonnegative);

struct VerificationReport {
  double eps_bar{0.0}, eps_c{0.0}, eps_d{0.0};
  double global_lip_h{0.0};
  double lip_bar{0.0};
  double min_h_safe{0.0};
  double max_h_ring{0.0};
  CheckResult prop1, prop2, prop3;
  bool lip_budget_ok{false};  // Lip_bar >= global Lipschitz bound of h
  GridValidateResult ring_probe;
  GridValidateResult cover_probe;
  std::uint64_t seed{0};
  int lipschitz_samples{0};

  bool passed() const {
    return prop1.ok && prop2.ok && prop3.ok && lip_budget_ok;
  }
  void write_json(const std::string& path) const;
  std::string summary() const;
};

struct VerifyOptions {
  std::uint64_t seed{0};
  int lipschitz_samples{200};
  int probe_samples{100000};
  bool time_invariant{true};
  std::vector<double> time_probes{0.0};
  /// Safe-value constraints are enforced on the thinned safe sets (points at
  /// least this far from every ring sample); the positivity check mirrors the
  /// enforced sets. Sign probing of the full cover is unaffected.
  double thin_standoff{0.0};
};

/// Full post-hoc certification: Lipschitz estimates, the three epsilon-net
/// conditions, the Lipschitz budget check, and dense sign probing of the
/// ring and cover regions.
VerificationReport verify(const BarrierNet& net, const HybridSystem& sys,
                          const DatasetBundle& bundle, const Hyperparams& hp,
                          const VerifyOptions& opt);

}  // namespace rhcbf
