#include "rhcbf/verify.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rhcbf {

LipschitzEstimate local_lipschitz(const BarrierNet& net, const Vec& center,
                                  double eps, int n_samples,
                                  std::mt19937_64& rng) {
  if (eps <= 0.0) throw std::invalid_argument("local_lipschitz: eps <= 0");
  LipschitzEstimate est;
  est.upper_bound = net.global_lipschitz_bound();
  const int dim = static_cast<int>(center.size());
  for (int i = 0; i < n_samples; ++i) {
    const Vec z = center + eps * uniform_ball(dim, rng);
    est.sampled_max = std::max(est.sampled_max, net.grad_z(z).norm());
  }
  est.sampled_max = std::max(est.sampled_max, net.grad_z(center).norm());
  return est;
}

double sampled_lipschitz(const ScalarField& f, const Vec& center, double eps,
                         int n_samples, std::mt19937_64& rng) {
  if (eps <= 0.0) throw std::invalid_argument("sampled_lipschitz: eps <= 0");
  const int dim = static_cast<int>(center.size());
  double best = 0.0;
  // Central difference quotients along random directions through ball points.
  const double hstep = 1e-5 * eps;
  for (int i = 0; i < n_samples; ++i) {
    const Vec z = center + eps * uniform_ball(dim, rng);
    Vec dir = uniform_ball(dim, rng);
    const double dn = dir.norm();
    if (dn < 1e-12) continue;
    dir /= dn;
    const double df = (f(z + hstep * dir) - f(z - hstep * dir)) / (2.0 * hstep);
    best = std::max(best, std::abs(df));
  }
  return best;
}

double time_variation_bound(const std::function<double(const Vec&, double)>& q,
                            const Vec& center, double eps,
                            const std::vector<double>& time_probes,
                            int n_ball_samples, std::mt19937_64& rng,
                            bool time_invariant) {
  if (time_probes.empty())
    throw std::invalid_argument("time_variation_bound: empty probes");
  if (time_invariant || time_probes.size() < 2) return 0.0;
  const int dim = static_cast<int>(center.size());
  double bound = 0.0;
  for (int i = 0; i < n_ball_samples; ++i) {
    const Vec z = (i == 0) ? center : Vec(center + eps * uniform_ball(dim, rng));
    for (std::size_t a = 0; a < time_probes.size(); ++a)
      for (std::size_t b = a + 1; b < time_probes.size(); ++b)
        bound = std::max(bound,
                         std::abs(q(z, time_probes[a]) - q(z, time_probes[b])));
  }
  return bound;
}

CheckResult check_prop1(double eps_bar, double gamma_unsafe,
                        const std::vector<double>& L_h_ring,
                        const std::vector<double>& h_ring) {
  CheckResult r;
  r.ok = true;
  r.margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < L_h_ring.size(); ++i) {
    const double allowance = gamma_unsafe / L_h_ring[i];
    r.margin = std::min(r.margin, allowance - eps_bar);
    if (!(eps_bar < allowance)) {
      r.ok = false;
      r.diagnosis = "eps_bar >= gamma_unsafe / L_h at ring sample " +
                    std::to_string(i);
    }
    if (h_ring[i] > -gamma_unsafe) {
      r.ok = false;
      r.diagnosis = "ring constraint h <= -gamma_unsafe violated at sample " +
                    std::to_string(i);
    }
  }
  if (L_h_ring.empty()) r.margin = 0.0;
  return r;
}

CheckResult check_prop2(double eps_c, double eps_d, double gamma_safe,
                        const std::vector<double>& L_h_safe_c,
                        const std::vector<double>& h_safe_c,
                        const std::vector<double>& L_h_safe_d,
                        const std::vector<double>& h_safe_d) {
  CheckResult r;
  r.ok = true;
  r.margin = std::numeric_limits<double>::infinity();
  auto scan = [&](double eps, const std::vector<double>& L,
                  const std::vector<double>& h, const char* tag) {
    for (std::size_t i = 0; i < L.size(); ++i) {
      const double allowance = gamma_safe / L[i];
      r.margin = std::min(r.margin, allowance - eps);
      if (!(eps <= allowance)) {
        r.ok = false;
        r.diagnosis = std::string(tag) + ": eps > gamma_safe / L_h at sample " +
                      std::to_string(i);
      }
      if (h[i] < gamma_safe) {
        r.ok = false;
        r.diagnosis = std::string(tag) +
                      ": safe constraint h >= gamma_safe violated at sample " +
                      std::to_string(i);
      }
    }
  };
  scan(eps_c, L_h_safe_c, h_safe_c, "flow");
  scan(eps_d, L_h_safe_d, h_safe_d, "jump");
  if (L_h_safe_c.empty() && L_h_safe_d.empty()) r.margin = 0.0;
  return r;
}

CheckResult check_prop3(double eps_c, double eps_d, double gamma_dyn_c,
                        double gamma_dyn_d, const std::vector<double>& L_q_c,
                        const std::vector<double>& M_q_c,
                        const std::vector<double>& q_c_vals,
                        const std::vector<double>& L_q_d,
                        const std::vector<double>& M_q_d,
                        const std::vector<double>& q_d_vals) {
  CheckResult r;
  r.ok = true;
  r.margin = std::numeric_limits<double>::infinity();
  auto scan = [&](double eps, double gamma, const std::vector<double>& L,
                  const std::vector<double>& M, const std::vector<double>& q,
                  const char* tag) {
    for (std::size_t i = 0; i < L.size(); ++i) {
      if (M[i] >= gamma) {
        r.ok = false;
        r.diagnosis = std::string(tag) + ": margin exhausted by time variation at sample " +
                      std::to_string(i);
        r.margin = std::min(r.margin, gamma - M[i]);
        continue;
      }
      const double allowance = (gamma - M[i]) / std::max(L[i], 1e-300);
      r.margin = std::min(r.margin, allowance - eps);
      if (!(eps <= allowance)) {
        r.ok = false;
        r.diagnosis = std::string(tag) + ": eps > (gamma_dyn - M_q) / L_q at sample " +
                      std::to_string(i);
      }
      if (q[i] < gamma) {
        r.ok = false;
        r.diagnosis = std::string(tag) +
                      ": dynamics constraint q >= gamma_dyn violated at sample " +
                      std::to_string(i);
      }
    }
  };
  scan(eps_c, gamma_dyn_c, L_q_c, M_q_c, q_c_vals, "flow");
  scan(eps_d, gamma_dyn_d, L_q_d, M_q_d, q_d_vals, "jump");
  if (L_q_c.empty() && L_q_d.empty()) r.margin = 0.0;
  return r;
}

GridValidateResult grid_validate(const BarrierNet& net,
                                 const std::vector<Vec>& probes,
                                 bool want_nonnegative) {
  GridValidateResult res;
  res.n_probes = static_cast<int>(probes.size());
  res.min_h = std::numeric_limits<double>::infinity();
  res.max_h = -std::numeric_limits<double>::infinity();
  for (const auto& z : probes) {
    const double h = net.forward(z);
    res.min_h = std::min(res.min_h, h);
    res.max_h = std::max(res.max_h, h);
    const bool violated = want_nonnegative ? (h < 0.0) : (h >= 0.0);
    if (violated && res.violations.size() < 1000) res.violations.push_back(z);
  }
  return res;
}

namespace {

// Rejection-samples the sigma-ring region around the cover (same geometry as
// build_ring, independent seed): probes of the region N.
std::vector<Vec> ring_region_probes(const DatasetBundle& bundle, int n,
                                    std::mt19937_64& rng) {
  return build_ring(bundle, n, rng);
}

// Probes of the cover D: uniform draws in the epsilon balls, kept when inside
// the cover.
std::vector<Vec> cover_probes(const DatasetBundle& bundle, int n,
                              std::mt19937_64& rng) {
  const auto flow_pts = bundle.flow_states();
  const auto jump_pts = bundle.jump_states();
  const std::size_t n_flow = flow_pts.size();
  const std::size_t n_total = n_flow + jump_pts.size();
  std::uniform_int_distribution<std::size_t> pick(0, n_total - 1);
  std::vector<Vec> probes;
  long attempts = 0;
  while (static_cast<int>(probes.size()) < n && attempts < 100L * n) {
    ++attempts;
    const std::size_t i = pick(rng);
    const Vec& center = (i < n_flow) ? flow_pts[i] : jump_pts[i - n_flow];
    const double eps = (i < n_flow) ? bundle.geom.eps_c : bundle.geom.eps_d;
    const Vec z = center + eps * uniform_ball(static_cast<int>(center.size()), rng);
    if (!in_cover(bundle, z)) continue;
    probes.push_back(z);
  }
  return probes;
}

}  // namespace

VerificationReport verify(const BarrierNet& net, const HybridSystem& sys,
                          const DatasetBundle& bundle, const Hyperparams& hp,
                          const VerifyOptions& opt) {
  VerificationReport report;
  report.seed = opt.seed;
  report.lipschitz_samples = opt.lipschitz_samples;
  report.eps_c = bundle.geom.eps_c;
  report.eps_d = bundle.geom.eps_d;
  report.lip_bar = hp.lip_bar;
  report.global_lip_h = net.global_lipschitz_bound();
  report.lip_budget_ok = hp.lip_bar >= report.global_lip_h;

  std::mt19937_64 rng(opt.seed);

  // eps_bar: covering radius of the ring samples over probes of N.
  report.eps_bar = bundle.geom.eps_bar;
  std::vector<Vec> ring_probes;
  if (!bundle.ring_samples.empty()) {
    ring_probes = ring_region_probes(
        bundle, std::max(1000, opt.probe_samples / 10), rng);
    if (report.eps_bar <= 0.0)
      report.eps_bar = epsilon_net_radius(bundle.ring_samples, ring_probes);
  }

  // Certification uses the sound global bound for L_h.
  std::vector<double> L_h_ring(bundle.ring_samples.size(), report.global_lip_h);
  std::vector<double> h_ring;
  h_ring.reserve(bundle.ring_samples.size());
  report.max_h_ring = -std::numeric_limits<double>::infinity();
  for (const auto& z : bundle.ring_samples) {
    h_ring.push_back(net.forward(z));
    report.max_h_ring = std::max(report.max_h_ring, h_ring.back());
  }
  report.prop1 = check_prop1(report.eps_bar, hp.gamma_unsafe, L_h_ring, h_ring);

  // The safe-positivity constraint is enforced on the thinned sets; the check
  // mirrors them (the full cover is still sign-probed below).
  const auto flow_states =
      thin_safe_sets(bundle.flow_states(), bundle.ring_samples, opt.thin_standoff);
  const auto jump_states =
      thin_safe_sets(bundle.jump_states(), bundle.ring_samples, opt.thin_standoff);
  std::vector<double> L_h_c(flow_states.size(), report.global_lip_h);
  std::vector<double> L_h_d(jump_states.size(), report.global_lip_h);
  std::vector<double> h_c, h_d;
  report.min_h_safe = std::numeric_limits<double>::infinity();
  for (const auto& z : flow_states) {
    h_c.push_back(net.forward(z));
    report.min_h_safe = std::min(report.min_h_safe, h_c.back());
  }
  for (const auto& z : jump_states) {
    h_d.push_back(net.forward(z));
    report.min_h_safe = std::min(report.min_h_safe, h_d.back());
  }
  report.prop2 = check_prop2(report.eps_c, report.eps_d, hp.gamma_safe, L_h_c,
                             h_c, L_h_d, h_d);

  // q margins and sampled local Lipschitz constants per dynamics sample.
  std::vector<double> L_q_c, M_q_c, q_c_vals, L_q_d, M_q_d, q_d_vals;
  for (const auto& s : bundle.flow_samples) {
    q_c_vals.push_back(q_c(net, sys, s.z, s.u, s.t, hp.alpha_gain));
    const ScalarField field = [&](const Vec& z) {
      return q_c(net, sys, z, s.u, s.t, hp.alpha_gain);
    };
    L_q_c.push_back(sampled_lipschitz(field, s.z, report.eps_c,
                                      opt.lipschitz_samples, rng));
    M_q_c.push_back(time_variation_bound(
        [&](const Vec& z, double t) { return q_c(net, sys, z, s.u, t, hp.alpha_gain); },
        s.z, report.eps_c, opt.time_probes, 8, rng, opt.time_invariant));
  }
  for (const auto& s : bundle.jump_samples) {
    q_d_vals.push_back(q_d(net, sys, s.z, s.u, s.t, hp.lip_bar));
    const ScalarField field = [&](const Vec& z) {
      return q_d(net, sys, z, s.u, s.t, hp.lip_bar);
    };
    L_q_d.push_back(sampled_lipschitz(field, s.z, report.eps_d,
                                      opt.lipschitz_samples, rng));
    M_q_d.push_back(time_variation_bound(
        [&](const Vec& z, double t) { return q_d(net, sys, z, s.u, t, hp.lip_bar); },
        s.z, report.eps_d, opt.time_probes, 8, rng, opt.time_invariant));
  }
  report.prop3 = check_prop3(report.eps_c, report.eps_d, hp.gamma_dyn_c,
                             hp.gamma_dyn_d, L_q_c, M_q_c, q_c_vals, L_q_d,
                             M_q_d, q_d_vals);

  if (!ring_probes.empty())
    report.ring_probe = grid_validate(net, ring_probes, /*want_nonnegative=*/false);
  std::vector<Vec> dom_probes = cover_probes(bundle, opt.probe_samples, rng);
  if (!dom_probes.empty())
    report.cover_probe = grid_validate(net, dom_probes, /*want_nonnegative=*/true);

  return report;
}

void VerificationReport::write_json(const std::string& path) const {
  nlohmann::json doc;
  doc["eps_bar"] = eps_bar;
  doc["eps_c"] = eps_c;
  doc["eps_d"] = eps_d;
  doc["global_lip_h"] = global_lip_h;
  doc["lip_bar"] = lip_bar;
  doc["lip_budget_ok"] = lip_budget_ok;
  doc["min_h_safe"] = min_h_safe;
  doc["max_h_ring"] = max_h_ring;
  auto dump_check = [](const CheckResult& c) {
    return nlohmann::json{{"ok", c.ok}, {"margin", c.margin}, {"diagnosis", c.diagnosis}};
  };
  doc["prop1"] = dump_check(prop1);
  doc["prop2"] = dump_check(prop2);
  doc["prop3"] = dump_check(prop3);
  auto dump_probe = [](const GridValidateResult& g) {
    return nlohmann::json{{"min_h", g.min_h},
                          {"max_h", g.max_h},
                          {"n_probes", g.n_probes},
                          {"n_violations", g.violations.size()}};
  };
  doc["ring_probe"] = dump_probe(ring_probe);
  doc["cover_probe"] = dump_probe(cover_probe);
  doc["seed"] = seed;
  doc["lipschitz_samples"] = lipschitz_samples;
  doc["passed"] = passed();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("VerificationReport: cannot open " + path);
  out << doc.dump(2) << '\n';
}

std::string VerificationReport::summary() const {
  std::ostringstream os;
  os << "verification " << (passed() ? "PASSED" : "FAILED") << "\n"
     << "  prop1 (ring negativity): " << (prop1.ok ? "ok" : "FAIL")
     << " margin=" << prop1.margin << " " << prop1.diagnosis << "\n"
     << "  prop2 (cover positivity): " << (prop2.ok ? "ok" : "FAIL")
     << " margin=" << prop2.margin << " " << prop2.diagnosis << "\n"
     << "  prop3 (dynamics feasibility): " << (prop3.ok ? "ok" : "FAIL")
     << " margin=" << prop3.margin << " " << prop3.diagnosis << "\n"
     << "  Lip budget: " << (lip_budget_ok ? "ok" : "FAIL") << " (bound "
     << global_lip_h << " vs " << lip_bar << ")\n"
     << "  eps_bar=" << eps_bar << " eps_c=" << eps_c << " eps_d=" << eps_d
     << "\n  ring probe max h=" << ring_probe.max_h
     << " cover probe min h=" << cover_probe.min_h << "\n";
  return os.str();
}

}  // namespace rhcbf
