#include "rhcbf/hybrid.hpp"

#include <cmath>
#include <limits>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rhcbf {

InputBox::InputBox(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size())
    throw std::invalid_argument("InputBox: dimension mismatch");
  for (int i = 0; i < lower.size(); ++i)
    if (lower[i] > upper[i])
      throw std::invalid_argument("InputBox: lower > upper");
}

InputBox InputBox::unbounded(int dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return InputBox(Vec::Constant(dim, -inf), Vec::Constant(dim, inf));
}

bool InputBox::contains(const Vec& u, double tol) const {
  if (u.size() != lower.size()) return false;
  for (int i = 0; i < u.size(); ++i)
    if (u[i] < lower[i] - tol || u[i] > upper[i] + tol) return false;
  return true;
}

Vec InputBox::clamp(const Vec& u) const {
  return u.cwiseMax(lower).cwiseMin(upper);
}

const Vec& HybridArc::final_state() const {
  if (!segments.empty() && !segments.back().states.empty())
    return segments.back().states.back();
  if (!jumps.empty()) return jumps.back().z_after;
  throw std::runtime_error("HybridArc: empty arc");
}

namespace {

Vec rk4_step(const DynamicsFn& f, const Vec& z, double t, const Vec& u,
             double dt) {
  const Vec k1 = f(z, t, u);
  const Vec k2 = f(z + 0.5 * dt * k1, t + 0.5 * dt, u);
  const Vec k3 = f(z + 0.5 * dt * k2, t + 0.5 * dt, u);
  const Vec k4 = f(z + dt * k3, t + dt, u);
  return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

FlowSegment integrate_flow(const HybridSystem& sys, const Vec& z0, double t0,
                           int j, const ControlLaw& control,
                           const FlowField& dyn, double t_max, double step,
                           const IntegrateOptions& opt) {
  if (step <= 0.0) throw std::invalid_argument("integrate_flow: step <= 0");
  FlowSegment seg;
  seg.j = j;

  if (!sys.flow_set(z0)) {
    seg.exit = FlowExit::left_flow_set;
    return seg;
  }

  const bool has_guard = static_cast<bool>(sys.guard);
  Vec z = z0;
  double t = t0;
  Vec u = control ? control(z, t) : Vec(0);
  seg.times.push_back(t);
  seg.states.push_back(z);
  seg.inputs.push_back(u);
  double g_prev = has_guard ? sys.guard(z) : 1.0;

  while (t < t_max - 1e-15) {
    const double dt = std::min(step, t_max - t);
    u = control ? control(z, t) : Vec(0);
    if (dyn.on_step) dyn.on_step(z, t);
    Vec z_next = rk4_step(dyn.eval, z, t, u, dt);
    if (!z_next.allFinite())
      throw std::runtime_error("integrate_flow: non-finite state");

    if (has_guard) {
      const double g_next = sys.guard(z_next);
      if (g_prev > 0.0 && g_next <= 0.0) {
        // Bisect the step fraction until the guard is localized.
        double lo = 0.0, hi = 1.0;
        Vec z_hi = z_next;
        double g_hi = g_next;
        for (int it = 0; it < opt.max_bisections && std::abs(g_hi) > opt.guard_tol;
             ++it) {
          const double mid = 0.5 * (lo + hi);
          const Vec z_mid = rk4_step(dyn.eval, z, t, u, mid * dt);
          const double g_mid = sys.guard(z_mid);
          if (g_mid <= 0.0) {
            hi = mid;
            z_hi = z_mid;
            g_hi = g_mid;
          } else {
            lo = mid;
          }
        }
        t += hi * dt;
        z = z_hi;
        seg.times.push_back(t);
        seg.states.push_back(z);
        seg.inputs.push_back(u);
        seg.exit = FlowExit::guard_hit;
        return seg;
      }
      g_prev = g_next;
    }

    t += dt;
    z = z_next;
    seg.times.push_back(t);
    seg.states.push_back(z);
    seg.inputs.push_back(u);
    if (opt.stop && opt.stop(z)) {
      seg.exit = FlowExit::stopped;
      return seg;
    }
    if (!sys.flow_set(z)) {
      seg.exit = FlowExit::left_flow_set;
      return seg;
    }
  }
  seg.exit = FlowExit::t_max;
  return seg;
}

Vec apply_jump(const HybridSystem& sys, const Vec& z, double t, const Vec& u_d,
               const DynamicsFn& dyn) {
  if (!sys.jump_set(z))
    throw std::runtime_error("apply_jump: state not in jump set");
  if (sys.input_box_d.dim() > 0 && !sys.input_box_d.contains(u_d))
    throw std::runtime_error("apply_jump: input outside input_box_d");
  return dyn(z, t, u_d);
}

Vec uniform_ball(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec d(dim);
  for (int i = 0; i < dim; ++i) d[i] = gauss(rng);
  const double n = d.norm();
  if (n < 1e-300) return Vec::Zero(dim);
  const double r = std::pow(unif(rng), 1.0 / dim);
  return d * (r / n);
}

Vec sample_admissible(const HybridSystem& sys, const Vec& z, double t,
                      const Vec& u, DynKind which, std::mt19937_64& rng) {
  const auto& est = (which == DynKind::flow) ? sys.est_flow : sys.est_jump;
  const auto& err = (which == DynKind::flow) ? sys.err_flow : sys.err_jump;
  const double delta = err(z, t, u);
  Vec w = est(z, t, u);
  if (delta > 0.0) w += delta * uniform_ball(static_cast<int>(w.size()), rng);
  return w;
}

namespace {

// Builds the realized flow/jump dynamics for one simulation run: ground truth
// when present, otherwise estimate plus a held disturbance draw.
struct RealizedDynamics {
  const HybridSystem& sys;
  const DisturbancePolicy& policy;
  std::mt19937_64 rng;
  Vec current_d;  // disturbance held until the next redraw
  double next_redraw_t{-std::numeric_limits<double>::infinity()};

  RealizedDynamics(const HybridSystem& s, const DisturbancePolicy& p)
      : sys(s), policy(p), rng(p.seed), current_d(Vec::Zero(s.n_z)) {}

  void redraw(const Vec& z, double t, const Vec& u) {
    switch (policy.mode) {
      case DisturbanceMode::none:
        current_d.setZero();
        break;
      case DisturbanceMode::uniform_ball: {
        if (t < next_redraw_t) break;
        next_redraw_t = t + policy.hold_time;
        const double delta = sys.err_flow(z, t, u);
        current_d = delta * uniform_ball(sys.n_z, rng);
        break;
      }
      case DisturbanceMode::worst_case_surface: {
        const double delta = sys.err_flow(z, t, u);
        Vec g = policy.barrier_grad ? policy.barrier_grad(z) : Vec::Zero(sys.n_z);
        const double gn = g.norm();
        if (gn < 1e-300)
          current_d = delta * uniform_ball(sys.n_z, rng);
        else
          current_d = -(delta / gn) * g;
        break;
      }
    }
  }

  Vec flow(const Vec& z, double t, const Vec& u) {
    if (sys.truth_flow) return sys.truth_flow(z, t, u);
    return sys.est_flow(z, t, u) + current_d;
  }

  Vec jump(const Vec& z, double t, const Vec& u) {
    if (sys.truth_jump) return sys.truth_jump(z, t, u);
    Vec w = sys.est_jump(z, t, u);
    const double delta = sys.err_jump(z, t, u);
    if (delta > 0.0) {
      if (policy.mode == DisturbanceMode::none) return w;
      w += delta * uniform_ball(sys.n_z, rng);
    }
    return w;
  }
};

}  // namespace

HybridArc simulate(const HybridSystem& sys, const Vec& z0,
                   const ControlPair& controls,
                   const DisturbancePolicy& disturbance, const Horizon& horizon,
                   const SimulateOptions& opt) {
  if (horizon.T <= 0.0) throw std::invalid_argument("simulate: T <= 0");
  HybridArc arc;
  Vec z = z0;
  double t = 0.0;
  int j = 0;

  if (!sys.in_domain(z)) {
    arc.termination = Termination::left_domain;
    arc.end_time = {t, j};
    return arc;
  }

  RealizedDynamics realized(sys, disturbance);
  FlowField field;
  ControlLaw flow_law = controls.flow_law;
  field.eval = [&](const Vec& zz, double tt, const Vec& uu) {
    return realized.flow(zz, tt, uu);
  };
  field.on_step = [&](const Vec& zz, double tt) {
    const Vec uu = flow_law ? flow_law(zz, tt) : Vec(0);
    realized.redraw(zz, tt, uu);
  };

  int jumps_at_instant = 0;
  double last_jump_t = -1.0;

  while (t < horizon.T && j < horizon.J) {
    if (opt.fall_predicate && opt.fall_predicate(z)) {
      arc.termination = Termination::fell;
      arc.end_time = {t, j};
      return arc;
    }
    if (sys.jump_set(z)) {
      Vec u_d =
          controls.jump_law ? controls.jump_law(z, t) : Vec(sys.m_d);
      if (sys.m_d == 0) u_d = Vec(0);
      const Vec z_plus = apply_jump(
          sys, z, t, u_d,
          [&](const Vec& zz, double tt, const Vec& uu) {
            return realized.jump(zz, tt, uu);
          });
      arc.jumps.push_back({t, z, z_plus});
      z = z_plus;
      ++j;
      if (t == last_jump_t) {
        if (++jumps_at_instant > opt.max_jumps_per_instant) {
          arc.termination = Termination::zeno_suspected;
          arc.end_time = {t, j};
          return arc;
        }
      } else {
        last_jump_t = t;
        jumps_at_instant = 1;
      }
      if (!sys.in_domain(z)) {
        arc.termination = Termination::left_domain;
        arc.end_time = {t, j};
        return arc;
      }
      continue;
    }
    if (!sys.flow_set(z)) {
      arc.termination = Termination::left_domain;
      arc.end_time = {t, j};
      return arc;
    }

    IntegrateOptions iopt = opt.integrate;
    if (opt.fall_predicate) iopt.stop = opt.fall_predicate;
    FlowSegment seg = integrate_flow(sys, z, t, j, flow_law, field, horizon.T,
                                     opt.step, iopt);
    if (!seg.states.empty()) {
      t = seg.times.back();
      z = seg.states.back();
    }
    const FlowExit exit = seg.exit;
    arc.segments.push_back(std::move(seg));
    if (exit == FlowExit::t_max) break;
    if (exit == FlowExit::stopped) {
      arc.termination = Termination::fell;
      arc.end_time = {t, j};
      return arc;
    }
    if (exit == FlowExit::left_flow_set && !sys.jump_set(z)) {
      arc.termination = Termination::left_domain;
      arc.end_time = {t, j};
      return arc;
    }
    // guard_hit (or left into D): loop back; the jump branch picks it up.
    if (exit == FlowExit::guard_hit && !sys.jump_set(z)) {
      // Guard fired but the jump-set predicate rejects it (e.g. scissor
      // configuration); treat as leaving the domain.
      arc.termination = Termination::left_domain;
      arc.end_time = {t, j};
      return arc;
    }
  }

  arc.termination = Termination::horizon_reached;
  arc.end_time = {t, j};
  return arc;
}

std::string to_string(Termination term) {
  switch (term) {
    case Termination::horizon_reached: return "horizon_reached";
    case Termination::left_domain: return "left_domain";
    case Termination::zeno_suspected: return "zeno_suspected";
    case Termination::fell: return "fell";
  }
  return "unknown";
}

void write_arc_csv(const HybridArc& arc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_arc_csv: cannot open " + path);
  int n_z = 0, m = 0;
  for (const auto& seg : arc.segments)
    if (!seg.states.empty()) {
      n_z = static_cast<int>(seg.states.front().size());
      m = static_cast<int>(seg.inputs.front().size());
      break;
    }
  out << "t,j";
  for (int i = 1; i <= n_z; ++i) out << ",z_" << i;
  for (int i = 1; i <= m; ++i) out << ",u_" << i;
  out << ",segment_id\n";
  out.precision(17);
  int seg_id = 0;
  for (const auto& seg : arc.segments) {
    for (std::size_t k = 0; k < seg.states.size(); ++k) {
      out << seg.times[k] << ',' << seg.j;
      for (int i = 0; i < n_z; ++i) out << ',' << seg.states[k][i];
      for (int i = 0; i < m; ++i)
        out << ',' << (static_cast<int>(seg.inputs[k].size()) == m
                           ? seg.inputs[k][i]
                           : 0.0);
      out << ',' << seg_id << '\n';
    }
    ++seg_id;
  }
}

void write_arc_sidecar(const HybridArc& arc, const std::string& path) {
  nlohmann::json doc;
  doc["termination"] = to_string(arc.termination);
  doc["end_time"] = {{"t", arc.end_time.t}, {"j", arc.end_time.j}};
  auto& jumps = doc["jumps"] = nlohmann::json::array();
  for (const auto& jr : arc.jumps) {
    nlohmann::json entry;
    entry["t"] = jr.t;
    entry["z_before"] = std::vector<double>(jr.z_before.begin(), jr.z_before.end());
    entry["z_after"] = std::vector<double>(jr.z_after.begin(), jr.z_after.end());
    jumps.push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_arc_sidecar: cannot open " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace rhcbf
