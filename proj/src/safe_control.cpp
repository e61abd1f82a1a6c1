#include "rhcbf/safe_control.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace rhcbf {

BarrierFn BarrierFn::from_net(const BarrierNet& net) {
  BarrierFn b;
  b.value = [&net](const Vec& z) { return net.forward(z); };
  b.grad = [&net](const Vec& z) { return net.grad_z(z); };
  return b;
}

BarrierFn BarrierFn::analytic(std::function<double(const Vec&)> value,
                              std::function<Vec(const Vec&)> grad) {
  BarrierFn b;
  b.value = std::move(value);
  b.grad = std::move(grad);
  return b;
}

namespace {

constexpr double kSlackTol = 1e-9;

// Probes whether Delta_c varies with u at a few box points; a u-dependent
// error bound makes the constraint nonlinear in u, which the runtime filter
// does not support.
void reject_u_dependent_error(const HybridSystem& sys) {
  if (sys.m_c == 0) return;
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    Vec z(sys.n_z);
    for (int i = 0; i < sys.n_z; ++i) z[i] = gauss(rng);
    const double t = std::abs(gauss(rng));
    const Vec u0 = sys.input_box_c.clamp(Vec::Zero(sys.m_c));
    const double d0 = sys.err_flow(z, t, u0);
    for (const Vec& u : {Vec(sys.input_box_c.lower), Vec(sys.input_box_c.upper)}) {
      if (std::abs(sys.err_flow(z, t, u) - d0) > 1e-12)
        throw std::invalid_argument(
            "FlowFilter: flow error bound depends on u; the halfspace filter "
            "requires a control-independent Delta_c");
    }
  }
}

// Control-affine decomposition of the estimated flow at (z, t):
// f = est(z,t,0), g columns from unit inputs.
void affine_parts(const HybridSystem& sys, const Vec& z, double t, Vec& f,
                  Mat& g) {
  f = sys.est_flow(z, t, Vec::Zero(sys.m_c));
  g.resize(sys.n_z, sys.m_c);
  for (int i = 0; i < sys.m_c; ++i) {
    Vec e = Vec::Zero(sys.m_c);
    e[i] = 1.0;
    g.col(i) = sys.est_flow(z, t, e) - f;
  }
}

// Exact projection of u0 onto {a.u >= b} intersected with the box, by an
// active-set loop whose bound set only grows (terminates in <= m rounds).
// Returns false when the halfspace misses the box.
bool project_halfspace_box(const Vec& a, double b, const InputBox& box,
                           const Vec& u0, Vec& out) {
  const int m = static_cast<int>(a.size());
  // Feasibility: best achievable a.u over the box.
  double best = 0.0;
  for (int i = 0; i < m; ++i)
    best += a[i] * (a[i] >= 0.0 ? box.upper[i] : box.lower[i]);
  if (best < b - kSlackTol) return false;

  std::vector<int> bound(m, 0);  // 0 free, -1 at lower, +1 at upper
  for (int round = 0; round <= m; ++round) {
    double b_free = b;
    double a_norm2 = 0.0;
    double a_dot_u0 = 0.0;
    for (int i = 0; i < m; ++i) {
      if (bound[i] == -1)
        b_free -= a[i] * box.lower[i];
      else if (bound[i] == 1)
        b_free -= a[i] * box.upper[i];
      else {
        a_norm2 += a[i] * a[i];
        a_dot_u0 += a[i] * u0[i];
      }
    }
    Vec u(m);
    const double deficit = b_free - a_dot_u0;
    const double scale = (a_norm2 > 0.0 && deficit > 0.0) ? deficit / a_norm2 : 0.0;
    for (int i = 0; i < m; ++i) {
      if (bound[i] == -1)
        u[i] = box.lower[i];
      else if (bound[i] == 1)
        u[i] = box.upper[i];
      else
        u[i] = u0[i] + scale * a[i];
    }
    bool clipped = false;
    for (int i = 0; i < m; ++i) {
      if (bound[i] != 0) continue;
      if (u[i] < box.lower[i] - 1e-15) {
        bound[i] = -1;
        clipped = true;
      } else if (u[i] > box.upper[i] + 1e-15) {
        bound[i] = 1;
        clipped = true;
      }
    }
    if (!clipped) {
      if (a.dot(box.clamp(u)) >= b - kSlackTol) {
        out = box.clamp(u);
        return true;
      }
      // All free mass exhausted without reaching the halfspace: push the
      // remaining free coordinates toward their best bound.
      for (int i = 0; i < m; ++i)
        if (bound[i] == 0) bound[i] = (a[i] >= 0.0) ? 1 : -1;
    }
  }
  // Fallback (unreachable in practice): best box vertex for a.u.
  Vec u(m);
  for (int i = 0; i < m; ++i) u[i] = (a[i] >= 0.0) ? box.upper[i] : box.lower[i];
  out = u;
  return a.dot(u) >= b - kSlackTol;
}

double robust_jump_margin(const BarrierFn& barrier, const HybridSystem& sys,
                          const Vec& z, double t, const Vec& u, double lip_bar) {
  const Vec z_plus = sys.est_jump(z, t, u);
  return barrier.value(z_plus) - lip_bar * sys.err_jump(z, t, u);
}

}  // namespace

FlowFilter::FlowFilter(BarrierFn barrier, const HybridSystem& sys, double kappa)
    : barrier_(std::move(barrier)), sys_(sys), kappa_(kappa) {
  if (kappa <= 0.0) throw std::invalid_argument("FlowFilter: kappa <= 0");
  if (!barrier_.value || !barrier_.grad)
    throw std::invalid_argument("FlowFilter: barrier callables not set");
  reject_u_dependent_error(sys);
}

FilterResult FlowFilter::operator()(const Vec& z, double t,
                                    const Vec& u_nom) const {
  const double h = barrier_.value(z);
  const Vec grad = barrier_.grad(z);
  Vec f;
  Mat g;
  affine_parts(sys_, z, t, f, g);
  const double delta = sys_.err_flow(z, t, Vec::Zero(sys_.m_c));
  const Vec a = g.transpose() * grad;
  const double b = -kappa_ * h - grad.dot(f) + grad.norm() * delta;

  FilterResult res;
  const Vec u0 = sys_.input_box_c.clamp(u_nom);
  if (a.dot(u0) >= b - kSlackTol) {
    res.u_applied = u0;
    res.feasible = true;
  } else if (a.norm() == 0.0) {
    res.u_applied = u0;  // degenerate gradient: nothing the input can do
    res.feasible = false;
  } else {
    Vec proj;
    res.feasible = project_halfspace_box(a, b, sys_.input_box_c, u0, proj);
    if (res.feasible) {
      res.u_applied = proj;
    } else {
      res.u_applied.resize(sys_.m_c);
      for (int i = 0; i < sys_.m_c; ++i)
        res.u_applied[i] =
            (a[i] >= 0.0) ? sys_.input_box_c.upper[i] : sys_.input_box_c.lower[i];
    }
  }
  res.constraint_slack = a.dot(res.u_applied) - b;
  res.modified = (u_nom.size() != res.u_applied.size()) ||
                 ((u_nom - res.u_applied).norm() > 1e-12);
  return res;
}

FilterResult jump_filter(const BarrierFn& barrier, const HybridSystem& sys,
                         const Vec& z, double t,
                         const std::vector<Vec>& candidates, double lip_bar) {
  if (candidates.empty())
    throw std::invalid_argument("jump_filter: empty candidate list");
  FilterResult res;
  res.constraint_slack = -std::numeric_limits<double>::infinity();
  for (const auto& u : candidates) {
    const double q = robust_jump_margin(barrier, sys, z, t, u, lip_bar);
    if (q > res.constraint_slack) {
      res.constraint_slack = q;
      res.u_applied = u;
    }
  }
  res.feasible = res.constraint_slack >= 0.0;
  res.modified = false;
  return res;
}

void ViolationLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ViolationLog: cannot open " + path);
  out << "t,j,h,slack,modified\n";
  out.precision(17);
  for (const auto& r : rows)
    out << r.t << ',' << r.j << ',' << r.h << ',' << r.slack << ','
        << (r.modified ? 1 : 0) << '\n';
}

ClosedLoopResult closed_loop(const BarrierFn& barrier, const HybridSystem& sys,
                             const ControlPair& nominal, const Vec& z0,
                             const DisturbancePolicy& disturbance,
                             const Horizon& horizon, double kappa,
                             double lip_bar, const SimulateOptions& opt) {
  if (barrier.value(z0) < 0.0)
    throw std::invalid_argument("closed_loop: h(z0) < 0");

  const FlowFilter filter(barrier, sys, kappa);
  ControlPair filtered;
  filtered.flow_law = [&](const Vec& z, double t) {
    const Vec u_nom = nominal.flow_law ? nominal.flow_law(z, t)
                                       : Vec(Vec::Zero(sys.m_c));
    return filter(z, t, u_nom).u_applied;
  };
  if (sys.m_d > 0) {
    filtered.jump_law = [&](const Vec& z, double t) {
      const Vec u_nom = nominal.jump_law ? nominal.jump_law(z, t)
                                         : Vec(Vec::Zero(sys.m_d));
      const std::vector<Vec> cand = {sys.input_box_d.clamp(u_nom)};
      return jump_filter(barrier, sys, z, t, cand, lip_bar).u_applied;
    };
  }

  DisturbancePolicy dist = disturbance;
  if (dist.mode == DisturbanceMode::worst_case_surface && !dist.barrier_grad)
    dist.barrier_grad = barrier.grad;

  ClosedLoopResult result;
  result.arc = simulate(sys, z0, filtered, dist, horizon, opt);

  // Reconstruct the log over the stored samples.
  result.log.min_h = std::numeric_limits<double>::infinity();
  for (const auto& seg : result.arc.segments) {
    for (std::size_t k = 0; k < seg.states.size(); ++k) {
      ViolationLog::Row row;
      row.t = seg.times[k];
      row.j = seg.j;
      row.h = barrier.value(seg.states[k]);
      const Vec u_nom = nominal.flow_law
                            ? nominal.flow_law(seg.states[k], seg.times[k])
                            : Vec::Zero(sys.m_c);
      const FilterResult fr = filter(seg.states[k], seg.times[k], u_nom);
      row.slack = fr.constraint_slack;
      row.modified = fr.modified;
      result.log.min_h = std::min(result.log.min_h, row.h);
      if (row.h < 0.0) result.log.negative_events.push_back(row);
      result.log.rows.push_back(row);
    }
  }
  return result;
}

}  // namespace rhcbf
