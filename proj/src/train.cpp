#include "rhcbf/train.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace rhcbf {

void Hyperparams::validate() const {
  if (gamma_safe <= 0 || gamma_unsafe <= 0 || gamma_dyn_c <= 0 || gamma_dyn_d <= 0)
    throw std::invalid_argument("Hyperparams: margins must be positive");
  if (eta <= 0 || beta <= 0)
    throw std::invalid_argument("Hyperparams: step sizes must be positive");
  if (epochs < 0) throw std::invalid_argument("Hyperparams: epochs < 0");
  if (lip_bar < 0 || weight_decay < 0 || alpha_gain <= 0 || margin < 0)
    throw std::invalid_argument("Hyperparams: invalid constants");
}

DualVars DualVars::ones(int n_safe, int n_unsafe, int n_dyn_c, int n_dyn_d) {
  DualVars lam;
  lam.safe = Vec::Ones(n_safe);
  lam.unsafe = Vec::Ones(n_unsafe);
  lam.dyn_c = Vec::Ones(n_dyn_c);
  lam.dyn_d = Vec::Ones(n_dyn_d);
  return lam;
}

bool DualVars::nonnegative() const {
  auto ok = [](const Vec& v) { return v.size() == 0 || v.minCoeff() >= 0.0; };
  return ok(safe) && ok(unsafe) && ok(dyn_c) && ok(dyn_d);
}

TrainingData TrainingData::from_bundle(const DatasetBundle& bundle,
                                       double thin_standoff) {
  TrainingData data;
  data.flow = bundle.flow_samples;
  data.jump = bundle.jump_samples;
  data.ring_points = bundle.ring_samples;
  std::vector<Vec> safe = bundle.flow_states();
  const std::vector<Vec> jump_states = bundle.jump_states();
  safe.insert(safe.end(), jump_states.begin(), jump_states.end());
  data.safe_points = thin_safe_sets(safe, bundle.ring_samples, thin_standoff);
  return data;
}

double q_c(const BarrierNet& net, const HybridSystem& sys, const Vec& z,
           const Vec& u_c, double t, double kappa) {
  double h;
  Vec g;
  net.value_and_grad(z, h, g);
  const Vec w = sys.est_flow(z, t, u_c);
  const double delta = sys.err_flow(z, t, u_c);
  return g.dot(w) - g.norm() * delta + kappa * h;
}

double q_d(const BarrierNet& net, const HybridSystem& sys, const Vec& z,
           const Vec& u_d, double t, double lip_bar) {
  const Vec z_plus = sys.est_jump(z, t, u_d);
  const double delta = sys.err_jump(z, t, u_d);
  return net.forward(z_plus) - lip_bar * delta;
}

namespace {

double hinge(double r) { return r > 0.0 ? r : 0.0; }

// Fixed chunk size so the chunk layout — and hence per-chunk floating-point
// accumulation — is independent of the thread count.
constexpr int kChunkSize = 64;

int num_chunks(int n) { return (n + kChunkSize - 1) / kChunkSize; }

// Deterministic parallel map: fixed-size contiguous chunks, results merged in
// chunk order by the caller. body(chunk_index, begin, end).
void parallel_chunks(int n, int threads,
                     const std::function<void(int, int, int)>& body) {
  threads = std::max(1, threads);
  const int chunks = num_chunks(n);
  auto run_chunk = [&body, n](int c) {
    const int begin = c * kChunkSize;
    const int end = std::min(n, begin + kChunkSize);
    body(c, begin, end);
  };
  if (threads == 1 || chunks <= 1) {
    for (int c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }
  std::vector<std::thread> pool;
  const int workers = std::min(threads, chunks);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&run_chunk, w, workers, chunks]() {
      for (int c = w; c < chunks; c += workers) run_chunk(c);
    });
  for (auto& th : pool) th.join();
}

void check_sizes(const TrainingData& data, const DualVars& lam) {
  if (lam.safe.size() != static_cast<long>(data.safe_points.size()) ||
      lam.unsafe.size() != static_cast<long>(data.ring_points.size()) ||
      lam.dyn_c.size() != static_cast<long>(data.flow.size()) ||
      lam.dyn_d.size() != static_cast<long>(data.jump.size()))
    throw std::invalid_argument("multiplier vectors not sized to their data sets");
}

}  // namespace

double Residuals::violation_fraction(int family) const {
  const Vec* v = nullptr;
  switch (family) {
    case 0: v = &safe; break;
    case 1: v = &unsafe; break;
    case 2: v = &dyn_c; break;
    case 3: v = &dyn_d; break;
    default: throw std::invalid_argument("violation_fraction: bad family");
  }
  if (v->size() == 0) return 0.0;
  int count = 0;
  for (int i = 0; i < v->size(); ++i)
    if ((*v)[i] > 0.0) ++count;
  return static_cast<double>(count) / static_cast<double>(v->size());
}

Residuals compute_residuals(const BarrierNet& net, const HybridSystem& sys,
                            const TrainingData& data, const Hyperparams& hp) {
  Residuals res;
  res.safe.resize(data.safe_points.size());
  res.unsafe.resize(data.ring_points.size());
  res.dyn_c.resize(data.flow.size());
  res.dyn_d.resize(data.jump.size());

  parallel_chunks(static_cast<int>(data.safe_points.size()), hp.num_threads,
                  [&](int, int b, int e) {
                    for (int i = b; i < e; ++i)
                      res.safe[i] = hp.gamma_safe - net.forward(data.safe_points[i]);
                  });
  parallel_chunks(static_cast<int>(data.ring_points.size()), hp.num_threads,
                  [&](int, int b, int e) {
                    for (int i = b; i < e; ++i)
                      res.unsafe[i] = net.forward(data.ring_points[i]) + hp.gamma_unsafe;
                  });
  parallel_chunks(static_cast<int>(data.flow.size()), hp.num_threads,
                  [&](int, int b, int e) {
                    for (int i = b; i < e; ++i) {
                      const auto& s = data.flow[i];
                      res.dyn_c[i] =
                          hp.gamma_dyn_c - q_c(net, sys, s.z, s.u, s.t, hp.alpha_gain);
                    }
                  });
  parallel_chunks(static_cast<int>(data.jump.size()), hp.num_threads,
                  [&](int, int b, int e) {
                    for (int i = b; i < e; ++i) {
                      const auto& s = data.jump[i];
                      res.dyn_d[i] =
                          hp.gamma_dyn_d - q_d(net, sys, s.z, s.u, s.t, hp.lip_bar);
                    }
                  });
  return res;
}

double lagrangian(const BarrierNet& net, const HybridSystem& sys,
                  const TrainingData& data, const Hyperparams& hp,
                  const DualVars& lam, Residuals* residuals) {
  check_sizes(data, lam);
  const Residuals res = compute_residuals(net, sys, data, hp);
  double L = hp.weight_decay * net.param_squared_norm();
  auto add_family = [&L, m = hp.margin](const Vec& lambda, const Vec& r) {
    if (r.size() == 0) return;
    double s = 0.0;
    for (int i = 0; i < r.size(); ++i) s += lambda[i] * hinge(r[i] + m);
    L += s / static_cast<double>(r.size());
  };
  add_family(lam.safe, res.safe);
  add_family(lam.unsafe, res.unsafe);
  add_family(lam.dyn_c, res.dyn_c);
  add_family(lam.dyn_d, res.dyn_d);
  if (residuals) *residuals = res;
  return L;
}

ParamGrad lagrangian_grad(const BarrierNet& net, const HybridSystem& sys,
                          const TrainingData& data, const Hyperparams& hp,
                          const DualVars& lam, Residuals* residuals) {
  check_sizes(data, lam);
  Residuals res;
  res.safe.resize(data.safe_points.size());
  res.unsafe.resize(data.ring_points.size());
  res.dyn_c.resize(data.flow.size());
  res.dyn_d.resize(data.jump.size());

  const int threads = std::max(1, hp.num_threads);
  const int max_chunks = std::max(
      {1, num_chunks(static_cast<int>(data.safe_points.size())),
       num_chunks(static_cast<int>(data.ring_points.size())),
       num_chunks(static_cast<int>(data.flow.size())),
       num_chunks(static_cast<int>(data.jump.size()))});
  std::vector<ParamGrad> partial(max_chunks);
  for (auto& g : partial) g = net.zero_grad();

  const double n_safe = std::max<std::size_t>(1, data.safe_points.size());
  const double n_ring = std::max<std::size_t>(1, data.ring_points.size());
  const double n_flow = std::max<std::size_t>(1, data.flow.size());
  const double n_jump = std::max<std::size_t>(1, data.jump.size());

  parallel_chunks(static_cast<int>(data.safe_points.size()), threads,
                  [&](int c, int b, int e) {
                    thread_local BarrierNet::EvalWorkspace ws;
                    for (int i = b; i < e; ++i) {
                      const double h = net.forward_cached(data.safe_points[i], ws);
                      res.safe[i] = hp.gamma_safe - h;
                      if (res.safe[i] + hp.margin > 0.0)
                        net.accumulate_cached(ws, -lam.safe[i] / n_safe, Vec(),
                                              partial[c]);
                    }
                  });
  parallel_chunks(static_cast<int>(data.ring_points.size()), threads,
                  [&](int c, int b, int e) {
                    thread_local BarrierNet::EvalWorkspace ws;
                    for (int i = b; i < e; ++i) {
                      const double h = net.forward_cached(data.ring_points[i], ws);
                      res.unsafe[i] = h + hp.gamma_unsafe;
                      if (res.unsafe[i] + hp.margin > 0.0)
                        net.accumulate_cached(ws, lam.unsafe[i] / n_ring, Vec(),
                                              partial[c]);
                    }
                  });
  parallel_chunks(
      static_cast<int>(data.flow.size()), threads, [&](int c, int b, int e) {
        thread_local BarrierNet::EvalWorkspace ws;
        for (int i = b; i < e; ++i) {
          const auto& s = data.flow[i];
          const double h = net.forward_cached(s.z, ws);
          const Vec g = net.grad_z_cached(ws);
          const Vec w = sys.est_flow(s.z, s.t, s.u);
          const double delta = sys.err_flow(s.z, s.t, s.u);
          const double gn = g.norm();
          res.dyn_c[i] = hp.gamma_dyn_c - (g.dot(w) - gn * delta + hp.alpha_gain * h);
          if (res.dyn_c[i] + hp.margin > 0.0) {
            const double coeff = -lam.dyn_c[i] / n_flow;
            Vec dir = w;
            // Euclidean-norm derivative; subgradient 0 at grad h = 0.
            if (delta > 0.0 && gn > 1e-300) dir -= (delta / gn) * g;
            net.accumulate_cached(ws, coeff * hp.alpha_gain, coeff * dir,
                                  partial[c]);
          }
        }
      });
  parallel_chunks(
      static_cast<int>(data.jump.size()), threads, [&](int c, int b, int e) {
        thread_local BarrierNet::EvalWorkspace ws;
        for (int i = b; i < e; ++i) {
          const auto& s = data.jump[i];
          const Vec z_plus = sys.est_jump(s.z, s.t, s.u);
          const double delta = sys.err_jump(s.z, s.t, s.u);
          res.dyn_d[i] =
              hp.gamma_dyn_d - (net.forward_cached(z_plus, ws) - hp.lip_bar * delta);
          if (res.dyn_d[i] + hp.margin > 0.0)
            net.accumulate_cached(ws, -lam.dyn_d[i] / n_jump, Vec(), partial[c]);
        }
      });

  ParamGrad grad = net.zero_grad();
  for (const auto& g : partial) grad.axpy(1.0, g);
  // Weight decay mu * ||theta||^2.
  for (std::size_t l = 0; l < grad.dW.size(); ++l) {
    grad.dW[l] += 2.0 * hp.weight_decay * net.weights()[l];
    grad.db[l] += 2.0 * hp.weight_decay * net.biases()[l];
  }
  if (residuals) *residuals = res;
  return grad;
}

Residuals primal_step(BarrierNet& net, const HybridSystem& sys,
                      const TrainingData& data, const Hyperparams& hp,
                      const DualVars& lam) {
  Residuals res;
  const ParamGrad grad = lagrangian_grad(net, sys, data, hp, lam, &res);
  if (!grad.allFinite())
    throw std::runtime_error("primal_step: non-finite gradient");
  net.apply_update(hp.eta, grad);
  return res;
}

void dual_step(const Residuals& residuals, DualVars& lam, double beta) {
  if (beta <= 0.0) throw std::invalid_argument("dual_step: beta <= 0");
  auto update = [beta](Vec& l, const Vec& r) {
    for (int i = 0; i < l.size(); ++i) l[i] = std::max(0.0, l[i] + beta * r[i]);
  };
  update(lam.safe, residuals.safe);
  update(lam.unsafe, residuals.unsafe);
  update(lam.dyn_c, residuals.dyn_c);
  update(lam.dyn_d, residuals.dyn_d);
}

void TrainingTrace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("TrainingTrace: cannot open " + path);
  out.precision(17);
  out << "epoch,lagrangian,viol_safe,viol_unsafe,viol_dyn_c,viol_dyn_d,"
         "theta_norm,max_lambda_safe,max_lambda_unsafe,max_lambda_dyn_c,"
         "max_lambda_dyn_d\n";
  for (const auto& row : rows) {
    out << row.epoch << ',' << row.lagrangian << ',' << row.viol_safe << ','
        << row.viol_unsafe << ',' << row.viol_dyn_c << ',' << row.viol_dyn_d
        << ',' << row.theta_norm << ',' << row.max_lambda_safe << ','
        << row.max_lambda_unsafe << ',' << row.max_lambda_dyn_c << ','
        << row.max_lambda_dyn_d << '\n';
  }
}

TrainResult train(const HybridSystem& sys, const TrainingData& data,
                  const Hyperparams& hp, std::vector<int> hidden_dims) {
  hp.validate();
  if (data.flow.empty()) throw std::runtime_error("train: no flow samples");

  std::vector<int> dims;
  dims.push_back(static_cast<int>(data.flow.front().z.size()));
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(1);

  TrainResult result;
  result.net = BarrierNet(dims, hp.seed);
  result.best_net = result.net;
  result.best_violation = std::numeric_limits<double>::infinity();

  DualVars lam = DualVars::ones(static_cast<int>(data.safe_points.size()),
                                static_cast<int>(data.ring_points.size()),
                                static_cast<int>(data.flow.size()),
                                static_cast<int>(data.jump.size()));

  auto max_or_zero = [](const Vec& v) { return v.size() ? v.maxCoeff() : 0.0; };

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    Residuals res_pre;
    const ParamGrad grad = lagrangian_grad(result.net, sys, data, hp, lam, &res_pre);
    if (!grad.allFinite())
      throw std::runtime_error("train: non-finite gradient at epoch " +
                               std::to_string(epoch));

    double L = hp.weight_decay * result.net.param_squared_norm();
    auto add = [&L, m = hp.margin](const Vec& lambda, const Vec& r) {
      if (r.size() == 0) return;
      double s = 0.0;
      for (int i = 0; i < r.size(); ++i) s += lambda[i] * hinge(r[i] + m);
      L += s / static_cast<double>(r.size());
    };
    add(lam.safe, res_pre.safe);
    add(lam.unsafe, res_pre.unsafe);
    add(lam.dyn_c, res_pre.dyn_c);
    add(lam.dyn_d, res_pre.dyn_d);
    if (!std::isfinite(L)) throw std::runtime_error("train: non-finite Lagrangian");

    TraceRow row;
    row.epoch = epoch;
    row.lagrangian = L;
    row.viol_safe = res_pre.violation_fraction(0);
    row.viol_unsafe = res_pre.violation_fraction(1);
    row.viol_dyn_c = res_pre.violation_fraction(2);
    row.viol_dyn_d = res_pre.violation_fraction(3);
    row.theta_norm = std::sqrt(result.net.param_squared_norm());
    row.max_lambda_safe = max_or_zero(lam.safe);
    row.max_lambda_unsafe = max_or_zero(lam.unsafe);
    row.max_lambda_dyn_c = max_or_zero(lam.dyn_c);
    row.max_lambda_dyn_d = max_or_zero(lam.dyn_d);
    result.trace.rows.push_back(row);

    // Track the best iterate at the evaluated parameters, then update both
    // players from the same batch evaluation.
    const double total_violation =
        res_pre.violation_fraction(0) + res_pre.violation_fraction(1) +
        res_pre.violation_fraction(2) + res_pre.violation_fraction(3);
    if (total_violation < result.best_violation) {
      result.best_violation = total_violation;
      result.best_net = result.net;
    }

    result.net.apply_update(hp.eta, grad);
    if (hp.margin > 0.0) {
      Residuals shifted = res_pre;
      for (Vec* v : {&shifted.safe, &shifted.unsafe, &shifted.dyn_c, &shifted.dyn_d})
        v->array() += hp.margin;
      dual_step(shifted, lam, hp.beta);
    } else {
      dual_step(res_pre, lam, hp.beta);
    }
  }
  if (hp.epochs == 0) result.best_violation = 0.0;
  return result;
}

}  // namespace rhcbf
