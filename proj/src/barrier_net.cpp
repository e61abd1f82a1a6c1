#include "rhcbf/barrier_net.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rhcbf {

void ParamGrad::setZero() {
  for (auto& m : dW) m.setZero();
  for (auto& v : db) v.setZero();
}

void ParamGrad::axpy(double alpha, const ParamGrad& other) {
  for (std::size_t l = 0; l < dW.size(); ++l) {
    dW[l] += alpha * other.dW[l];
    db[l] += alpha * other.db[l];
  }
}

double ParamGrad::squaredNorm() const {
  double s = 0.0;
  for (const auto& m : dW) s += m.squaredNorm();
  for (const auto& v : db) s += v.squaredNorm();
  return s;
}

bool ParamGrad::allFinite() const {
  for (const auto& m : dW)
    if (!m.allFinite()) return false;
  for (const auto& v : db)
    if (!v.allFinite()) return false;
  return true;
}

BarrierNet::BarrierNet(std::vector<int> layer_dims, std::uint64_t seed)
    : layer_dims_(std::move(layer_dims)) {
  if (layer_dims_.size() < 2)
    throw std::invalid_argument("BarrierNet: need at least two layer dims");
  if (layer_dims_.back() != 1)
    throw std::invalid_argument("BarrierNet: output dim must be 1");
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
    const int in = layer_dims_[l];
    const int out = layer_dims_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> unif(-bound, bound);
    Mat W(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) W(r, c) = unif(rng);
    Vec b(out);
    for (int r = 0; r < out; ++r) b[r] = unif(rng);
    W_.push_back(std::move(W));
    b_.push_back(std::move(b));
  }
}

int BarrierNet::parameter_count() const {
  int n = 0;
  for (std::size_t l = 0; l < W_.size(); ++l)
    n += static_cast<int>(W_[l].size() + b_[l].size());
  return n;
}

double BarrierNet::forward(const Vec& z) const {
  if (z.size() != layer_dims_.front())
    throw std::invalid_argument("BarrierNet::forward: dimension mismatch");
  Vec a = z;
  const int L = num_layers();
  for (int l = 0; l < L; ++l) {
    a = W_[l] * a + b_[l];
    if (l + 1 < L) a = a.array().tanh().matrix();
  }
  return a[0];
}

double BarrierNet::forward_cached(const Vec& z, EvalWorkspace& ws) const {
  if (z.size() != layer_dims_.front())
    throw std::invalid_argument("BarrierNet::forward: dimension mismatch");
  const int L = num_layers();
  ws.in.resize(L);
  ws.act.resize(L);
  ws.in[0] = z;
  for (int l = 0; l < L; ++l) {
    if (l > 0) ws.in[l] = ws.act[l - 1];
    ws.act[l].noalias() = W_[l] * ws.in[l];
    ws.act[l] += b_[l];
    if (l + 1 < L) ws.act[l] = ws.act[l].array().tanh().matrix();
  }
  return ws.act[L - 1][0];
}

Vec BarrierNet::grad_z_cached(EvalWorkspace& ws) const {
  const int L = num_layers();
  ws.bar.resize(L + 1);
  ws.bar[L] = Vec::Ones(1);
  for (int l = L - 1; l >= 0; --l) {
    if (l + 1 < L)
      ws.bar[l + 1].array() *= (1.0 - ws.act[l].array().square());
    ws.bar[l].noalias() = W_[l].transpose() * ws.bar[l + 1];
  }
  return ws.bar[0];
}

void BarrierNet::value_and_grad(const Vec& z, double& h, Vec& g) const {
  thread_local EvalWorkspace ws;
  h = forward_cached(z, ws);
  g = grad_z_cached(ws);
}

Vec BarrierNet::grad_z(const Vec& z) const {
  double h;
  Vec g;
  value_and_grad(z, h, g);
  return g;
}

ParamGrad BarrierNet::zero_grad() const {
  ParamGrad g;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    g.dW.push_back(Mat::Zero(W_[l].rows(), W_[l].cols()));
    g.db.push_back(Vec::Zero(b_[l].size()));
  }
  return g;
}

void BarrierNet::accumulate_cached(EvalWorkspace& ws, double value_coeff,
                                   const Vec& grad_coeff, ParamGrad& out) const {
  const int L = num_layers();
  const bool tangent = grad_coeff.size() > 0;
  if (tangent && grad_coeff.size() != layer_dims_.front())
    throw std::invalid_argument("BarrierNet::param_grad: grad_coeff dimension");

  // Tangent forward pass with v = grad_coeff, reusing the cached value-path
  // activations: tin carries the tangent of each layer input, tpre = W * tin.
  if (tangent) {
    ws.tin.resize(L);
    ws.tpre.resize(L);
    ws.tin[0] = grad_coeff;
    for (int l = 0; l < L; ++l) {
      if (l > 0)
        ws.tin[l] = (1.0 - ws.act[l - 1].array().square())
                        .matrix()
                        .cwiseProduct(ws.tpre[l - 1]);
      ws.tpre[l].noalias() = W_[l] * ws.tin[l];
    }
  }

  // Reverse pass over the (value, tangent) pair. Seeds: d(objective)/dh =
  // value_coeff, d(objective)/d(tangent output) = 1.
  ws.abar.resize(L + 1);
  ws.sbar.resize(L);
  if (tangent) {
    ws.tbar.resize(L + 1);
    ws.tsbar.resize(L);
  }
  ws.abar[L] = Vec::Constant(1, value_coeff);
  if (tangent) ws.tbar[L] = Vec::Ones(1);
  for (int l = L - 1; l >= 0; --l) {
    if (l + 1 < L) {
      // tanh: sigma' = 1 - a^2, sigma'' = -2 a (1 - a^2).
      const auto sp = (1.0 - ws.act[l].array().square());
      ws.sbar[l] = (ws.abar[l + 1].array() * sp).matrix();
      if (tangent) {
        ws.sbar[l].array() +=
            ws.tbar[l + 1].array() * (-2.0 * ws.act[l].array()) * sp *
            ws.tpre[l].array();
        ws.tsbar[l] = (ws.tbar[l + 1].array() * sp).matrix();
      }
    } else {
      ws.sbar[l] = ws.abar[l + 1];
      if (tangent) ws.tsbar[l] = ws.tbar[l + 1];
    }
    out.dW[l].noalias() += ws.sbar[l] * ws.in[l].transpose();
    out.db[l] += ws.sbar[l];
    if (tangent) out.dW[l].noalias() += ws.tsbar[l] * ws.tin[l].transpose();
    ws.abar[l].noalias() = W_[l].transpose() * ws.sbar[l];
    if (tangent) ws.tbar[l].noalias() = W_[l].transpose() * ws.tsbar[l];
  }
}

void BarrierNet::accumulate_param_grad(const LossTerm& term, ParamGrad& out) const {
  thread_local EvalWorkspace ws;
  forward_cached(term.z, ws);
  accumulate_cached(ws, term.value_coeff, term.grad_coeff, out);
}

ParamGrad BarrierNet::param_grad(const std::vector<LossTerm>& terms) const {
  ParamGrad g = zero_grad();
  for (const auto& term : terms) accumulate_param_grad(term, g);
  return g;
}

void BarrierNet::apply_update(double step, const ParamGrad& g) {
  for (std::size_t l = 0; l < W_.size(); ++l) {
    W_[l] -= step * g.dW[l];
    b_[l] -= step * g.db[l];
  }
}

void BarrierNet::scale_params(double factor) {
  for (std::size_t l = 0; l < W_.size(); ++l) {
    W_[l] *= factor;
    b_[l] *= factor;
  }
}

double BarrierNet::param_squared_norm() const {
  double s = 0.0;
  for (const auto& W : W_) s += W.squaredNorm();
  for (const auto& b : b_) s += b.squaredNorm();
  return s;
}

double operator_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  const Mat AtA = A.transpose() * A;
  Vec v = Vec::Ones(A.cols());
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 50; ++it) {
    Vec w = AtA * v;
    const double n = w.norm();
    if (n < 1e-300) return 0.0;
    w /= n;
    const double delta = (w - v).norm();
    v = w;
    lambda = n;
    if (delta < 1e-10) break;
  }
  return std::sqrt(lambda);
}

double BarrierNet::global_lipschitz_bound() const {
  double bound = 1.0;
  for (const auto& W : W_) bound *= operator_norm(W);
  return bound;
}

void BarrierNet::save(const std::string& path, std::uint64_t seed_meta,
                      const std::string& config_hash) const {
  nlohmann::json doc;
  doc["version"] = 1;
  doc["layer_dims"] = layer_dims_;
  doc["activation"] = "tanh";
  auto& ws = doc["weights"] = nlohmann::json::array();
  for (const auto& W : W_) {
    std::vector<double> flat;
    flat.reserve(W.size());
    for (int r = 0; r < W.rows(); ++r)
      for (int c = 0; c < W.cols(); ++c) flat.push_back(W(r, c));
    ws.push_back(std::move(flat));
  }
  auto& bs = doc["biases"] = nlohmann::json::array();
  for (const auto& b : b_) bs.push_back(std::vector<double>(b.begin(), b.end()));
  doc["metadata"] = {{"seed", seed_meta}, {"config_hash", config_hash}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("BarrierNet::save: cannot open " + path);
  out << doc.dump(2) << '\n';
}

BarrierNet BarrierNet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("BarrierNet::load: cannot open " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  if (!doc.contains("version") || doc["version"].get<int>() != 1)
    throw std::runtime_error("BarrierNet::load: unsupported checkpoint version");
  if (doc.value("activation", "") != std::string("tanh"))
    throw std::runtime_error("BarrierNet::load: unsupported activation");
  BarrierNet net;
  net.layer_dims_ = doc["layer_dims"].get<std::vector<int>>();
  const auto& ws = doc["weights"];
  const auto& bs = doc["biases"];
  if (ws.size() + 1 != net.layer_dims_.size() || bs.size() != ws.size())
    throw std::runtime_error("BarrierNet::load: layer count mismatch");
  for (std::size_t l = 0; l + 1 < net.layer_dims_.size(); ++l) {
    const int in_dim = net.layer_dims_[l];
    const int out_dim = net.layer_dims_[l + 1];
    const auto flat = ws[l].get<std::vector<double>>();
    const auto bias = bs[l].get<std::vector<double>>();
    if (static_cast<int>(flat.size()) != in_dim * out_dim ||
        static_cast<int>(bias.size()) != out_dim)
      throw std::runtime_error("BarrierNet::load: dimension mismatch");
    Mat W(out_dim, in_dim);
    for (int r = 0; r < out_dim; ++r)
      for (int c = 0; c < in_dim; ++c) W(r, c) = flat[r * in_dim + c];
    net.W_.push_back(std::move(W));
    net.b_.push_back(Eigen::Map<const Vec>(bias.data(), out_dim));
  }
  return net;
}

}  // namespace rhcbf
