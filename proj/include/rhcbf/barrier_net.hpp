#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace rhcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Gradient with respect to all network parameters, same shapes as the net.
struct ParamGrad {
  std::vector<Mat> dW;
  std::vector<Vec> db;

  void setZero();
  void axpy(double alpha, const ParamGrad& other);
  double squaredNorm() const;
  bool allFinite() const;
};

/// One additive term of a scalar training objective:
///   value_coeff * h(z) + <grad_coeff, grad_z h(z)>.
/// An empty grad_coeff means no gradient-path term.
struct LossTerm {
  Vec z;
  double value_coeff{0.0};
  Vec grad_coeff;
};

/// Scalar tanh MLP h(z; theta), twice continuously differentiable.
/// Hand-rolled differentiation: reverse mode for d/dz and d/dtheta of h,
/// forward-over-reverse for d/dtheta of directional gradient terms.
class BarrierNet {
 public:
  BarrierNet() = default;
  /// layer_dims = {n_in, hidden..., 1}; hidden layers tanh, output identity.
  BarrierNet(std::vector<int> layer_dims, std::uint64_t seed);

  int input_dim() const { return layer_dims_.front(); }
  const std::vector<int>& layer_dims() const { return layer_dims_; }
  int num_layers() const { return static_cast<int>(W_.size()); }
  int parameter_count() const;

  const std::vector<Mat>& weights() const { return W_; }
  const std::vector<Vec>& biases() const { return b_; }
  std::vector<Mat>& weights() { return W_; }
  std::vector<Vec>& biases() { return b_; }

  double forward(const Vec& z) const;
  Vec grad_z(const Vec& z) const;
  void value_and_grad(const Vec& z, double& h, Vec& g) const;

  /// Reusable per-thread scratch for the cached evaluation path. Holds the
  /// forward activations so value, state gradient, and parameter-gradient
  /// accumulation share one forward pass without reallocating.
  struct EvalWorkspace {
    std::vector<Vec> in, act, tin, tpre;
    std::vector<Vec> bar, abar, tbar, sbar, tsbar;
  };

  /// Runs the forward pass at z into ws; returns h(z).
  double forward_cached(const Vec& z, EvalWorkspace& ws) const;
  /// Reverse pass over ws (after forward_cached): grad_z h.
  Vec grad_z_cached(EvalWorkspace& ws) const;
  /// Accumulates d/dtheta [value_coeff * h + <grad_coeff, grad_z h>] reusing
  /// the activations in ws. An empty grad_coeff skips the tangent path.
  void accumulate_cached(EvalWorkspace& ws, double value_coeff,
                         const Vec& grad_coeff, ParamGrad& out) const;

  /// Exact d/dtheta of sum_i [c_i h(z_i) + <d_i, grad_z h(z_i)>].
  ParamGrad param_grad(const std::vector<LossTerm>& terms) const;
  /// Single-term variant, accumulating into `out`.
  void accumulate_param_grad(const LossTerm& term, ParamGrad& out) const;

  ParamGrad zero_grad() const;
  void apply_update(double step, const ParamGrad& g);  // theta -= step * g
  void scale_params(double factor);
  double param_squared_norm() const;

  /// Product of layer operator norms; upper bound on the global Lipschitz
  /// constant of h under the Euclidean norm (tanh slope <= 1).
  double global_lipschitz_bound() const;

  void save(const std::string& path, std::uint64_t seed_meta = 0,
            const std::string& config_hash = "") const;
  static BarrierNet load(const std::string& path);

 private:
  std::vector<int> layer_dims_;
  std::vector<Mat> W_;
  std::vector<Vec> b_;
};

/// Largest singular value by power iteration (50 iterations, tol 1e-10).
double operator_norm(const Mat& A);

}  // namespace rhcbf
