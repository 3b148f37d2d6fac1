#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace scout {

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotScalarLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major 2-D tensor of doubles. Vectors are (1, n) rows; scalars are
// (1, 1).
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  static Tensor zeros(std::size_t r, std::size_t c) { return Tensor(r, c); }
  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }
  static Tensor row(const std::vector<double>& v) {
    Tensor t(1, v.size());
    t.data = v;
    return t;
  }

  std::size_t size() const { return rows * cols; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double value() const { return data.at(0); }
  bool same_shape(const Tensor& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

using NodeId = int;

// Numerical-safety clamps, applied inside the loss ops.
inline constexpr double kBceEps = 1e-7;
inline constexpr double kLogSigmaMin = -5.0;
inline constexpr double kLogSigmaMax = 2.0;

// Define-by-run reverse-mode tape. Forward values are computed eagerly; every
// op output is checked for NaN/Inf. Nodes are append-only, so the graph is
// acyclic by construction.
class Tape {
 public:
  // Leaves. Parameters are leaves flagged for gradient collection.
  NodeId constant(Tensor value);
  NodeId parameter(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);          // elementwise
  NodeId scale(NodeId a, double factor);   // constant scalar multiply
  NodeId add_bias(NodeId m, NodeId bias);  // (B,n) + (1,n) row broadcast
  NodeId affine(NodeId x, NodeId w, NodeId b) {
    return add_bias(matmul(x, w), b);
  }
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId softplus(NodeId a);
  NodeId concat(NodeId a, NodeId b);  // along columns
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId l1_norm(NodeId a);
  // Mean elementwise binary cross-entropy; predictions clamped to
  // [kBceEps, 1 - kBceEps].
  NodeId bce(NodeId pred, NodeId label);
  // Per-row sum of Gaussian negative log likelihood, averaged over rows.
  // log_sigma is clamped to [kLogSigmaMin, kLogSigmaMax].
  NodeId gaussian_nll(NodeId x, NodeId mu, NodeId log_sigma);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }

  // Reverse-mode sweep from a scalar loss. Afterwards grad(id) is valid for
  // every parameter leaf (zero if the loss does not depend on it).
  void backward(NodeId loss);
  const Tensor& grad(NodeId id) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kConstant,
    kParameter,
    kMatMul,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddBias,
    kTanh,
    kRelu,
    kSigmoid,
    kSoftplus,
    kConcat,
    kSum,
    kMean,
    kL1Norm,
    kBce,
    kGaussianNll,
  };

  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    Tensor value;
    double aux = 0.0;  // scale factor
  };

  NodeId push(Op op, std::vector<NodeId> inputs, Tensor value,
              double aux = 0.0);
  static void check_finite(const Tensor& t, const char* where);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
};

struct AdamHyper {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Per-parameter-set adaptive moment state (decoupled weight decay).
struct OptimState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
  AdamHyper hyper;

  static OptimState init(const std::vector<Tensor>& params, AdamHyper hyper);
};

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
               OptimState& state);

// Central-difference gradient check. Returns the max relative error between
// `analytic_grads` and finite differences of `f` over every coordinate, with
// denominator max(|g_ad|, |g_fd|, 1e-8).
double finite_diff_check(
    const std::function<double(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> params, const std::vector<Tensor>& analytic_grads,
    double h = 1e-5);

}  // namespace scout
