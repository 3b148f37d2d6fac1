#include "scout/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace scout {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw ShapeMismatch(msg);
}

}  // namespace

void Tape::check_finite(const Tensor& t, const char* where) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw NonFinite(std::string("non-finite value in ") + where);
    }
  }
}

NodeId Tape::push(Op op, std::vector<NodeId> inputs, Tensor value,
                  double aux) {
  check_finite(value, "op output");
  nodes_.push_back(Node{op, std::move(inputs), std::move(value), aux});
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(Tensor value) {
  return push(Op::kConstant, {}, std::move(value));
}

NodeId Tape::parameter(Tensor value) {
  return push(Op::kParameter, {}, std::move(value));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.cols == tb.rows, "matmul: inner dimensions differ");
  Tensor out(ta.rows, tb.cols);
  for (std::size_t i = 0; i < ta.rows; ++i) {
    for (std::size_t k = 0; k < ta.cols; ++k) {
      const double aik = ta.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = &tb.data[k * tb.cols];
      double* orow = &out.data[i * out.cols];
      for (std::size_t j = 0; j < tb.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return push(Op::kMatMul, {a, b}, std::move(out));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "add: shapes differ");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
  return push(Op::kAdd, {a, b}, std::move(out));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "sub: shapes differ");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= tb.data[i];
  return push(Op::kSub, {a, b}, std::move(out));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.same_shape(tb), "mul: shapes differ");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= tb.data[i];
  return push(Op::kMul, {a, b}, std::move(out));
}

NodeId Tape::scale(NodeId a, double factor) {
  Tensor out = value(a);
  for (double& v : out.data) v *= factor;
  return push(Op::kScale, {a}, std::move(out), factor);
}

NodeId Tape::add_bias(NodeId m, NodeId bias) {
  const Tensor& tm = value(m);
  const Tensor& tb = value(bias);
  require(tb.rows == 1 && tb.cols == tm.cols, "add_bias: bias shape");
  Tensor out = tm;
  for (std::size_t i = 0; i < tm.rows; ++i) {
    for (std::size_t j = 0; j < tm.cols; ++j) out.at(i, j) += tb.at(0, j);
  }
  return push(Op::kAddBias, {m, bias}, std::move(out));
}

NodeId Tape::tanh(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::tanh(v);
  return push(Op::kTanh, {a}, std::move(out));
}

NodeId Tape::relu(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(Op::kRelu, {a}, std::move(out));
}

NodeId Tape::sigmoid(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(Op::kSigmoid, {a}, std::move(out));
}

NodeId Tape::softplus(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) {
    v = v > 30.0 ? v : std::log1p(std::exp(v));
  }
  return push(Op::kSoftplus, {a}, std::move(out));
}

NodeId Tape::concat(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rows == tb.rows, "concat: row counts differ");
  Tensor out(ta.rows, ta.cols + tb.cols);
  for (std::size_t i = 0; i < ta.rows; ++i) {
    for (std::size_t j = 0; j < ta.cols; ++j) out.at(i, j) = ta.at(i, j);
    for (std::size_t j = 0; j < tb.cols; ++j)
      out.at(i, ta.cols + j) = tb.at(i, j);
  }
  return push(Op::kConcat, {a, b}, std::move(out));
}

NodeId Tape::sum(NodeId a) {
  double s = 0.0;
  for (double v : value(a).data) s += v;
  return push(Op::kSum, {a}, Tensor::scalar(s));
}

NodeId Tape::mean(NodeId a) {
  double s = 0.0;
  const Tensor& ta = value(a);
  for (double v : ta.data) s += v;
  return push(Op::kMean, {a}, Tensor::scalar(s / ta.size()));
}

NodeId Tape::l1_norm(NodeId a) {
  double s = 0.0;
  for (double v : value(a).data) s += std::abs(v);
  return push(Op::kL1Norm, {a}, Tensor::scalar(s));
}

NodeId Tape::bce(NodeId pred, NodeId label) {
  const Tensor& tp = value(pred);
  const Tensor& tl = value(label);
  require(tp.same_shape(tl), "bce: shapes differ");
  double loss = 0.0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    const double p = std::clamp(tp.data[i], kBceEps, 1.0 - kBceEps);
    const double y = tl.data[i];
    loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return push(Op::kBce, {pred, label}, Tensor::scalar(loss / tp.size()));
}

NodeId Tape::gaussian_nll(NodeId x, NodeId mu, NodeId log_sigma) {
  const Tensor& tx = value(x);
  const Tensor& tm = value(mu);
  const Tensor& ts = value(log_sigma);
  require(tx.same_shape(tm) && tx.same_shape(ts), "gaussian_nll: shapes");
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  double total = 0.0;
  for (std::size_t i = 0; i < tx.size(); ++i) {
    const double ls = std::clamp(ts.data[i], kLogSigmaMin, kLogSigmaMax);
    const double d = tx.data[i] - tm.data[i];
    total += ls + kHalfLog2Pi + d * d * 0.5 * std::exp(-2.0 * ls);
  }
  return push(Op::kGaussianNll, {x, mu, log_sigma},
              Tensor::scalar(total / tx.rows));
}

const Tensor& Tape::grad(NodeId id) const {
  return grads_.at(static_cast<std::size_t>(id));
}

void Tape::backward(NodeId loss) {
  const Tensor& lv = value(loss);
  if (lv.size() != 1) throw NotScalarLoss("backward: loss must be scalar");

  grads_.assign(nodes_.size(), Tensor{});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    grads_[i] = Tensor::zeros(nodes_[i].value.rows, nodes_[i].value.cols);
  }
  grads_[static_cast<std::size_t>(loss)].data[0] = 1.0;

  for (std::size_t idx = nodes_.size(); idx-- > 0;) {
    const Node& node = nodes_[idx];
    const Tensor& g = grads_[idx];
    bool all_zero = true;
    for (double v : g.data) {
      if (v != 0.0) {
        all_zero = false;
        break;
      }
    }
    if (all_zero) continue;

    switch (node.op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kMatMul: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        const Tensor& b = nodes_[node.inputs[1]].value;
        Tensor& ga = grads_[node.inputs[0]];
        Tensor& gb = grads_[node.inputs[1]];
        // ga += g * b^T; gb += a^T * g
        for (std::size_t i = 0; i < a.rows; ++i) {
          for (std::size_t j = 0; j < b.cols; ++j) {
            const double gij = g.at(i, j);
            if (gij == 0.0) continue;
            for (std::size_t k = 0; k < a.cols; ++k) {
              ga.at(i, k) += gij * b.at(k, j);
              gb.at(k, j) += a.at(i, k) * gij;
            }
          }
        }
        break;
      }
      case Op::kAdd: {
        for (std::size_t i = 0; i < g.size(); ++i) {
          grads_[node.inputs[0]].data[i] += g.data[i];
          grads_[node.inputs[1]].data[i] += g.data[i];
        }
        break;
      }
      case Op::kSub: {
        for (std::size_t i = 0; i < g.size(); ++i) {
          grads_[node.inputs[0]].data[i] += g.data[i];
          grads_[node.inputs[1]].data[i] -= g.data[i];
        }
        break;
      }
      case Op::kMul: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        const Tensor& b = nodes_[node.inputs[1]].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          grads_[node.inputs[0]].data[i] += g.data[i] * b.data[i];
          grads_[node.inputs[1]].data[i] += g.data[i] * a.data[i];
        }
        break;
      }
      case Op::kScale: {
        for (std::size_t i = 0; i < g.size(); ++i) {
          grads_[node.inputs[0]].data[i] += g.data[i] * node.aux;
        }
        break;
      }
      case Op::kAddBias: {
        Tensor& gm = grads_[node.inputs[0]];
        Tensor& gb = grads_[node.inputs[1]];
        for (std::size_t i = 0; i < g.rows; ++i) {
          for (std::size_t j = 0; j < g.cols; ++j) {
            gm.at(i, j) += g.at(i, j);
            gb.at(0, j) += g.at(i, j);
          }
        }
        break;
      }
      case Op::kTanh: {
        const Tensor& y = node.value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          grads_[node.inputs[0]].data[i] +=
              g.data[i] * (1.0 - y.data[i] * y.data[i]);
        }
        break;
      }
      case Op::kRelu: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x.data[i] > 0.0) grads_[node.inputs[0]].data[i] += g.data[i];
        }
        break;
      }
      case Op::kSigmoid: {
        const Tensor& y = node.value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          grads_[node.inputs[0]].data[i] +=
              g.data[i] * y.data[i] * (1.0 - y.data[i]);
        }
        break;
      }
      case Op::kSoftplus: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          grads_[node.inputs[0]].data[i] +=
              g.data[i] / (1.0 + std::exp(-x.data[i]));
        }
        break;
      }
      case Op::kConcat: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        const Tensor& b = nodes_[node.inputs[1]].value;
        Tensor& ga = grads_[node.inputs[0]];
        Tensor& gb = grads_[node.inputs[1]];
        for (std::size_t i = 0; i < a.rows; ++i) {
          for (std::size_t j = 0; j < a.cols; ++j) {
            ga.at(i, j) += g.at(i, j);
          }
          for (std::size_t j = 0; j < b.cols; ++j) {
            gb.at(i, j) += g.at(i, a.cols + j);
          }
        }
        break;
      }
      case Op::kSum: {
        const double gs = g.data[0];
        for (double& v : grads_[node.inputs[0]].data) v += gs;
        break;
      }
      case Op::kMean: {
        const double gs = g.data[0] / nodes_[node.inputs[0]].value.size();
        for (double& v : grads_[node.inputs[0]].data) v += gs;
        break;
      }
      case Op::kL1Norm: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        const double gs = g.data[0];
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double s = x.data[i] > 0.0 ? 1.0 : (x.data[i] < 0.0 ? -1.0 : 0.0);
          grads_[node.inputs[0]].data[i] += gs * s;
        }
        break;
      }
      case Op::kBce: {
        const Tensor& p = nodes_[node.inputs[0]].value;
        const Tensor& y = nodes_[node.inputs[1]].value;
        const double gs = g.data[0] / p.size();
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (p.data[i] <= kBceEps || p.data[i] >= 1.0 - kBceEps) continue;
          const double pc = p.data[i];
          grads_[node.inputs[0]].data[i] +=
              gs * (pc - y.data[i]) / (pc * (1.0 - pc));
        }
        break;
      }
      case Op::kGaussianNll: {
        const Tensor& x = nodes_[node.inputs[0]].value;
        const Tensor& mu = nodes_[node.inputs[1]].value;
        const Tensor& ls = nodes_[node.inputs[2]].value;
        const double gs = g.data[0] / x.rows;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double lsc =
              std::clamp(ls.data[i], kLogSigmaMin, kLogSigmaMax);
          const double inv = std::exp(-2.0 * lsc);
          const double d = x.data[i] - mu.data[i];
          grads_[node.inputs[0]].data[i] += gs * d * inv;
          grads_[node.inputs[1]].data[i] -= gs * d * inv;
          if (ls.data[i] > kLogSigmaMin && ls.data[i] < kLogSigmaMax) {
            grads_[node.inputs[2]].data[i] += gs * (1.0 - d * d * inv);
          }
        }
        break;
      }
    }
  }
}

OptimState OptimState::init(const std::vector<Tensor>& params,
                            AdamHyper hyper) {
  OptimState st;
  st.hyper = hyper;
  for (const auto& p : params) {
    st.m.push_back(Tensor::zeros(p.rows, p.cols));
    st.v.push_back(Tensor::zeros(p.rows, p.cols));
  }
  return st;
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
               OptimState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeMismatch("adam_step: parameter/gradient count mismatch");
  }
  const AdamHyper& h = state.hyper;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].same_shape(grads[p])) {
      throw ShapeMismatch("adam_step: gradient shape mismatch");
    }
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double g = grads[p].data[i];
      double& m = state.m[p].data[i];
      double& v = state.v[p].data[i];
      m = h.beta1 * m + (1.0 - h.beta1) * g;
      v = h.beta2 * v + (1.0 - h.beta2) * g * g;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      double& w = params[p].data[i];
      w -= h.lr * (mhat / (std::sqrt(vhat) + h.eps) + h.weight_decay * w);
    }
  }
}

double finite_diff_check(
    const std::function<double(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> params, const std::vector<Tensor>& analytic_grads,
    double h) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = params[p].data[i];
      params[p].data[i] = orig + h;
      const double fp = f(params);
      params[p].data[i] = orig - h;
      const double fm = f(params);
      params[p].data[i] = orig;
      const double g_fd = (fp - fm) / (2.0 * h);
      const double g_ad = analytic_grads[p].data[i];
      const double denom =
          std::max({std::abs(g_ad), std::abs(g_fd), 1e-8});
      worst = std::max(worst, std::abs(g_ad - g_fd) / denom);
    }
  }
  return worst;
}

}  // namespace scout
