#include "wdlab/tape.hpp"

#include <cmath>
#include <string>

#include "wdlab/errors.hpp"

namespace wdlab {

namespace {

using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::param: return "param";
    case OpKind::constant: return "constant";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::add_bias: return "add_bias";
    case OpKind::relu: return "relu";
    case OpKind::mul: return "mul";
    case OpKind::mean: return "mean";
    case OpKind::normalize: return "normalize";
    case OpKind::softmax_xent: return "softmax_xent";
    case OpKind::logistic_xent: return "logistic_xent";
  }
  return "?";
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ShapeError("tape: invalid variable id " + std::to_string(v.id));
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

void Tape::check(Var v, const char* op) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw ShapeError(std::string(op) + ": invalid input variable " + std::to_string(v.id));
  }
}

Tensor Tape::round(Tensor t) const {
  if (policy_.is_identity()) return t;
  return t.quantized(policy_.compute_mode);
}

Var Tape::push(Node node) {
  if (!node.value.all_finite()) finite_ = false;
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(const ParamSet& params, std::size_t index) {
  Node n{OpKind::param, {}, round(params.tensor(index)), {}, {}, 0.0, static_cast<int>(index)};
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  return push(Node{OpKind::constant, {}, round(std::move(value)), {}, {}, 0.0, -1});
}

Var Tape::matmul(Var a, Var b) {
  check(a, "matmul");
  check(b, "matmul");
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.cols() != tb.rows()) shape_error("matmul", ta, tb);
  RowMatrix out = ta.matrix() * tb.matrix();
  return push(Node{OpKind::matmul, {a.id, b.id}, round(Tensor::from_matrix(out)), {}, {}, 0.0, -1});
}

Var Tape::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape() != tb.shape()) shape_error("add", ta, tb);
  Tensor out(ta.shape(), ta.data() + tb.data());
  return push(Node{OpKind::add, {a.id, b.id}, round(std::move(out)), {}, {}, 0.0, -1});
}

Var Tape::add_bias(Var a, Var b) {
  check(a, "add_bias");
  check(b, "add_bias");
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (tb.size() != ta.cols()) shape_error("add_bias", ta, tb);
  RowMatrix out = ta.matrix();
  out.rowwise() += tb.data().transpose();
  Tensor t(ta.shape(), Eigen::Map<const FlatVector>(out.data(), out.size()));
  return push(Node{OpKind::add_bias, {a.id, b.id}, round(std::move(t)), {}, {}, 0.0, -1});
}

Var Tape::relu(Var a) {
  check(a, "relu");
  const Tensor& ta = value(a);
  Tensor out(ta.shape(), ta.data().cwiseMax(0.0));
  return push(Node{OpKind::relu, {a.id}, round(std::move(out)), {}, {}, 0.0, -1});
}

Var Tape::mul(Var a, Var b) {
  check(a, "mul");
  check(b, "mul");
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape() != tb.shape()) shape_error("mul", ta, tb);
  Tensor out(ta.shape(), ta.data().cwiseProduct(tb.data()));
  return push(Node{OpKind::mul, {a.id, b.id}, round(std::move(out)), {}, {}, 0.0, -1});
}

Var Tape::mean(Var a) {
  check(a, "mean");
  return push(Node{OpKind::mean, {a.id}, round(Tensor::scalar(value(a).data().mean())), {}, {}, 0.0, -1});
}

Var Tape::normalize(Var a, double eps) {
  check(a, "normalize");
  if (eps < 0) throw DomainError("normalize: eps must be non-negative");
  const Tensor& ta = value(a);
  const auto in = ta.matrix();
  RowMatrix out(in.rows(), in.cols());
  FlatVector sigma(in.rows());
  for (Index r = 0; r < in.rows(); ++r) {
    const auto row = in.row(r).array();
    const Eigen::ArrayXd centered = row - row.mean();
    sigma[r] = std::sqrt(centered.square().mean());
    const double denom = sigma[r] + eps;
    if (denom > 0) {
      out.row(r) = (centered / denom).matrix().transpose();
    } else {
      out.row(r).setZero();
    }
  }
  Tensor t(ta.shape(), Eigen::Map<const FlatVector>(out.data(), out.size()));
  return push(Node{OpKind::normalize, {a.id}, round(std::move(t)), Tensor::from_vector(sigma), {}, eps, -1});
}

Var Tape::softmax_xent(Var logits, std::span<const int> labels) {
  check(logits, "softmax_xent");
  const Tensor& tz = value(logits);
  const auto z = tz.matrix();
  if (static_cast<Index>(labels.size()) != z.rows()) {
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(z.rows()) + " rows of logits");
  }
  RowMatrix probs(z.rows(), z.cols());
  double total = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= z.cols()) {
      throw DomainError("softmax_xent: label " + std::to_string(y) + " out of range for " +
                        std::to_string(z.cols()) + " classes");
    }
    const double zmax = z.row(r).maxCoeff();
    const Eigen::ArrayXd shifted = (z.row(r).array() - zmax).transpose();
    const double sum = shifted.exp().sum();
    const double lse = zmax + std::log(sum);
    total += lse - z(r, y);
    probs.row(r) = (shifted.exp() / sum).matrix().transpose();
  }
  Node n{OpKind::softmax_xent, {logits.id}, round(Tensor::scalar(total / static_cast<double>(z.rows()))),
         Tensor::from_matrix(probs), std::vector<int>(labels.begin(), labels.end()), 0.0, -1};
  return push(std::move(n));
}

Var Tape::logistic_xent(Var logits, std::span<const int> labels) {
  check(logits, "logistic_xent");
  const Tensor& tz = value(logits);
  if (tz.cols() != 1 && tz.rank() == 2) {
    throw ShapeError("logistic_xent: expects n x 1 logits, got " + shape_string(tz.shape()));
  }
  const Index n = tz.size();
  if (static_cast<Index>(labels.size()) != n) {
    throw ShapeError("logistic_xent: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " logits");
  }
  FlatVector sig(n);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != 0 && y != 1) throw DomainError("logistic_xent: label " + std::to_string(y) + " not in {0,1}");
    const double z = tz.data()[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
    sig[i] = sigmoid(z);
  }
  Node node{OpKind::logistic_xent, {logits.id}, round(Tensor::scalar(total / static_cast<double>(n))),
            Tensor::from_vector(sig), std::vector<int>(labels.begin(), labels.end()), 0.0, -1};
  return push(std::move(node));
}

void Tape::set_output(Var v) {
  if (node(v).value.size() != 1) throw ShapeError("tape: output must be a scalar");
  output_ = v.id;
}

Var Tape::output() const {
  if (output_ < 0) throw ShapeError("tape: no output designated");
  return Var{output_};
}

std::vector<FlatVector> Tape::backward(Var root, const Eigen::Ref<const FlatVector>& seed) const {
  check(root, "backward");
  if (seed.size() != value(root).size()) {
    throw ShapeError("backward: seed has " + std::to_string(seed.size()) + " values, root has " +
                     std::to_string(value(root).size()));
  }
  const bool round_grads = policy_.quantize_gradients && !policy_.is_identity();
  const NumericMode mode = policy_.compute_mode;

  std::vector<FlatVector> adj(nodes_.size());
  auto accumulate = [&](int id, FlatVector contribution) {
    if (round_grads) quantize_inplace(contribution, mode);
    auto& slot = adj[static_cast<std::size_t>(id)];
    if (slot.size() == 0) {
      slot = std::move(contribution);
    } else {
      slot += contribution;
      if (round_grads) quantize_inplace(slot, mode);
    }
  };

  adj[static_cast<std::size_t>(root.id)] = seed;
  for (int i = root.id; i >= 0; --i) {
    const FlatVector& g = adj[static_cast<std::size_t>(i)];
    if (g.size() == 0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    switch (n.kind) {
      case OpKind::param:
      case OpKind::constant:
        break;
      case OpKind::matmul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        ConstRowMap dc(g.data(), a.rows(), b.cols());
        RowMatrix da = dc * b.matrix().transpose();
        RowMatrix db = a.matrix().transpose() * dc;
        accumulate(n.inputs[0], Eigen::Map<const FlatVector>(da.data(), da.size()));
        accumulate(n.inputs[1], Eigen::Map<const FlatVector>(db.data(), db.size()));
        break;
      }
      case OpKind::add:
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      case OpKind::add_bias: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        ConstRowMap dc(g.data(), a.rows(), a.cols());
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], dc.colwise().sum().transpose());
        break;
      }
      case OpKind::relu: {
        const FlatVector& a = nodes_[n.inputs[0]].value.data();
        accumulate(n.inputs[0], (a.array() > 0.0).select(g, 0.0));
        break;
      }
      case OpKind::mul: {
        const FlatVector& a = nodes_[n.inputs[0]].value.data();
        const FlatVector& b = nodes_[n.inputs[1]].value.data();
        accumulate(n.inputs[0], g.cwiseProduct(b));
        accumulate(n.inputs[1], g.cwiseProduct(a));
        break;
      }
      case OpKind::mean: {
        const Index count = nodes_[n.inputs[0]].value.size();
        accumulate(n.inputs[0], FlatVector::Constant(count, g[0] / static_cast<double>(count)));
        break;
      }
      case OpKind::normalize: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const auto in = a.matrix();
        ConstRowMap dy(g.data(), in.rows(), in.cols());
        const double m = static_cast<double>(in.cols());
        RowMatrix da(in.rows(), in.cols());
        for (Index r = 0; r < in.rows(); ++r) {
          const double sigma = n.saved.data()[r];
          const double s = sigma + n.eps;
          if (s <= 0) {
            da.row(r).setZero();
            continue;
          }
          const Eigen::RowVectorXd c = in.row(r).array() - in.row(r).mean();
          Eigen::RowVectorXd dc = dy.row(r) / s;
          if (sigma > 0) dc -= (dy.row(r).dot(c) / (s * s)) * c / (m * sigma);
          da.row(r) = dc.array() - dc.mean();
        }
        accumulate(n.inputs[0], Eigen::Map<const FlatVector>(da.data(), da.size()));
        break;
      }
      case OpKind::softmax_xent: {
        RowMatrix dz = n.saved.matrix();
        for (Index r = 0; r < dz.rows(); ++r) dz(r, n.labels[static_cast<std::size_t>(r)]) -= 1.0;
        dz *= g[0] / static_cast<double>(dz.rows());
        accumulate(n.inputs[0], Eigen::Map<const FlatVector>(dz.data(), dz.size()));
        break;
      }
      case OpKind::logistic_xent: {
        const FlatVector& sig = n.saved.data();
        FlatVector dz(sig.size());
        for (Index k = 0; k < sig.size(); ++k) dz[k] = sig[k] - n.labels[static_cast<std::size_t>(k)];
        dz *= g[0] / static_cast<double>(sig.size());
        accumulate(n.inputs[0], dz);
        break;
      }
    }
  }
  return adj;
}

}  // namespace wdlab
