#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wdlab/precision.hpp"
#include "wdlab/tensor.hpp"

namespace wdlab {

enum class OpKind {
  param,
  constant,
  matmul,
  add,
  add_bias,
  relu,
  mul,
  mean,
  normalize,
  softmax_xent,
  logistic_xent,
};

const char* op_name(OpKind kind);

/// Handle to a node recorded on a Tape.
struct Var {
  int id = -1;
};

/// Reverse-mode tape over a fixed set of dense primitives.
///
/// Nodes are appended in execution order, so inputs always precede their
/// consumers. Forward values are saved by value and never mutated. Under a
/// non-identity precision policy every primitive output is rounded into the
/// compute format; matmul accumulates in double and rounds once.
class Tape {
 public:
  struct Node {
    OpKind kind;
    std::vector<int> inputs;
    Tensor value;
    Tensor saved;             // softmax probabilities, normalization scale, ...
    std::vector<int> labels;  // fused losses
    double eps = 0.0;         // normalize
    int param_index = -1;     // param leaves
  };

  explicit Tape(MixedPrecisionPolicy policy = {}) : policy_(policy) {}

  Var param(const ParamSet& params, std::size_t index);
  Var constant(Tensor value);
  Var constant(const Eigen::Ref<const RowMatrix>& value) { return constant(Tensor::from_matrix(value)); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  /// a (n x m) + b broadcast over rows; b has m elements.
  Var add_bias(Var a, Var b);
  Var relu(Var a);
  Var mul(Var a, Var b);
  /// Mean over every element, producing a scalar.
  Var mean(Var a);
  /// Per-row (a - mean) / (std + eps), population std over the feature axis.
  /// With eps = 0 a row of zero spread maps to zeros.
  Var normalize(Var a, double eps);
  /// Mean softmax cross-entropy of n x c logits against class indices.
  Var softmax_xent(Var logits, std::span<const int> labels);
  /// Mean binary cross-entropy of n x 1 logits against {0, 1} labels.
  Var logistic_xent(Var logits, std::span<const int> labels);

  const Tensor& value(Var v) const { return node(v).value; }
  const Node& node(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  void set_output(Var v);
  Var output() const;

  const MixedPrecisionPolicy& policy() const { return policy_; }
  /// True when no recorded value is inf or NaN.
  bool finite() const { return finite_; }

  /// Parameter values the tape was recorded against.
  const FlatVector& recorded_params() const { return recorded_params_; }
  void record_params(const ParamSet& params) { recorded_params_ = params.flatten(); }

  /// Adjoint of every node for the cotangent `seed` placed on `root`, laid
  /// out like the node's value. Nodes that do not reach `root` get size 0.
  std::vector<FlatVector> backward(Var root, const Eigen::Ref<const FlatVector>& seed) const;

 private:
  Var push(Node node);
  Tensor round(Tensor t) const;
  void check(Var v, const char* op) const;

  MixedPrecisionPolicy policy_;
  std::vector<Node> nodes_;
  int output_ = -1;
  bool finite_ = true;
  FlatVector recorded_params_;
};

}  // namespace wdlab
