#pragma once

#include <cstdint>
#include <vector>

#include "wdlab/model.hpp"
#include "wdlab/tensor.hpp"

namespace wdlab {

enum class Normalization { none, non_affine };

struct MLPSpec {
  /// Input width, hidden widths, output width.
  std::vector<Index> layer_widths;
  Normalization normalization = Normalization::none;
  bool skip_connections = false;
  /// Final weight matrix becomes a fixed buffer of the model (no bias).
  bool last_layer_fixed = false;
  /// Output layer weights are drawn with std init_std / sqrt(fan_in);
  /// hidden layers use He initialization.
  double init_std = 1.0;
  /// Denominator offset of the non-affine normalization.
  double norm_eps = 1e-5;
  LossKind loss = LossKind::softmax_xent;

  Index hidden_layers() const { return static_cast<Index>(layer_widths.size()) - 2; }

  friend bool operator==(const MLPSpec&, const MLPSpec&) = default;
};

/// Fully connected ReLU network.
///
/// Each hidden layer computes relu(norm(h W + b)), optionally added to the
/// incoming activations when the widths agree. With normalization enabled
/// the skip branch is normalized as well.
class MlpModel final : public Model {
 public:
  MlpModel(MLPSpec spec, RowMatrix fixed_last_layer);

  LossKind loss_kind() const override { return spec_.loss; }
  Index output_dim() const override { return spec_.layer_widths.back(); }
  Var outputs(Tape& tape, const ParamSet& params, const RowMatrix& inputs) const override;

  const MLPSpec& spec() const { return spec_; }
  const RowMatrix& fixed_last_layer() const { return fixed_last_; }

 private:
  MLPSpec spec_;
  RowMatrix fixed_last_;
};

struct BuiltMlp {
  MlpModel model;
  ParamSet params;
};

/// Deterministic construction from `seed`. Throws ConfigError for fewer
/// than two widths or non-positive widths.
BuiltMlp build_mlp(const MLPSpec& spec, std::uint64_t seed);

/// Spec whose model satisfies h(a w, x) = h(w, x) for every a > 0: the last
/// layer is fixed, every trainable linear layer is followed by a non-affine
/// normalization without offset, and skip branches are normalized.
MLPSpec make_scale_invariant(MLPSpec spec);

/// L(w) = 1/2 sum_i d_i w_i^2, independent of the batch. Single parameter
/// "w" of size d. Used as a closed-form test problem.
class QuadraticModel final : public Model {
 public:
  explicit QuadraticModel(FlatVector diagonal) : diagonal_(std::move(diagonal)) {}

  LossKind loss_kind() const override { return LossKind::squared; }
  Index output_dim() const override { return 0; }
  Var outputs(Tape& tape, const ParamSet& params, const RowMatrix& inputs) const override;
  Var loss(Tape& tape, const ParamSet& params, const DataBatch& batch) const override;

  const FlatVector& diagonal() const { return diagonal_; }
  ParamSet make_params(const Eigen::Ref<const FlatVector>& w) const;

 private:
  FlatVector diagonal_;
};

}  // namespace wdlab
