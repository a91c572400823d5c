#pragma once

#include <memory>
#include <span>
#include <vector>

#include "wdlab/tape.hpp"
#include "wdlab/tensor.hpp"

namespace wdlab {

/// A batch of examples. Classification tasks fill `labels`, regression
/// tasks fill `targets` (n x k).
struct DataBatch {
  RowMatrix inputs;
  std::vector<int> labels;
  RowMatrix targets;

  Index size() const { return inputs.rows(); }
  bool is_classification() const { return !labels.empty(); }

  /// Rows selected by `rows`, in that order (repeats allowed).
  DataBatch subset(std::span<const Index> rows) const;
  DataBatch example(Index row) const;

  /// Throws ShapeError unless inputs, labels and targets agree on n.
  void validate() const;

  friend bool operator==(const DataBatch&, const DataBatch&) = default;
};

enum class LossKind { softmax_xent, logistic_xent, squared };

/// Records the mean loss of per-example `outputs` against the batch labels.
/// The squared loss averages (output - target)^2 over every element.
Var record_loss(Tape& tape, Var outputs, const DataBatch& batch, LossKind kind);

/// A differentiable map (params, batch) -> scalar loss, with access to the
/// per-example outputs h(w, x).
class Model {
 public:
  virtual ~Model() = default;

  virtual LossKind loss_kind() const = 0;
  virtual Index output_dim() const = 0;

  /// Records h(w, x) for every input row; the result is n x output_dim.
  virtual Var outputs(Tape& tape, const ParamSet& params, const RowMatrix& inputs) const = 0;

  /// Records the scalar training loss. Defaults to record_loss(outputs(...)).
  virtual Var loss(Tape& tape, const ParamSet& params, const DataBatch& batch) const;
};

}  // namespace wdlab
