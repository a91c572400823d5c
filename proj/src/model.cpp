#include "wdlab/model.hpp"

#include <string>

#include "wdlab/errors.hpp"

namespace wdlab {

DataBatch DataBatch::subset(std::span<const Index> rows) const {
  DataBatch out;
  out.inputs.resize(static_cast<Index>(rows.size()), inputs.cols());
  if (targets.size() > 0) out.targets.resize(static_cast<Index>(rows.size()), targets.cols());
  out.labels.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index r = rows[k];
    if (r < 0 || r >= size()) throw ShapeError("subset: row " + std::to_string(r) + " out of range");
    out.inputs.row(static_cast<Index>(k)) = inputs.row(r);
    if (!labels.empty()) out.labels.push_back(labels[static_cast<std::size_t>(r)]);
    if (targets.size() > 0) out.targets.row(static_cast<Index>(k)) = targets.row(r);
  }
  return out;
}

DataBatch DataBatch::example(Index row) const {
  const Index rows[] = {row};
  return subset(rows);
}

void DataBatch::validate() const {
  if (!labels.empty() && static_cast<Index>(labels.size()) != size()) {
    throw ShapeError("batch: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(size()) + " inputs");
  }
  if (targets.size() > 0 && targets.rows() != size()) {
    throw ShapeError("batch: " + std::to_string(targets.rows()) + " targets for " +
                     std::to_string(size()) + " inputs");
  }
}

Var record_loss(Tape& tape, Var outputs, const DataBatch& batch, LossKind kind) {
  switch (kind) {
    case LossKind::softmax_xent:
      return tape.softmax_xent(outputs, batch.labels);
    case LossKind::logistic_xent:
      return tape.logistic_xent(outputs, batch.labels);
    case LossKind::squared: {
      if (batch.targets.rows() != batch.size()) throw ShapeError("squared loss: batch has no targets");
      Var neg_target = tape.constant(RowMatrix(-batch.targets));
      Var diff = tape.add(outputs, neg_target);
      return tape.mean(tape.mul(diff, diff));
    }
  }
  throw ConfigError("unknown loss kind");
}

Var Model::loss(Tape& tape, const ParamSet& params, const DataBatch& batch) const {
  return record_loss(tape, outputs(tape, params, batch.inputs), batch, loss_kind());
}

}  // namespace wdlab
