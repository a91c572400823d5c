#pragma once

#include <cmath>
#include <cstdint>

#include "wdlab/model.hpp"
#include "wdlab/precision.hpp"
#include "wdlab/tape.hpp"
#include "wdlab/tensor.hpp"

namespace wdlab {

struct ForwardResult {
  double loss = 0.0;
  Tape tape;

  /// False when any recorded value overflowed or went NaN. Under an
  /// emulated precision policy this is the divergence signal.
  bool finite() const { return tape.finite() && std::isfinite(loss); }
};

/// Records the model's loss on `batch` (no weight-decay term).
ForwardResult forward(const Model& model, const ParamSet& params, const DataBatch& batch,
                      const MixedPrecisionPolicy& policy = {});

/// Gradient of the recorded loss with respect to every parameter, flattened
/// in ParamSet order. Throws StaleTapeError if `params` changed since the
/// tape was recorded.
FlatVector gradient(const Tape& tape, const ParamSet& params);

/// Hessian-vector product by central differences of the gradient:
/// (g(w + h v) - g(w - h v)) / 2h with h = sqrt(eps) (1 + |w|) / max(|v|, 1).
FlatVector hvp(const Model& model, const ParamSet& params, const DataBatch& batch,
               const Eigen::Ref<const FlatVector>& v);

struct LossAndGradient {
  double loss = 0.0;
  FlatVector grad;
  bool finite = true;
};

LossAndGradient loss_and_gradient(const Model& model, const ParamSet& params, const DataBatch& batch,
                                  const MixedPrecisionPolicy& policy = {});

double evaluate_loss(const Model& model, const ParamSet& params, const DataBatch& batch,
                     const MixedPrecisionPolicy& policy = {});

/// Row i is the gradient of the loss on example i alone (n x p).
RowMatrix per_example_gradients(const Model& model, const ParamSet& params, const DataBatch& batch);

/// h(w, x) for every row of `inputs`.
RowMatrix evaluate_outputs(const Model& model, const ParamSet& params, const RowMatrix& inputs);

/// J^T u where J is the Jacobian of the stacked outputs with respect to the
/// flat parameters and u has the outputs' shape.
FlatVector outputs_vjp(const Model& model, const ParamSet& params, const RowMatrix& inputs,
                       const RowMatrix& cotangent);

/// J v by central differences of the outputs, step chosen as in hvp().
RowMatrix outputs_jvp(const Model& model, const ParamSet& params, const RowMatrix& inputs,
                      const Eigen::Ref<const FlatVector>& v);

/// Throws NonFiniteLossError carrying `step` unless `loss` is finite.
void require_finite(double loss, std::int64_t step);

}  // namespace wdlab
