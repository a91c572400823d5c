#include "wdlab/autodiff.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "wdlab/errors.hpp"

namespace wdlab {

namespace {

double fd_step(const FlatVector& w, const Eigen::Ref<const FlatVector>& v) {
  const double root_eps = std::sqrt(std::numeric_limits<double>::epsilon());
  return root_eps * (1.0 + w.norm()) / std::max(v.norm(), 1.0);
}

FlatVector collect_param_adjoints(const Tape& tape, const std::vector<FlatVector>& adj,
                                  const ParamSet& params) {
  FlatVector grad = FlatVector::Zero(params.total_dim());
  const auto& nodes = tape.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.kind != OpKind::param || adj[i].size() == 0) continue;
    const auto idx = static_cast<std::size_t>(n.param_index);
    grad.segment(params.offset(idx), params.tensor(idx).size()) += adj[i];
  }
  return grad;
}

}  // namespace

ForwardResult forward(const Model& model, const ParamSet& params, const DataBatch& batch,
                      const MixedPrecisionPolicy& policy) {
  batch.validate();
  ForwardResult result{0.0, Tape(policy)};
  result.tape.record_params(params);
  Var loss = model.loss(result.tape, params, batch);
  result.tape.set_output(loss);
  result.loss = result.tape.value(loss).item();
  return result;
}

FlatVector gradient(const Tape& tape, const ParamSet& params) {
  const FlatVector& recorded = tape.recorded_params();
  if (recorded.size() != params.total_dim() || recorded != params.flatten()) {
    throw StaleTapeError("gradient: parameters changed since the tape was recorded");
  }
  const auto adj = tape.backward(tape.output(), FlatVector::Ones(1));
  return collect_param_adjoints(tape, adj, params);
}

FlatVector hvp(const Model& model, const ParamSet& params, const DataBatch& batch,
               const Eigen::Ref<const FlatVector>& v) {
  if (v.size() != params.total_dim()) {
    throw ShapeError("hvp: direction has " + std::to_string(v.size()) + " entries, expected " +
                     std::to_string(params.total_dim()));
  }
  if (v.squaredNorm() == 0.0) throw DomainError("hvp: zero direction");
  const FlatVector w = params.flatten();
  const double h = fd_step(w, v);
  const ParamSet plus = params.with_values(w + h * v);
  const ParamSet minus = params.with_values(w - h * v);
  const FlatVector g_plus = loss_and_gradient(model, plus, batch).grad;
  const FlatVector g_minus = loss_and_gradient(model, minus, batch).grad;
  return (g_plus - g_minus) / (2.0 * h);
}

LossAndGradient loss_and_gradient(const Model& model, const ParamSet& params, const DataBatch& batch,
                                  const MixedPrecisionPolicy& policy) {
  ForwardResult fr = forward(model, params, batch, policy);
  LossAndGradient out{fr.loss, gradient(fr.tape, params), fr.finite()};
  if (!out.grad.allFinite()) out.finite = false;
  return out;
}

double evaluate_loss(const Model& model, const ParamSet& params, const DataBatch& batch,
                     const MixedPrecisionPolicy& policy) {
  return forward(model, params, batch, policy).loss;
}

RowMatrix per_example_gradients(const Model& model, const ParamSet& params, const DataBatch& batch) {
  RowMatrix grads(batch.size(), params.total_dim());
  for (Index i = 0; i < batch.size(); ++i) {
    grads.row(i) = loss_and_gradient(model, params, batch.example(i)).grad.transpose();
  }
  return grads;
}

RowMatrix evaluate_outputs(const Model& model, const ParamSet& params, const RowMatrix& inputs) {
  Tape tape;
  Var out = model.outputs(tape, params, inputs);
  return tape.value(out).matrix();
}

FlatVector outputs_vjp(const Model& model, const ParamSet& params, const RowMatrix& inputs,
                       const RowMatrix& cotangent) {
  Tape tape;
  Var out = model.outputs(tape, params, inputs);
  const Tensor& value = tape.value(out);
  if (cotangent.rows() != value.rows() || cotangent.cols() != value.cols()) {
    throw ShapeError("outputs_vjp: cotangent shape does not match outputs " + shape_string(value.shape()));
  }
  const auto adj = tape.backward(out, Eigen::Map<const FlatVector>(cotangent.data(), cotangent.size()));
  return collect_param_adjoints(tape, adj, params);
}

RowMatrix outputs_jvp(const Model& model, const ParamSet& params, const RowMatrix& inputs,
                      const Eigen::Ref<const FlatVector>& v) {
  if (v.size() != params.total_dim()) throw ShapeError("outputs_jvp: direction has wrong size");
  if (v.squaredNorm() == 0.0) return RowMatrix::Zero(inputs.rows(), model.output_dim());
  const FlatVector w = params.flatten();
  const double h = fd_step(w, v);
  const RowMatrix plus = evaluate_outputs(model, params.with_values(w + h * v), inputs);
  const RowMatrix minus = evaluate_outputs(model, params.with_values(w - h * v), inputs);
  return (plus - minus) / (2.0 * h);
}

void require_finite(double loss, std::int64_t step) {
  if (!std::isfinite(loss)) throw NonFiniteLossError(loss, step);
}

}  // namespace wdlab
