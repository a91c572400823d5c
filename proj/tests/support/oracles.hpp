#pragma once

// Reference implementations the library is checked against. Nothing here
// calls into the code under test beyond plain data types.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "wdlab/autodiff.hpp"
#include "wdlab/model.hpp"
#include "wdlab/models.hpp"
#include "wdlab/tensor.hpp"

namespace oracle {

using wdlab::DataBatch;
using wdlab::FlatVector;
using wdlab::Index;
using wdlab::RowMatrix;

using ScalarFn = std::function<double(const FlatVector&)>;
using VectorFn = std::function<FlatVector(const FlatVector&)>;

/// Central differences of f at w, step h per coordinate.
FlatVector fd_gradient(const ScalarFn& f, const FlatVector& w, double h = 1e-5);

/// Hessian built column by column from central differences of `grad`,
/// symmetrized.
RowMatrix dense_hessian(const VectorFn& grad, const FlatVector& w, double h = 1e-5);

/// |a - b| / max(|a|, |b|, floor) in the 2-norm.
double rel_err(const FlatVector& a, const FlatVector& b, double floor = 1e-12);

/// Straight-line MLP evaluation with explicit loops: no tape, no Eigen
/// expressions. Reads weights from the flat parameter vector in build order.
RowMatrix mlp_outputs(const wdlab::MLPSpec& spec, const RowMatrix& fixed_last, const FlatVector& w,
                      const RowMatrix& inputs);
double mlp_loss(const wdlab::MLPSpec& spec, const RowMatrix& fixed_last, const FlatVector& w,
                const DataBatch& batch);

/// Nearest value with `fraction_bits` stored bits and an exponent range of
/// `exponent_bits`, ties to even, overflow to infinity, gradual underflow.
/// Works by scaling to an integer grid and calling std::nearbyint.
double round_to_format(double x, int fraction_bits, int exponent_bits);

/// Jacobian of the stacked outputs (row-major n x k flattened) with respect
/// to w, by central differences of mlp_outputs.
RowMatrix mlp_output_jacobian(const wdlab::MLPSpec& spec, const RowMatrix& fixed_last, const FlatVector& w,
                              const RowMatrix& inputs, double h = 1e-5);

/// Gradient and Hessian of the mean batch loss with respect to the stacked
/// outputs, written out per loss.
FlatVector loss_output_gradient(wdlab::LossKind kind, const RowMatrix& outputs, const DataBatch& batch);
RowMatrix loss_output_hessian(wdlab::LossKind kind, const RowMatrix& outputs, const DataBatch& batch);

/// Dense Gauss-Newton matrix J^T H_l J.
RowMatrix gauss_newton_matrix(const wdlab::MLPSpec& spec, const RowMatrix& fixed_last, const FlatVector& w,
                              const DataBatch& batch);

/// Residual curvature E v = sum_k r_k grad^2 o_k v, by a central difference
/// of J^T r along v with r held at its value at w.
FlatVector residual_curvature(const wdlab::MLPSpec& spec, const RowMatrix& fixed_last, const FlatVector& w,
                              const DataBatch& batch, const FlatVector& v, double eps = 1e-4);

/// Bit-pattern decoders written from the format definitions.
double decode_bf16(std::uint16_t bits);
double decode_fp16(std::uint16_t bits);

/// A model whose loss is an arbitrary tape program over its parameters;
/// the batch is ignored.
class ProgramModel final : public wdlab::Model {
 public:
  using Program = std::function<wdlab::Var(wdlab::Tape&, const wdlab::ParamSet&)>;

  explicit ProgramModel(Program program) : program_(std::move(program)) {}

  wdlab::LossKind loss_kind() const override { return wdlab::LossKind::squared; }
  Index output_dim() const override { return 0; }
  wdlab::Var outputs(wdlab::Tape&, const wdlab::ParamSet&, const RowMatrix&) const override;
  wdlab::Var loss(wdlab::Tape& tape, const wdlab::ParamSet& params, const DataBatch&) const override {
    return program_(tape, params);
  }

 private:
  Program program_;
};

struct GradCase {
  std::string name;
  double worst_rel_err = 0.0;
  int cases = 0;
};

/// Gradient-versus-finite-difference checks of every tape primitive on
/// `cases` seeded inputs each. Relative error is the 2-norm ratio.
std::vector<GradCase> primitive_gradient_checks(int cases, std::uint64_t seed);

/// Same for three composite models: a plain MLP with softmax loss, a
/// normalized residual MLP, and a logistic MLP with a fixed last layer.
std::vector<GradCase> composite_gradient_checks(int cases, std::uint64_t seed);

/// Small seeded classification batch.
DataBatch random_batch(Index n, Index dim, int classes, std::mt19937_64& rng);

}  // namespace oracle
