#pragma once

#include <span>

#include "wdlab/model.hpp"
#include "wdlab/tensor.hpp"

namespace wdlab {

/// Mean softmax cross-entropy. Throws DomainError for out-of-range labels.
double loss_crossentropy(const RowMatrix& logits, std::span<const int> labels);

/// Binary cross-entropy of one logit against a {0, 1} label.
double loss_bce(double logit, int label);
/// d loss_bce / d logit.
double loss_bce_derivative(double logit, int label);
/// Mean binary cross-entropy over a batch of logits.
double loss_bce(const Eigen::Ref<const FlatVector>& logits, std::span<const int> labels);

/// Mean of (pred - target)^2 over every element.
double loss_sq(const RowMatrix& pred, const RowMatrix& target);

/// Applies the Hessian of the mean batch loss with respect to the stacked
/// outputs to `direction` (same shape as `outputs`). Includes the 1/n of the
/// batch mean.
RowMatrix loss_output_hessian_product(LossKind kind, const RowMatrix& outputs, const DataBatch& batch,
                                      const RowMatrix& direction);

}  // namespace wdlab
