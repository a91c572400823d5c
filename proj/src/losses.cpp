#include "wdlab/losses.hpp"

#include <cmath>
#include <string>

#include "wdlab/errors.hpp"

namespace wdlab {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_binary(int label) {
  if (label != 0 && label != 1) throw DomainError("bce: label " + std::to_string(label) + " not in {0,1}");
}

}  // namespace

double loss_crossentropy(const RowMatrix& logits, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != logits.rows()) throw ShapeError("crossentropy: label count mismatch");
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= logits.cols()) {
      throw DomainError("crossentropy: label " + std::to_string(y) + " out of range");
    }
    const double zmax = logits.row(r).maxCoeff();
    total += zmax + std::log((logits.row(r).array() - zmax).exp().sum()) - logits(r, y);
  }
  return total / static_cast<double>(logits.rows());
}

double loss_bce(double logit, int label) {
  check_binary(label);
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::fabs(logit)));
}

double loss_bce_derivative(double logit, int label) {
  check_binary(label);
  return sigmoid(logit) - label;
}

double loss_bce(const Eigen::Ref<const FlatVector>& logits, std::span<const int> labels) {
  if (static_cast<Index>(labels.size()) != logits.size()) throw ShapeError("bce: label count mismatch");
  double total = 0.0;
  for (Index i = 0; i < logits.size(); ++i) total += loss_bce(logits[i], labels[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(logits.size());
}

double loss_sq(const RowMatrix& pred, const RowMatrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("loss_sq: shape mismatch");
  return (pred - target).array().square().mean();
}

RowMatrix loss_output_hessian_product(LossKind kind, const RowMatrix& outputs, const DataBatch& batch,
                                      const RowMatrix& direction) {
  if (direction.rows() != outputs.rows() || direction.cols() != outputs.cols()) {
    throw ShapeError("loss hessian: direction shape mismatch");
  }
  const double n = static_cast<double>(outputs.rows());
  RowMatrix out(outputs.rows(), outputs.cols());
  switch (kind) {
    case LossKind::softmax_xent:
      for (Index r = 0; r < outputs.rows(); ++r) {
        const double zmax = outputs.row(r).maxCoeff();
        Eigen::RowVectorXd p = (outputs.row(r).array() - zmax).exp();
        p /= p.sum();
        // (diag(p) - p p^T) u
        const double pu = p.dot(direction.row(r));
        out.row(r) = (p.array() * (direction.row(r).array() - pu)).matrix() / n;
      }
      return out;
    case LossKind::logistic_xent:
      for (Index r = 0; r < outputs.rows(); ++r) {
        const double s = sigmoid(outputs(r, 0));
        out(r, 0) = s * (1.0 - s) * direction(r, 0) / n;
      }
      return out;
    case LossKind::squared:
      (void)batch;
      return direction * (2.0 / static_cast<double>(outputs.size()));
  }
  throw ConfigError("unknown loss kind");
}

}  // namespace wdlab
