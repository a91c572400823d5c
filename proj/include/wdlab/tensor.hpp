#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wdlab/precision.hpp"

namespace wdlab {

using Index = Eigen::Index;
using FlatVector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major array of doubles with a numeric-mode tag.
///
/// Rank-1 tensors are viewed as a single row by matrix(). A scalar is a
/// rank-1 tensor of shape {1}.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<Index> shape, FlatVector data, NumericMode mode = NumericMode::full());

  static Tensor zeros(std::vector<Index> shape);
  static Tensor scalar(double value);
  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);
  static Tensor from_vector(const Eigen::Ref<const FlatVector>& v);

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index rows() const { return rank() == 2 ? shape_[0] : 1; }
  Index cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 1); }

  const FlatVector& data() const { return data_; }
  FlatVector& data() { return data_; }
  double item() const;

  NumericMode mode() const { return mode_; }

  Eigen::Map<const RowMatrix> matrix() const { return {data_.data(), rows(), cols()}; }
  Eigen::Map<RowMatrix> matrix() { return {data_.data(), rows(), cols()}; }

  /// Copy rounded into `mode` and tagged with it.
  Tensor quantized(NumericMode mode) const;
  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.mode_ == b.mode_ && a.data_ == b.data_;
  }

 private:
  std::vector<Index> shape_{1};
  FlatVector data_ = FlatVector::Zero(1);
  NumericMode mode_ = NumericMode::full();
};

std::string shape_string(const std::vector<Index>& shape);

/// What a parameter is for; normalization gains and biases can be
/// excluded from weight decay.
enum class ParamRole { weight, bias, norm_gain, norm_bias };

struct ParamEntry {
  std::string name;
  Tensor tensor;
  ParamRole role = ParamRole::weight;

  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

/// Ordered, uniquely named parameter tensors, flattenable to R^p.
class ParamSet {
 public:
  void add(std::string name, Tensor tensor, ParamRole role = ParamRole::weight);

  std::size_t size() const { return entries_.size(); }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  const ParamEntry& entry(std::size_t i) const { return entries_.at(i); }
  const Tensor& tensor(std::size_t i) const { return entries_.at(i).tensor; }
  std::size_t index_of(const std::string& name) const;

  Index total_dim() const { return total_dim_; }
  Index offset(std::size_t i) const { return offsets_.at(i); }

  FlatVector flatten() const;
  /// Overwrite all values from a flat vector of length total_dim().
  void assign(const Eigen::Ref<const FlatVector>& flat);
  ParamSet with_values(const Eigen::Ref<const FlatVector>& flat) const;

  /// 1 where weight decay applies, 0 for normalization parameters when
  /// `decay_norm_params` is false.
  FlatVector decay_mask(bool decay_norm_params) const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<ParamEntry> entries_;
  std::vector<Index> offsets_;
  Index total_dim_ = 0;
};

}  // namespace wdlab
