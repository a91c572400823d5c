#include "wdlab/tensor.hpp"

#include <numeric>
#include <sstream>

#include "wdlab/errors.hpp"

namespace wdlab {

Tensor::Tensor(std::vector<Index> shape, FlatVector data, NumericMode mode)
    : shape_(std::move(shape)), data_(std::move(data)), mode_(mode) {
  if (shape_.empty() || shape_.size() > 2) {
    throw ShapeError("tensor: rank must be 1 or 2, got " + shape_string(shape_));
  }
  Index count = 1;
  for (Index d : shape_) {
    if (d <= 0) throw ShapeError("tensor: non-positive dimension in " + shape_string(shape_));
    count *= d;
  }
  if (count != data_.size()) {
    throw ShapeError("tensor: shape " + shape_string(shape_) + " holds " + std::to_string(count) +
                     " values, data has " + std::to_string(data_.size()));
  }
  if (!representable(data_, mode_)) {
    throw DomainError("tensor: values not representable in " +
                      std::string(to_string(mode_.kind)));
  }
}

Tensor Tensor::zeros(std::vector<Index> shape) {
  Index count = std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
  return Tensor(std::move(shape), FlatVector::Zero(count));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, FlatVector::Constant(1, value)); }

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  FlatVector data(m.size());
  Eigen::Map<RowMatrix>(data.data(), m.rows(), m.cols()) = m;
  return Tensor({m.rows(), m.cols()}, std::move(data));
}

Tensor Tensor::from_vector(const Eigen::Ref<const FlatVector>& v) { return Tensor({v.size()}, v); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_string(shape_) + " is not a scalar");
  return data_[0];
}

Tensor Tensor::quantized(NumericMode mode) const {
  Tensor out = *this;
  quantize_inplace(out.data_, mode);
  out.mode_ = mode;
  return out;
}

std::string shape_string(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void ParamSet::add(std::string name, Tensor tensor, ParamRole role) {
  for (const auto& e : entries_) {
    if (e.name == name) throw ConfigError("param set: duplicate name '" + name + "'");
  }
  offsets_.push_back(total_dim_);
  total_dim_ += tensor.size();
  entries_.push_back({std::move(name), std::move(tensor), role});
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw ConfigError("param set: no parameter named '" + name + "'");
}

FlatVector ParamSet::flatten() const {
  FlatVector flat(total_dim_);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& t = entries_[i].tensor;
    flat.segment(offsets_[i], t.size()) = t.data();
  }
  return flat;
}

void ParamSet::assign(const Eigen::Ref<const FlatVector>& flat) {
  if (flat.size() != total_dim_) {
    throw ShapeError("param set: assign expects " + std::to_string(total_dim_) + " values, got " +
                     std::to_string(flat.size()));
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& t = entries_[i].tensor;
    t = Tensor(t.shape(), flat.segment(offsets_[i], t.size()));
  }
}

ParamSet ParamSet::with_values(const Eigen::Ref<const FlatVector>& flat) const {
  ParamSet out = *this;
  out.assign(flat);
  return out;
}

FlatVector ParamSet::decay_mask(bool decay_norm_params) const {
  FlatVector mask = FlatVector::Ones(total_dim_);
  if (decay_norm_params) return mask;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto role = entries_[i].role;
    if (role == ParamRole::norm_gain || role == ParamRole::norm_bias) {
      mask.segment(offsets_[i], entries_[i].tensor.size()).setZero();
    }
  }
  return mask;
}

}  // namespace wdlab
