#include "wdlab/models.hpp"

#include <cmath>
#include <random>
#include <string>

#include "wdlab/errors.hpp"

namespace wdlab {

namespace {

RowMatrix gaussian_matrix(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  RowMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace

MlpModel::MlpModel(MLPSpec spec, RowMatrix fixed_last_layer)
    : spec_(std::move(spec)), fixed_last_(std::move(fixed_last_layer)) {}

Var MlpModel::outputs(Tape& tape, const ParamSet& params, const RowMatrix& inputs) const {
  const auto& widths = spec_.layer_widths;
  if (inputs.cols() != widths.front()) {
    throw ShapeError("mlp input: expected " + std::to_string(widths.front()) + " features, got " +
                     std::to_string(inputs.cols()));
  }
  const bool normalized = spec_.normalization == Normalization::non_affine;
  const std::size_t linear_layers = widths.size() - 1;

  Var h = tape.constant(inputs);
  std::size_t next_param = 0;
  for (std::size_t l = 0; l + 1 < linear_layers; ++l) {
    Var w = tape.param(params, next_param++);
    Var b = tape.param(params, next_param++);
    Var z = tape.add_bias(tape.matmul(h, w), b);
    if (normalized) z = tape.normalize(z, spec_.norm_eps);
    Var a = tape.relu(z);
    if (spec_.skip_connections && widths[l] == widths[l + 1]) {
      Var skip = normalized ? tape.normalize(h, spec_.norm_eps) : h;
      h = tape.add(skip, a);
    } else {
      h = a;
    }
  }
  if (spec_.last_layer_fixed) return tape.matmul(h, tape.constant(fixed_last_));
  Var w = tape.param(params, next_param++);
  Var b = tape.param(params, next_param++);
  return tape.add_bias(tape.matmul(h, w), b);
}

BuiltMlp build_mlp(const MLPSpec& spec, std::uint64_t seed) {
  const auto& widths = spec.layer_widths;
  if (widths.size() < 2) throw ConfigError("build_mlp: need at least input and output widths");
  for (Index w : widths) {
    if (w <= 0) throw ConfigError("build_mlp: widths must be positive");
  }
  if (!(spec.init_std > 0)) throw ConfigError("build_mlp: init_std must be positive");
  if (spec.loss == LossKind::logistic_xent && widths.back() != 1) {
    throw ConfigError("build_mlp: logistic loss needs output width 1");
  }

  std::mt19937_64 rng(seed);
  ParamSet params;
  const std::size_t linear_layers = widths.size() - 1;
  for (std::size_t l = 0; l + 1 < linear_layers; ++l) {
    const double he = std::sqrt(2.0 / static_cast<double>(widths[l]));
    const std::string prefix = "layer" + std::to_string(l);
    params.add(prefix + ".weight", Tensor::from_matrix(gaussian_matrix(widths[l], widths[l + 1], he, rng)),
               ParamRole::weight);
    params.add(prefix + ".bias", Tensor::zeros({widths[l + 1]}), ParamRole::bias);
  }
  const Index fan_in = widths[linear_layers - 1];
  const double out_std = spec.init_std / std::sqrt(static_cast<double>(fan_in));
  RowMatrix last = gaussian_matrix(fan_in, widths.back(), out_std, rng);
  if (spec.last_layer_fixed) return {MlpModel(spec, std::move(last)), std::move(params)};

  const std::string prefix = "layer" + std::to_string(linear_layers - 1);
  params.add(prefix + ".weight", Tensor::from_matrix(last), ParamRole::weight);
  params.add(prefix + ".bias", Tensor::zeros({widths.back()}), ParamRole::bias);
  return {MlpModel(spec, RowMatrix()), std::move(params)};
}

MLPSpec make_scale_invariant(MLPSpec spec) {
  if (spec.hidden_layers() < 1) throw ConfigError("make_scale_invariant: needs at least one hidden layer");
  spec.last_layer_fixed = true;
  spec.normalization = Normalization::non_affine;
  spec.norm_eps = 0.0;
  return spec;
}

Var QuadraticModel::outputs(Tape&, const ParamSet&, const RowMatrix&) const {
  throw DomainError("quadratic model has no per-example outputs");
}

Var QuadraticModel::loss(Tape& tape, const ParamSet& params, const DataBatch&) const {
  const Index d = diagonal_.size();
  if (params.size() != 1 || params.tensor(0).size() != d) {
    throw ShapeError("quadratic model: expects a single parameter of size " + std::to_string(d));
  }
  Var w = tape.param(params, 0);
  Var sq = tape.mul(w, w);
  // mean() divides by d, so the weights carry d/2.
  Var scaled = tape.mul(sq, tape.constant(Tensor({d}, diagonal_ * (0.5 * static_cast<double>(d)))));
  return tape.mean(scaled);
}

ParamSet QuadraticModel::make_params(const Eigen::Ref<const FlatVector>& w) const {
  ParamSet p;
  p.add("w", Tensor::from_vector(w));
  return p;
}

}  // namespace wdlab
