#include "wdlab/probes.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "json.hpp"
#include "wdlab/autodiff.hpp"
#include "wdlab/losses.hpp"

namespace wdlab {

namespace {

struct RunningMean {
  double sum = 0.0;
  double sum_sq = 0.0;
  int count = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  double mean() const { return count ? sum / count : 0.0; }
  double std_error() const {
    if (count < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sum_sq - count * m * m) / (count - 1));
    return std::sqrt(var / count);
  }
};

}  // namespace

TraceEstimate hutchinson_trace(const LinearOperator& op, Index dim, int probes, std::uint64_t seed) {
  if (probes < 1) throw DomainError("hutchinson_trace: need at least one probe");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  // Two-pass variance: samples can be large relative to their spread.
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(probes));
  FlatVector v(dim);
  for (int k = 0; k < probes; ++k) {
    for (Index i = 0; i < dim; ++i) v[i] = coin(rng) ? 1.0 : -1.0;
    samples.push_back(v.dot(op(v)));
  }
  const Eigen::Map<const Eigen::ArrayXd> s(samples.data(), probes);
  TraceEstimate out;
  out.probes = probes;
  out.estimate = s.mean();
  if (probes > 1) {
    const double var = (s - out.estimate).square().sum() / (probes - 1);
    out.std_error = std::sqrt(var / probes);
  }
  return out;
}

TraceEstimate hutchinson_trace(const Model& model, const ParamSet& params, const DataBatch& batch, int probes,
                               std::uint64_t seed) {
  const LinearOperator op = [&](const FlatVector& v) { return hvp(model, params, batch, v); };
  return hutchinson_trace(op, params.total_dim(), probes, seed);
}

double noise_scale(const RowMatrix& per_example_grads) {
  if (per_example_grads.rows() < 1) throw DomainError("noise_scale: empty gradient set");
  const Eigen::RowVectorXd mean = per_example_grads.colwise().mean();
  return (per_example_grads.rowwise() - mean).rowwise().squaredNorm().mean();
}

double noise_scale(const Model& model, const ParamSet& params, const DataBatch& dataset) {
  if (dataset.size() < 2) throw DomainError("noise_scale: dataset needs at least two examples");
  return noise_scale(per_example_gradients(model, params, dataset));
}

FlatVector covariance_vp(const RowMatrix& per_example_grads, const Eigen::Ref<const FlatVector>& v) {
  const double n = static_cast<double>(per_example_grads.rows());
  const FlatVector mean = per_example_grads.colwise().mean().transpose();
  return per_example_grads.transpose() * (per_example_grads * v) / n - mean * mean.dot(v);
}

CosineEstimate cosine_similarity_mc(const LinearOperator& a, const LinearOperator& b, Index dim, int probes,
                                    std::uint64_t seed) {
  if (probes < 1) throw DomainError("cosine_similarity: need at least one probe");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  RunningMean acc;
  CosineEstimate out;
  FlatVector v(dim);
  for (int k = 0; k < probes; ++k) {
    for (Index i = 0; i < dim; ++i) v[i] = normal(rng);
    const FlatVector av = a(v);
    const FlatVector bv = b(v);
    const double denom = av.norm() * bv.norm();
    if (!(denom > 0)) {
      ++out.skipped;
      continue;
    }
    acc.add(std::clamp(av.dot(bv) / denom, -1.0, 1.0));
  }
  out.used = acc.count;
  out.mean = acc.mean();
  out.std_error = acc.std_error();
  return out;
}

CosineEstimate cov_hessian_cosine(const Model& model, const ParamSet& params, const DataBatch& dataset, int probes,
                                  std::uint64_t seed) {
  const RowMatrix grads = per_example_gradients(model, params, dataset);
  const LinearOperator hessian = [&](const FlatVector& v) { return hvp(model, params, dataset, v); };
  const LinearOperator covariance = [&](const FlatVector& v) { return covariance_vp(grads, v); };
  return cosine_similarity_mc(hessian, covariance, params.total_dim(), probes, seed);
}

FlatVector gauss_newton_vp(const Model& model, const ParamSet& params, const DataBatch& batch,
                           const Eigen::Ref<const FlatVector>& v) {
  const RowMatrix outputs = evaluate_outputs(model, params, batch.inputs);
  const RowMatrix jv = outputs_jvp(model, params, batch.inputs, v);
  const RowMatrix weighted = loss_output_hessian_product(model.loss_kind(), outputs, batch, jv);
  return outputs_vjp(model, params, batch.inputs, weighted);
}

FlatVector residual_curvature_vp(const Model& model, const ParamSet& params, const DataBatch& batch,
                                 const Eigen::Ref<const FlatVector>& v) {
  return hvp(model, params, batch, v) - gauss_newton_vp(model, params, batch, v);
}

AveragerState make_averager(double beta) {
  if (!(beta >= 0 && beta <= 1)) throw DomainError("averager: beta must lie in [0, 1]");
  AveragerState s;
  s.beta = beta;
  return s;
}

AveragerState ema_update(AveragerState state, const Eigen::Ref<const FlatVector>& w) {
  if (state.ema.size() == 0) {
    state.ema = w;
  } else {
    if (state.ema.size() != w.size()) throw ShapeError("ema_update: dimension mismatch");
    state.ema = state.beta * state.ema + (1 - state.beta) * w;
  }
  if (state.tail_active) {
    if (state.tail_sum.size() == 0) state.tail_sum = FlatVector::Zero(w.size());
    state.tail_sum += w;
    ++state.tail_count;
  }
  return state;
}

AveragerState start_tail(AveragerState state) {
  state.tail_active = true;
  return state;
}

FlatVector tail_average(const AveragerState& state) {
  if (state.tail_count == 0) throw DomainError("tail_average: no iterates accumulated");
  return state.tail_sum / static_cast<double>(state.tail_count);
}

bool detect_stabilization(std::span<const double> losses, Index window, double band) {
  if (window < 2) throw DomainError("detect_stabilization: window must be at least 2");
  if (static_cast<Index>(losses.size()) < window) return false;
  std::vector<double> tail(losses.end() - window, losses.end());
  if (!std::all_of(tail.begin(), tail.end(), [](double x) { return std::isfinite(x); })) return false;
  std::sort(tail.begin(), tail.end());
  const std::size_t mid = tail.size() / 2;
  const double median = tail.size() % 2 ? tail[mid] : 0.5 * (tail[mid - 1] + tail[mid]);
  return tail.back() - tail.front() <= band * median;
}

DivergenceResult detect_divergence(std::span<const double> losses, double factor, Index persist) {
  if (!(factor > 1)) throw DomainError("detect_divergence: factor must exceed 1");
  if (persist < 1) throw DomainError("detect_divergence: persist must be at least 1");
  const auto n = static_cast<Index>(losses.size());
  double running_min = std::numeric_limits<double>::infinity();
  for (Index t = 0; t < n; ++t) {
    running_min = std::fmin(running_min, losses[static_cast<std::size_t>(t)]);
    if (!std::isfinite(running_min)) continue;
    const double bar = factor * running_min;
    if (losses[static_cast<std::size_t>(t)] < bar) continue;
    if (t + persist > n) break;
    bool persists = true;
    for (Index k = t; k < t + persist; ++k) {
      if (losses[static_cast<std::size_t>(k)] < bar) {
        persists = false;
        break;
      }
    }
    if (persists) return {true, t};
  }
  return {};
}

double regularized_loss(const Model& model, const ParamSet& params, const DataBatch& batch, double lambda) {
  return evaluate_loss(model, params, batch) + 0.5 * lambda * params.flatten().squaredNorm();
}

double evaluate_regularized_objective(const Model& model, const ParamSet& params, const DataBatch& dataset,
                                      double lr, double sigma2, double lambda, int probes, std::uint64_t seed) {
  if (!(sigma2 >= 0)) throw DomainError("evaluate_regularized_objective: sigma2 must be non-negative");
  const double base = regularized_loss(model, params, dataset, lambda);
  if (lr * sigma2 == 0.0) return base;
  return base + lr * sigma2 * hutchinson_trace(model, params, dataset, probes, seed).estimate;
}

NoiseBand measure_noise_band(const Model& model, const ParamSet& params, const DataBatch& dataset) {
  if (model.loss_kind() != LossKind::logistic_xent) {
    throw DomainError("measure_noise_band: needs a binary classifier with logistic loss");
  }
  NoiseBand band;
  const RowMatrix logits = evaluate_outputs(model, params, dataset.inputs);
  band.m = std::numeric_limits<double>::infinity();
  band.M = 0.0;
  band.c = std::numeric_limits<double>::infinity();
  double total = 0.0;
  const RowMatrix unit = RowMatrix::Ones(1, 1);
  for (Index i = 0; i < dataset.size(); ++i) {
    const RowMatrix x = dataset.inputs.row(i);
    const double gnorm = outputs_vjp(model, params, x, unit).norm();
    band.m = std::min(band.m, gnorm);
    band.M = std::max(band.M, gnorm);
    const int y = dataset.labels[static_cast<std::size_t>(i)];
    const double l = loss_bce(logits(i, 0), y);
    const double dl = loss_bce_derivative(logits(i, 0), y);
    total += l;
    // l'^2 / l -> 0 as the margin grows, the limit when l underflows.
    band.c = std::min(band.c, l > 0 ? dl * dl / l : 0.0);
  }
  band.loss = total / static_cast<double>(dataset.size());
  band.noise = noise_scale(model, params, dataset);
  band.ratio = band.noise / band.loss;
  band.lower = band.c * band.m * band.m;
  band.upper = band.M * band.M;
  return band;
}

namespace {

nlohmann::json number_or_null(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

double number_from(const nlohmann::json& j) {
  if (j.is_null()) return NAN;
  return j.get<double>();
}

}  // namespace

std::string to_json_line(const ProbeRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["train_loss"] = number_or_null(r.train_loss);
  j["reg_loss"] = number_or_null(r.reg_loss);
  j["test_metric"] = number_or_null(r.test_metric);
  j["param_norm"] = number_or_null(r.param_norm);
  j["grad_norm"] = number_or_null(r.grad_norm);
  j["noise_scale"] = number_or_null(r.noise_scale);
  j["eff_lr"] = number_or_null(r.eff_lr);
  if (std::isnan(r.trace_estimate)) {
    j["trace_estimate"] = nullptr;
  } else {
    j["trace_estimate"] = {{"value", number_or_null(r.trace_estimate)}, {"stderr", number_or_null(r.trace_stderr)}};
  }
  auto flags = nlohmann::ordered_json::array();
  if (r.stabilized) flags.push_back("stabilized");
  if (r.diverged) flags.push_back("diverged");
  j["flags"] = flags;
  return j.dump();
}

ProbeRecord parse_probe_record(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  ProbeRecord r;
  r.step = j.at("step").get<std::int64_t>();
  r.train_loss = number_from(j.at("train_loss"));
  r.reg_loss = number_from(j.at("reg_loss"));
  r.test_metric = number_from(j.at("test_metric"));
  r.param_norm = number_from(j.at("param_norm"));
  r.grad_norm = number_from(j.at("grad_norm"));
  r.noise_scale = number_from(j.at("noise_scale"));
  r.eff_lr = number_from(j.at("eff_lr"));
  const auto& trace = j.at("trace_estimate");
  if (!trace.is_null()) {
    r.trace_estimate = number_from(trace.at("value"));
    r.trace_stderr = number_from(trace.at("stderr"));
  }
  for (const auto& f : j.at("flags")) {
    const auto name = f.get<std::string>();
    if (name == "stabilized") r.stabilized = true;
    if (name == "diverged") r.diverged = true;
  }
  return r;
}

double estimate_noise_level(std::span<const ProbeRecord> records, std::size_t window) {
  double sum = 0.0;
  std::size_t count = 0;
  for (auto it = records.rbegin(); it != records.rend() && count < window; ++it) {
    if (std::isnan(it->noise_scale)) continue;
    sum += it->noise_scale;
    ++count;
  }
  if (count == 0) throw DomainError("estimate_noise_level: no record measured the noise scale");
  return sum / static_cast<double>(count);
}

}  // namespace wdlab
