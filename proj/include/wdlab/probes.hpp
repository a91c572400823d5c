#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wdlab/errors.hpp"
#include "wdlab/model.hpp"
#include "wdlab/tensor.hpp"

namespace wdlab {

using LinearOperator = std::function<FlatVector(const FlatVector&)>;

struct TraceEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  int probes = 0;
};

/// Hutchinson estimate (1/k) sum v_i^T A v_i over Rademacher probes, with
/// the sample standard error. Any symmetric operator works.
TraceEstimate hutchinson_trace(const LinearOperator& op, Index dim, int probes, std::uint64_t seed);

/// Trace of the loss Hessian on `batch`, Hessian products via hvp().
TraceEstimate hutchinson_trace(const Model& model, const ParamSet& params, const DataBatch& batch, int probes,
                               std::uint64_t seed);

/// (1/n) sum_i |g_i - mean(g)|^2 over the rows of `per_example_grads`.
double noise_scale(const RowMatrix& per_example_grads);

/// Expected squared gradient noise E|grad L - grad l_i|^2 under uniform
/// sampling, by full enumeration over `dataset`.
double noise_scale(const Model& model, const ParamSet& params, const DataBatch& dataset);

/// Sigma v with Sigma the per-example gradient covariance
/// (1/n) G^T G - gbar gbar^T.
FlatVector covariance_vp(const RowMatrix& per_example_grads, const Eigen::Ref<const FlatVector>& v);

struct CosineEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int used = 0;
  int skipped = 0;  // probes where either product vanished
};

/// Monte-Carlo E[cos(A v, B v)] over standard Gaussian v.
CosineEstimate cosine_similarity_mc(const LinearOperator& a, const LinearOperator& b, Index dim, int probes,
                                    std::uint64_t seed);

/// Cosine similarity between the loss Hessian and the SGD noise covariance.
CosineEstimate cov_hessian_cosine(const Model& model, const ParamSet& params, const DataBatch& dataset, int probes,
                                  std::uint64_t seed);

/// G v for the Gauss-Newton part of H = G + E:
/// (1/n) sum_i J_i^T H_l,i J_i v.
FlatVector gauss_newton_vp(const Model& model, const ParamSet& params, const DataBatch& batch,
                           const Eigen::Ref<const FlatVector>& v);

/// E v = H v - G v.
FlatVector residual_curvature_vp(const Model& model, const ParamSet& params, const DataBatch& batch,
                                 const Eigen::Ref<const FlatVector>& v);

/// Step size governing the direction of sign-descent iterates under weight
/// decay: lr / ((1 - lr lambda) |w|).
template <typename Scalar>
Scalar effective_lr(Scalar lr, Scalar lambda, Scalar w_norm) {
  if (!(lr >= 0)) throw DomainError("effective_lr: negative learning rate");
  if (!(lambda >= 0)) throw DomainError("effective_lr: negative weight decay");
  if (!(lr * lambda < 1)) throw DomainError("effective_lr: lr * lambda must be below 1");
  if (!(w_norm > 0)) throw DomainError("effective_lr: parameter norm must be positive");
  return lr / ((1 - lr * lambda) * w_norm);
}

/// Exponential moving average plus an optional uniform tail average.
struct AveragerState {
  FlatVector ema;
  double beta = 0.999;
  FlatVector tail_sum;
  Index tail_count = 0;
  bool tail_active = false;

  friend bool operator==(const AveragerState&, const AveragerState&) = default;
};

AveragerState make_averager(double beta);
/// The first update initializes the EMA at w; later ones blend with weight beta.
AveragerState ema_update(AveragerState state, const Eigen::Ref<const FlatVector>& w);
/// Start accumulating the tail average from the next update on.
AveragerState start_tail(AveragerState state);
FlatVector tail_average(const AveragerState& state);

/// max - min of the last `window` values is at most band * their median.
bool detect_stabilization(std::span<const double> losses, Index window, double band);

struct DivergenceResult {
  bool diverged = false;
  Index onset = -1;
};

/// First index t where losses[t] >= factor * min(losses[0..t]) and the next
/// `persist` values (including t) stay at or above that bar. Non-finite
/// values count as above the bar.
DivergenceResult detect_divergence(std::span<const double> losses, double factor, Index persist);

/// L(w) + lambda/2 |w|^2.
double regularized_loss(const Model& model, const ParamSet& params, const DataBatch& batch, double lambda);

/// L_lambda(w) + lr * sigma2 * Tr(H), trace by Hutchinson with `probes`.
/// Diagnostic only.
double evaluate_regularized_objective(const Model& model, const ParamSet& params, const DataBatch& dataset,
                                      double lr, double sigma2, double lambda, int probes, std::uint64_t seed);

/// Data-measured constants of the noise-scale band for a scalar-output
/// binary classifier: per-example |grad_w h(w, x_i)| in [m, M] and
/// c = min_i l'_i^2 / l_i.
struct NoiseBand {
  double ratio = 0.0;  // noise_scale / train loss
  double lower = 0.0;  // c m^2
  double upper = 0.0;  // M^2
  double m = 0.0;
  double M = 0.0;
  double c = 0.0;
  double loss = 0.0;
  double noise = 0.0;

  bool inside() const { return ratio >= lower && ratio <= upper; }
};

NoiseBand measure_noise_band(const Model& model, const ParamSet& params, const DataBatch& dataset);

struct ProbeRecord {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double reg_loss = 0.0;
  double test_metric = 0.0;
  double param_norm = 0.0;
  double grad_norm = 0.0;
  double noise_scale = NAN;  // NaN when not measured
  double eff_lr = 0.0;
  double trace_estimate = NAN;
  double trace_stderr = NAN;
  bool stabilized = false;
  bool diverged = false;
};

/// One JSON object on a single line, no trailing newline. Unmeasured values
/// are written as null.
std::string to_json_line(const ProbeRecord& record);
ProbeRecord parse_probe_record(std::string_view line);

/// Mean noise_scale over the last `window` records that measured it; the
/// regularization strength estimate used with evaluate_regularized_objective.
double estimate_noise_level(std::span<const ProbeRecord> records, std::size_t window = 20);

}  // namespace wdlab
