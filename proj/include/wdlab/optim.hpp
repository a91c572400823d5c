#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <type_traits>

#include <Eigen/Dense>

#include "wdlab/errors.hpp"
#include "wdlab/tensor.hpp"

namespace wdlab {

// ---------------------------------------------------------------------------
// Learning-rate schedules
// ---------------------------------------------------------------------------

enum class ScheduleKind { constant, step_decay, cosine_warmup };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

/// Step index -> learning rate over [0, total_steps).
///
/// - constant: base_lr.
/// - step_decay: base_lr before decay_step, post_decay_lr from decay_step on.
/// - cosine_warmup: linear from base_lr / warmup_steps at t = 0 to base_lr at
///   t = warmup_steps, then cosine down to floor_ratio * base_lr at
///   t = total_steps.
struct Schedule {
  ScheduleKind kind = ScheduleKind::constant;
  double base_lr = 0.1;
  std::int64_t warmup_steps = 0;
  std::int64_t total_steps = 1;
  double floor_ratio = 1.0;
  std::int64_t decay_step = 0;
  double post_decay_lr = 0.1;

  static Schedule constant(double lr, std::int64_t total_steps);
  static Schedule step_decay(double lr, std::int64_t decay_step, double post_decay_lr, std::int64_t total_steps);
  static Schedule cosine_warmup(double lr, std::int64_t warmup_steps, std::int64_t total_steps, double floor_ratio);

  /// Throws ConfigError unless lr(t) > 0 on the whole range.
  void validate() const;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

double lr_at(const Schedule& schedule, std::int64_t t);

// ---------------------------------------------------------------------------
// Update rules
//
// `lambda` may be a scalar or an Eigen array of per-coordinate decay
// coefficients (e.g. lambda * decay_mask).
// ---------------------------------------------------------------------------

namespace detail {

template <typename Lambda>
double max_lambda(const Lambda& lambda) {
  if constexpr (std::is_arithmetic_v<Lambda>) {
    return static_cast<double>(lambda);
  } else {
    return lambda.size() == 0 ? 0.0 : static_cast<double>(lambda.maxCoeff());
  }
}

}  // namespace detail

/// SGD on the l2-regularized loss: w (1 - lr lambda) - lr g. Coupled l2 and
/// decoupled weight decay coincide for plain SGD and share this evaluation.
template <typename DerivedW, typename DerivedG, typename Lambda>
typename DerivedW::PlainObject step_sgd(const Eigen::MatrixBase<DerivedW>& w, const Eigen::MatrixBase<DerivedG>& g,
                                        typename DerivedW::Scalar lr, const Lambda& lambda) {
  if (w.size() != g.size()) throw ShapeError("step_sgd: gradient size mismatch");
  if (!(lr > 0)) throw DomainError("step_sgd: learning rate must be positive");
  return (w.array() * (1 - lr * lambda) - lr * g.array()).matrix();
}

/// w / |w|_2. A vector whose norm is already within 4 ulps of one is
/// returned unchanged, so projecting twice is bitwise the same as once.
template <typename Derived>
typename Derived::PlainObject project_sphere(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = v.norm();
  if (!(n > 0)) throw DomainError("project_sphere: zero vector");
  if (std::abs(n - 1) <= 4 * std::numeric_limits<Scalar>::epsilon()) return v;
  return v / n;
}

/// Projected SGD on the unit sphere: project(w - lr g).
template <typename DerivedW, typename DerivedG>
typename DerivedW::PlainObject step_sphere(const Eigen::MatrixBase<DerivedW>& w, const Eigen::MatrixBase<DerivedG>& g,
                                           typename DerivedW::Scalar lr) {
  if (w.size() != g.size()) throw ShapeError("step_sphere: gradient size mismatch");
  if (std::abs(w.norm() - 1) > 1e-12) throw DomainError("step_sphere: iterate is not on the unit sphere");
  const typename DerivedW::PlainObject moved = w - lr * g;
  if (!(moved.squaredNorm() > 0)) throw DomainError("step_sphere: update lands on the origin");
  return project_sphere(moved);
}

/// Sign descent with weight decay: (1 - lr lambda) w - lr sign(g), sign(0) = 0.
template <typename DerivedW, typename DerivedG, typename Lambda>
typename DerivedW::PlainObject step_signgd(const Eigen::MatrixBase<DerivedW>& w, const Eigen::MatrixBase<DerivedG>& g,
                                           typename DerivedW::Scalar lr, const Lambda& lambda) {
  if (w.size() != g.size()) throw ShapeError("step_signgd: gradient size mismatch");
  if (!(lr > 0)) throw DomainError("step_signgd: learning rate must be positive");
  if (lr * detail::max_lambda(lambda) >= 1) throw DomainError("step_signgd: lr * lambda >= 1 collapses the norm");
  return (w.array() * (1 - lr * lambda) - lr * g.array().sign()).matrix();
}

struct OptState {
  FlatVector momentum_buf;
  FlatVector first_moment;
  FlatVector second_moment;
  std::int64_t step_count = 0;

  friend bool operator==(const OptState&, const OptState&) = default;
};

/// Heavy-ball momentum on the coupled l2 gradient:
/// buf <- mu buf + g + lambda w,  w <- w - lr buf. Updates `state`.
template <typename DerivedW, typename DerivedG, typename Lambda>
typename DerivedW::PlainObject step_momentum(const Eigen::MatrixBase<DerivedW>& w, const Eigen::MatrixBase<DerivedG>& g,
                                             OptState& state, double lr, const Lambda& lambda, double mu) {
  if (w.size() != g.size()) throw ShapeError("step_momentum: gradient size mismatch");
  if (!(mu >= 0 && mu < 1)) throw DomainError("step_momentum: momentum must lie in [0, 1)");
  if (state.momentum_buf.size() == 0) state.momentum_buf = FlatVector::Zero(w.size());
  if (state.momentum_buf.size() != w.size()) throw ShapeError("step_momentum: state size mismatch");
  state.momentum_buf = (mu * state.momentum_buf.array() + g.array() + lambda * w.array()).matrix();
  ++state.step_count;
  return w - lr * state.momentum_buf;
}

/// AdamW: decoupled decay w <- w (1 - lr lambda), then the bias-corrected
/// adaptive step. Updates `state`.
template <typename DerivedW, typename DerivedG, typename Lambda>
typename DerivedW::PlainObject step_adamw(const Eigen::MatrixBase<DerivedW>& w, const Eigen::MatrixBase<DerivedG>& g,
                                          OptState& state, double lr, const Lambda& lambda, double beta1,
                                          double beta2, double eps) {
  if (w.size() != g.size()) throw ShapeError("step_adamw: gradient size mismatch");
  if (state.first_moment.size() == 0) {
    state.first_moment = FlatVector::Zero(w.size());
    state.second_moment = FlatVector::Zero(w.size());
  }
  if (state.first_moment.size() != w.size()) throw ShapeError("step_adamw: state size mismatch");
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  state.first_moment = beta1 * state.first_moment + (1 - beta1) * g;
  state.second_moment = beta2 * state.second_moment + (1 - beta2) * g.cwiseAbs2();
  const double c1 = 1 - std::pow(beta1, t);
  const double c2 = 1 - std::pow(beta2, t);
  const Eigen::ArrayXd decayed = w.array() * (1 - lr * lambda);
  const Eigen::ArrayXd update = (state.first_moment.array() / c1) / ((state.second_moment.array() / c2).sqrt() + eps);
  return (decayed - lr * update).matrix();
}

// ---------------------------------------------------------------------------
// Configured optimizer
// ---------------------------------------------------------------------------

enum class OptimizerKind { sgd, sgd_l2, sgd_decoupled_wd, sgd_momentum, signgd, signgd_wd, adamw, sphere_sgd };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  Schedule lr_schedule;
  double lambda_wd = 0.0;
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  bool decay_layernorm_params = false;

  /// Throws ConfigError for out-of-range coefficients, or a nonzero
  /// lambda_wd on kinds without a decay term (signgd, sphere_sgd).
  void validate() const;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct StepStatus {
  /// Gradient or optimizer moments contained inf/NaN; the iterate is left
  /// untouched.
  bool non_finite = false;
};

/// Dispatches a configured update rule over flat parameters. Weight decay
/// is multiplied by a per-coordinate mask (see ParamSet::decay_mask).
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, FlatVector decay_mask);

  /// One update in place with learning rate `lr`.
  StepStatus step(FlatVector& w, const FlatVector& g, double lr);

  const OptimizerConfig& config() const { return config_; }
  const OptState& state() const { return state_; }
  void set_state(OptState state) { state_ = std::move(state); }

 private:
  OptimizerConfig config_;
  Eigen::ArrayXd lambda_;
  OptState state_;
};

}  // namespace wdlab
